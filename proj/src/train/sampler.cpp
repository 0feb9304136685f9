#include "nire/sampler.hpp"

#include <cmath>

#include "nire/error.hpp"

namespace nire {

void TaskMix::validate() const {
  double total = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw ConfigError("task weights must be non-negative");
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-9) throw ConfigError("task weights must sum to 1");
}

TaskMix TaskMix::only(sim::TaskKind task) {
  TaskMix m;
  m.weights.fill(0.0);
  m.weights[static_cast<std::size_t>(task)] = 1.0;
  return m;
}

sim::TaskKind TaskMix::draw(std::mt19937_64& rng) const {
  const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
  double acc = 0.0;
  int last = 0;
  for (int i = 0; i < sim::kTaskCount; ++i) {
    if (weights[i] <= 0.0) continue;
    last = i;
    acc += weights[i];
    if (u < acc) return static_cast<sim::TaskKind>(i);
  }
  return static_cast<sim::TaskKind>(last);
}

MultiTaskSampler::MultiTaskSampler(std::vector<std::uint64_t> scene_seeds, TaskMix mix, SamplerOptions options)
    : seeds_(std::move(scene_seeds)), mix_(mix), options_(std::move(options)) {
  if (seeds_.empty()) throw ContractError("sampler needs at least one scene");
  mix_.validate();
}

const MultiTaskSampler::CachedScene& MultiTaskSampler::cached(std::uint64_t seed) {
  auto it = cache_.find(seed);
  if (it == cache_.end()) {
    CachedScene c;
    c.scene = sim::random_scene(seed, options_.width, options_.height, options_.channels, options_.scene);
    c.events = sim::simulate_events(c.scene, options_.task.events);
    it = cache_.emplace(seed, std::move(c)).first;
  }
  return it->second;
}

sim::TaskSample MultiTaskSampler::sample(std::mt19937_64& rng) {
  const auto task = mix_.draw(rng);
  const auto seed = seeds_[static_cast<std::size_t>(rng() % seeds_.size())];
  return sample(task, seed, rng);
}

sim::TaskSample MultiTaskSampler::sample(sim::TaskKind task, std::uint64_t scene_seed, std::mt19937_64& rng) {
  const auto& c = cached(scene_seed);
  auto s = sim::make_task_sample(c.scene, task, rng, options_.task, &c.events);
  s.scene_seed = scene_seed;
  return s;
}

std::mt19937_64 keyed_rng(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) {
  auto lo = [](std::uint64_t v) { return static_cast<std::uint32_t>(v); };
  auto hi = [](std::uint64_t v) { return static_cast<std::uint32_t>(v >> 32); };
  std::seed_seq seq{lo(seed), hi(seed), lo(stream), hi(stream), lo(index), hi(index)};
  return std::mt19937_64(seq);
}

}  // namespace nire
