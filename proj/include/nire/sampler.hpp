#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <random>
#include <vector>

#include "nire/scene.hpp"
#include "nire/task.hpp"

namespace nire {

/// Draw probabilities indexed by sim::TaskKind.
struct TaskMix {
  std::array<double, sim::kTaskCount> weights = {0.2, 0.2, 0.2, 0.2, 0.2};

  /// Throws ConfigError unless weights are non-negative and sum to 1.
  void validate() const;
  static TaskMix only(sim::TaskKind task);
  /// Picks a task from one 53-bit uniform draw.
  sim::TaskKind draw(std::mt19937_64& rng) const;
};

struct SamplerOptions {
  int width = 32;
  int height = 32;
  int channels = 1;
  sim::SceneOptions scene;
  sim::TaskConfig task;
};

/// Draws a task by weight, a scene from the seed pool, then builds the sample.
/// Scenes and their event streams are simulated once per seed.
class MultiTaskSampler {
 public:
  MultiTaskSampler(std::vector<std::uint64_t> scene_seeds, TaskMix mix, SamplerOptions options = {});

  sim::TaskSample sample(std::mt19937_64& rng);
  sim::TaskSample sample(sim::TaskKind task, std::uint64_t scene_seed, std::mt19937_64& rng);

  const std::vector<std::uint64_t>& scene_seeds() const { return seeds_; }
  const TaskMix& mix() const { return mix_; }
  const SamplerOptions& options() const { return options_; }

 private:
  struct CachedScene {
    sim::SceneModel scene;
    sim::EventStream events;
  };
  const CachedScene& cached(std::uint64_t seed);

  std::vector<std::uint64_t> seeds_;
  TaskMix mix_;
  SamplerOptions options_;
  std::map<std::uint64_t, CachedScene> cache_;
};

/// Independent generator for (seed, stream, index); used so every training
/// iteration and evaluation sample can be regenerated on its own.
std::mt19937_64 keyed_rng(std::uint64_t seed, std::uint64_t stream, std::uint64_t index);

}  // namespace nire
