// Acceptance checks, one line per criterion.
//
//   acceptance [--cli PATH] [--verbose] [criterion ...]
//
// With no criterion numbers every criterion runs. Exit status is non-zero if
// any selected criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "nire/attention.hpp"
#include "nire/bundle.hpp"
#include "nire/events.hpp"
#include "nire/exposure.hpp"
#include "nire/frame.hpp"
#include "nire/grad_check.hpp"
#include "nire/metrics.hpp"
#include "nire/model.hpp"
#include "nire/ops.hpp"
#include "nire/scene.hpp"
#include "nire/serialize.hpp"
#include "nire/time_codec.hpp"
#include "nire/trainer.hpp"
#include "nire/voxel.hpp"

using namespace nire;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

// Pinned tolerances and budgets.
constexpr double kOpGradTol = 1e-4;
constexpr double kModelGradTol = 1e-3;
constexpr double kGradSuiteSeconds = 120;
constexpr double kPolarityTol = 1e-9;
constexpr double kHalvingLo = 1.6, kHalvingHi = 2.4;
constexpr double kPhysicsSeconds = 120;
constexpr double kDistinctness = 0.1391008646874089;
constexpr double kEncodingSeconds = 10;
constexpr double kPermutationTol = 1e-10;
constexpr double kAttentionSeconds = 30;
constexpr double kOverfitPsnr = 30.0;
constexpr double kOverfitSeconds = 1800;

// Overfit protocol.
constexpr std::uint64_t kOverfitScene = 3;
constexpr int kOverfitIterations = 1500;
constexpr int kOverfitBatch = 2;

bool g_verbose = false;
std::string g_cli;

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

Tensor leaf(const Shape& s, std::mt19937_64& rng, double lo, double hi) {
  auto t = Tensor::uniform(s, rng, lo, hi, DType::f64);
  t.set_requires_grad(true);
  return t;
}

// ---------------------------------------------------------------------------
// 1. gradients

struct OpCase {
  std::string name;
  std::vector<Shape> shapes;
  double lo, hi;
  std::function<Tensor(const std::vector<Tensor>&)> fn;
};

std::vector<OpCase> op_cases() {
  using V = const std::vector<Tensor>&;
  return {
      {"add", {{3, 4}, {4}}, -1, 1, [](V x) { return add(x[0], x[1]); }},
      {"sub", {{2, 1, 4}, {3, 1}}, -1, 1, [](V x) { return sub(x[0], x[1]); }},
      {"mul", {{2, 1, 4}, {3, 1}}, -1, 1, [](V x) { return mul(x[0], x[1]); }},
      {"div", {{3, 4}, {3, 4}}, 0.5, 1.5, [](V x) { return div(x[0], x[1]); }},
      {"neg", {{5}}, -1, 1, [](V x) { return neg(x[0]); }},
      {"sqrt", {{6}}, 0.2, 2, [](V x) { return sqrt(x[0]); }},
      {"exp", {{6}}, -1, 1, [](V x) { return exp(x[0]); }},
      {"log", {{6}}, 0.2, 2, [](V x) { return log(x[0]); }},
      {"tanh", {{6}}, -2, 2, [](V x) { return tanh(x[0]); }},
      {"sigmoid", {{6}}, -3, 3, [](V x) { return sigmoid(x[0]); }},
      {"relu", {{12}}, -1, 1, [](V x) { return relu(x[0]); }},
      {"sin", {{6}}, -3, 3, [](V x) { return sin(x[0]); }},
      {"cos", {{6}}, -3, 3, [](V x) { return cos(x[0]); }},
      {"square", {{6}}, -2, 2, [](V x) { return square(x[0]); }},
      {"add_scalar", {{4}}, -1, 1, [](V x) { return add_scalar(x[0], 0.7); }},
      {"mul_scalar", {{4}}, -1, 1, [](V x) { return mul_scalar(x[0], -1.3); }},
      {"matmul", {{2, 3, 4}, {4, 5}}, -1, 1, [](V x) { return matmul(x[0], x[1]); }},
      {"softmax", {{3, 5}}, -2, 2, [](V x) { return softmax(x[0], -1); }},
      {"softmax_axis0", {{3, 5}}, -2, 2, [](V x) { return softmax(x[0], 0); }},
      {"conv2d", {{2, 3, 5, 5}, {4, 3, 3, 3}, {4}}, -1, 1,
       [](V x) { return conv2d(x[0], x[1], 1, 1, x[2]); }},
      {"conv2d_stride2", {{1, 2, 7, 7}, {3, 2, 3, 3}}, -1, 1, [](V x) { return conv2d(x[0], x[1], 2, 0); }},
      {"layernorm", {{3, 6}, {6}, {6}}, -1, 1, [](V x) { return layernorm(x[0], -1, 1e-5, x[1], x[2]); }},
      {"reshape", {{2, 6}}, -1, 1, [](V x) { return reshape(x[0], {3, 4}); }},
      {"permute", {{2, 3, 4}}, -1, 1, [](V x) { return permute(x[0], {2, 0, 1}); }},
      {"transpose", {{2, 3, 4}}, -1, 1, [](V x) { return transpose(x[0], -1, -2); }},
      {"concat", {{2, 3}, {2, 2}}, -1, 1, [](V x) { return concat({x[0], x[1]}, 1); }},
      {"slice", {{4, 5}}, -1, 1, [](V x) { return slice(x[0], 1, 1, 4); }},
      {"sum", {{3, 4}}, -1, 1, [](V x) { return sum(x[0]); }},
      {"sum_axis", {{3, 4}}, -1, 1, [](V x) { return sum(x[0], 0, true); }},
      {"mean", {{3, 4}}, -1, 1, [](V x) { return mean(x[0]); }},
      {"mean_axis", {{3, 4}}, -1, 1, [](V x) { return mean(x[0], 1); }},
      {"broadcast_to", {{3, 1}}, -1, 1, [](V x) { return broadcast_to(x[0], {2, 3, 4}); }},
      {"upsample_bilinear2x", {{1, 2, 3, 4}}, -1, 1, [](V x) { return upsample_bilinear2x(x[0]); }},
      {"avg_pool2x", {{1, 2, 4, 6}}, -1, 1, [](V x) { return avg_pool2x(x[0]); }},
      {"pad2d", {{1, 1, 3, 3}}, -1, 1, [](V x) { return pad2d(x[0], 1, 0, 2, 1); }},
      {"gather", {{2, 3}}, -1, 1, [](V x) { return gather(x[0], {5, 0, 0, 3, 2}, {5}); }},
  };
}

Outcome gradient_suite() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(11);
  double worst_op = 0.0;
  std::string worst_name;
  for (const auto& c : op_cases()) {
    std::vector<Tensor> inputs;
    for (const auto& s : c.shapes) inputs.push_back(leaf(s, rng, c.lo, c.hi));
    const auto out_shape = c.fn(inputs).shape();
    const auto probe = Tensor::randn(out_shape, rng, 1.0, DType::f64);
    const auto r = grad_check_params([&] { return sum(mul(c.fn(inputs), probe)); }, inputs);
    if (g_verbose) std::printf("  %-20s %.2e\n", c.name.c_str(), r.max_rel_error);
    if (r.max_rel_error >= worst_op) {
      worst_op = r.max_rel_error;
      worst_name = c.name;
    }
  }
  const auto model = check_model_gradients(tiny_config(), 8);
  const double secs = seconds_since(t0);
  const bool pass = worst_op < kOpGradTol && model.max_rel_error < kModelGradTol && model.key_bias_gradient < 1e-12 &&
                    secs < kGradSuiteSeconds;
  return {pass, "ops worst " + fmt("%.2e", worst_op) + " (" + worst_name + ") < 1e-4; model " +
                    std::to_string(model.components) + " params " + fmt("%.2e", model.max_rel_error) + " < 1e-3; " +
                    fmt("%.1f", secs) + "s < 120s"};
}

// ---------------------------------------------------------------------------
// 2. physics

sim::Frame dense_reference(const sim::SceneModel& scene, int n) {
  sim::Frame f(scene.width, scene.height, 1);
  for (int y = 0; y < scene.height; ++y) {
    for (int x = 0; x < scene.width; ++x) {
      long double acc = 0.0L;
      for (int k = 0; k < n; ++k) acc += scene.value(x + 0.5, y + 0.5, (k + 0.5) / n);
      f.at(0, y, x) = static_cast<double>(acc / n);
    }
  }
  return f;
}

double max_gap(const sim::Frame& a, const sim::Frame& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.pixels.size(); ++i) m = std::max(m, std::abs(a.pixels[i] - b.pixels[i]));
  return m;
}

Outcome physics_suite() {
  const auto t0 = Clock::now();
  const sim::EventParams params;

  // (a) each segment's voxel mass equals its signed event count per pixel.
  double polarity_gap = 0.0;
  for (std::uint64_t s = 0; s < 16; ++s) {
    const auto scene = sim::random_scene(500 + s, 16, 16, 1, {.max_speed = 12.0});
    const auto stream = sim::simulate_events(scene, params);
    const auto seq = sim::voxel_sequence(stream, 4, 5, DType::f64);
    for (int m = 0; m < 4; ++m) {
      std::vector<double> expected(16 * 16, 0.0);
      const double lo = m / 4.0, hi = (m + 1) / 4.0;
      for (const auto& e : stream.events) {
        const bool in = m == 0 ? e.t <= hi : (e.t > lo && e.t <= hi);
        if (in) expected[static_cast<std::size_t>(e.y) * 16 + e.x] += e.p;
      }
      const auto grid = seq.grids[static_cast<std::size_t>(m)].to_vector();
      for (int px = 0; px < 256; ++px) {
        double mass = 0.0;
        for (int b = 0; b < 5; ++b) mass += grid[static_cast<std::size_t>(b) * 256 + px];
        polarity_gap = std::max(polarity_gap, std::abs(mass - expected[px]));
      }
    }
  }

  // (b) log intensity at t = 1 from the t = 0 value plus C times the signed count.
  double edi_gap = 0.0;
  for (std::uint64_t s = 0; s < 16; ++s) {
    const auto scene = sim::random_scene(700 + s, 16, 16, 1, {.max_speed = 12.0});
    const auto counts = sim::signed_event_counts(sim::simulate_events(scene, params));
    for (int y = 0; y < 16; ++y) {
      for (int x = 0; x < 16; ++x) {
        const double l0 = std::log(scene.luminance(x + 0.5, y + 0.5, 0.0) + params.log_floor);
        const double l1 = std::log(scene.luminance(x + 0.5, y + 0.5, 1.0) + params.log_floor);
        edi_gap = std::max(edi_gap, std::abs(l0 + params.contrast * counts[static_cast<std::size_t>(y) * 16 + x] - l1));
      }
    }
  }

  // (c) midpoint exposure error against a 65536-sample reference.
  const auto scene = sim::moving_sprite_scene();
  const auto reference = dense_reference(scene, 65536);
  std::vector<double> errors;
  for (int n : {4, 8, 16, 32}) errors.push_back(max_gap(sim::expose(scene, sim::ShutterSpec::global(0, 1), n), reference));
  double ratio_lo = 1e9, ratio_hi = 0;
  for (std::size_t i = 1; i < errors.size(); ++i) {
    const double r = errors[i - 1] / errors[i];
    ratio_lo = std::min(ratio_lo, r);
    ratio_hi = std::max(ratio_hi, r);
  }
  const double secs = seconds_since(t0);
  const bool pass = polarity_gap <= kPolarityTol && edi_gap < params.contrast && ratio_lo > kHalvingLo &&
                    ratio_hi < kHalvingHi && secs < kPhysicsSeconds;
  return {pass, "polarity gap " + fmt("%.1e", polarity_gap) + " <= 1e-9; log-intensity gap " + fmt("%.3f", edi_gap) +
                    " < C; halving ratios " + fmt("%.2f", ratio_lo) + ".." + fmt("%.2f", ratio_hi) + " in (1.6, 2.4); " +
                    fmt("%.1f", secs) + "s < 120s"};
}

// ---------------------------------------------------------------------------
// 3. encodings

Outcome encoding_suite() {
  const auto t0 = Clock::now();
  bool exact = gamma(0.0, 2) == std::vector<double>{0, 1, 0, 1} && gamma(0.5, 2) == std::vector<double>{1, 0, 0, -1} &&
               gamma(1.0, 2) == std::vector<double>{0, -1, 0, 1};

  bool rows_constant = true;
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 20 && rows_constant; ++trial) {
    const int h = 16;
    const double alpha = 0.5 * u(rng) / h;
    const auto rs = sim::ShutterSpec::rolling(0.2 * u(rng), alpha, 0.3 * u(rng));
    for (int level = 0; level < 3; ++level) {
      const auto map = shutter_encoding_map(rs, h, 24, level, 6, DType::f64);
      const auto v = map.to_vector();
      const auto w = map.dim(1), d = map.dim(2);
      for (std::int64_t y = 0; y < map.dim(0); ++y) {
        for (std::int64_t x = 1; x < w; ++x) {
          for (std::int64_t k = 0; k < d; ++k) {
            if (v[(y * w + x) * d + k] != v[(y * w) * d + k]) rows_constant = false;
          }
        }
      }
    }
  }

  double min_dist = std::numeric_limits<double>::infinity();
  std::vector<std::vector<double>> enc;
  for (int i = 0; i < 512; ++i) enc.push_back(gamma(i / 511.0, 6));
  for (int i = 0; i < 512; ++i) {
    for (int j = i + 1; j < 512; ++j) {
      double d = 0.0;
      for (int k = 0; k < 12; ++k) d = std::max(d, std::abs(enc[i][k] - enc[j][k]));
      min_dist = std::min(min_dist, d);
    }
  }
  const bool distinct = std::abs(min_dist - kDistinctness) <= 1e-9 * kDistinctness;
  const double secs = seconds_since(t0);
  return {exact && rows_constant && distinct && secs < kEncodingSeconds,
          std::string("exact values ") + (exact ? "ok" : "WRONG") + "; rolling rows " +
              (rows_constant ? "constant" : "NOT constant") + "; min grid separation " + fmt("%.16f", min_dist) + "; " +
              fmt("%.2f", secs) + "s < 10s"};
}

// ---------------------------------------------------------------------------
// 4. attention

ModelConfig attention_config() {
  ModelConfig c;
  c.levels = 2;
  c.channels = {4, 6};
  c.segments = 2;
  c.bins = 3;
  c.window = 2;
  c.frequencies = 2;
  c.attn_dim = 4;
  c.heads = 2;
  c.self_layers = 1;
  c.dtype = DType::f64;
  return c;
}

Outcome attention_suite() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(21);
  ParamSet ps;
  ParamFactory f(ps, 9, DType::f64);
  auto block = make_attention_block(f, "probe", 6, 8, 4, 2, 2, 2);

  // Film queries over latent keys: permuting the keys (with their times) permutes nothing in the output.
  const int tq = 4, tk = 12;
  const auto q = Tensor::randn({3, tq, 6}, rng, 1.0, DType::f64);
  const auto kv = Tensor::randn({3, tk, 6}, rng, 1.0, DType::f64);
  const auto qt = Tensor::uniform({3, tq, 8}, rng, -1, 1, DType::f64);
  const auto kt = Tensor::uniform({3, tk, 8}, rng, -1, 1, DType::f64);
  std::vector<std::int64_t> perm(tk);
  for (int i = 0; i < tk; ++i) perm[i] = i;
  std::shuffle(perm.begin(), perm.end(), rng);
  auto permute_tokens = [&](const Tensor& x) {
    const auto c = x.dim(2);
    std::vector<std::int64_t> idx;
    for (std::int64_t w = 0; w < x.dim(0); ++w)
      for (int i = 0; i < tk; ++i)
        for (std::int64_t k = 0; k < c; ++k) idx.push_back((w * tk + perm[i]) * c + k);
    return gather(x, idx, x.shape());
  };
  const auto base = time_aware_attention(q, kv, qt, kt, block.attention);
  const auto shuffled = time_aware_attention(q, permute_tokens(kv), qt, permute_tokens(kt), block.attention);
  double perm_gap = max_abs_diff(base, shuffled);
  // The full block too, once the position table carries no offsets.
  auto flat = block;
  flat.position_table = Tensor::zeros(block.position_table.shape(), DType::f64);
  perm_gap = std::max(perm_gap, max_abs_diff(flat(q, kv, qt, kt), flat(q, permute_tokens(kv), qt, permute_tokens(kt))));

  // Distinct target shutters give distinct outputs from the whole model.
  NireModel model(attention_config());
  auto scene = sim::random_scene(4, 8, 8, 1, {.max_speed = 3.0});
  std::mt19937_64 srng(4);
  sim::TaskConfig tc;
  tc.exposure_samples = 16;
  tc.unroll_duration_rows = 2;
  const auto sample = sim::make_task_sample(scene, sim::TaskKind::vfi, srng, tc);
  const auto input = prepare_input(sample, model.config());
  const std::vector<sim::ShutterSpec> shutters = {sim::ShutterSpec::instant(0.25), sim::ShutterSpec::instant(0.75),
                                                  sim::ShutterSpec::global(0.0, 1.0),
                                                  sim::ShutterSpec::rolling(0.0, 0.05, 0.3)};
  std::vector<Tensor> outs;
  for (const auto& s : shutters) outs.push_back(model.forward(input, s));
  double min_sep = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < outs.size(); ++i)
    for (std::size_t j = i + 1; j < outs.size(); ++j) min_sep = std::min(min_sep, max_abs_diff(outs[i], outs[j]));

  // Window partition round trip.
  bool round_trip = true;
  for (const auto& shape : std::vector<Shape>{{3, 5, 8, 8}, {1, 2, 4, 12}, {6, 1, 16, 4}}) {
    const auto maps = Tensor::randn(shape, rng, 1.0, DType::f64);
    for (int r : {1, 2, 4}) {
      const auto back = window_reverse(window_partition(maps, r), static_cast<int>(shape[0]),
                                       static_cast<int>(shape[2]), static_cast<int>(shape[3]), r);
      round_trip = round_trip && bit_equal(back, maps);
    }
  }
  const double secs = seconds_since(t0);
  return {perm_gap <= kPermutationTol && min_sep > 0.0 && round_trip && secs < kAttentionSeconds,
          "key permutation gap " + fmt("%.1e", perm_gap) + " <= 1e-10; min output separation " + fmt("%.2e", min_sep) +
              " > 0; window round trip " + (round_trip ? "bit-exact" : "BROKEN") + "; " + fmt("%.2f", secs) + "s < 30s"};
}

// ---------------------------------------------------------------------------
// 5 and 6. overfit runs

TrainConfig overfit_config(bool use_events) {
  TrainConfig c;
  c.model = desk_config();
  c.model.use_events = use_events;
  c.iterations = kOverfitIterations;
  c.batch_size = kOverfitBatch;
  c.scene_seed = kOverfitScene;
  c.scene_count = 1;
  c.seed = 1;
  return c;
}

struct OverfitRun {
  std::map<std::string, double> psnr;
  double seconds = 0.0;
};

double train_set_psnr(const NireModel& model, const TrainConfig& c, sim::TaskKind task, int vfi_index, int samples) {
  EvalOptions eo;
  eo.tasks = {task};
  eo.samples = samples;
  eo.scene_seeds = {c.scene_seed};
  eo.data = c.data;
  eo.data.task.vfi_index = vfi_index;
  return evaluate(model, eo).front().psnr;
}

OverfitRun overfit(bool use_events) {
  const auto c = overfit_config(use_events);
  const auto t0 = Clock::now();
  Trainer trainer(c);
  trainer.run([&](const StepStats& s) {
    if (g_verbose && s.iteration % 100 == 0) {
      std::printf("  [%s] iter %d loss %.5f  vfi %.2f  %.0fs\n", use_events ? "full" : "frames only", s.iteration,
                  s.loss, train_set_psnr(trainer.model(), c, sim::TaskKind::vfi, 2, 1), seconds_since(t0));
      std::fflush(stdout);
    }
  });
  OverfitRun run;
  run.seconds = seconds_since(t0);
  const auto& m = trainer.model();
  run.psnr["deblur"] = train_set_psnr(m, c, sim::TaskKind::deblur, -1, 1);
  run.psnr["vfi_mid"] = train_set_psnr(m, c, sim::TaskKind::vfi, 2, 1);
  run.psnr["unroll"] = train_set_psnr(m, c, sim::TaskKind::unroll, -1, 1);
  // Both reconstruction variants (blurred and rolling) appear among these draws.
  run.psnr["reconstruct"] = train_set_psnr(m, c, sim::TaskKind::reconstruct, -1, 6);
  run.psnr["deblur_vfi"] = train_set_psnr(m, c, sim::TaskKind::deblur_vfi, -1, 3);
  double vfi = 0.0;
  for (int i = 1; i < c.data.task.vfi_steps; ++i) vfi += train_set_psnr(m, c, sim::TaskKind::vfi, i, 1);
  run.psnr["vfi_all"] = vfi / (c.data.task.vfi_steps - 1);
  return run;
}

std::optional<OverfitRun> g_full_run;

const OverfitRun& full_run() {
  if (!g_full_run) g_full_run = overfit(true);
  return *g_full_run;
}

Outcome overfit_acceptance() {
  const auto& run = full_run();
  bool pass = run.seconds < kOverfitSeconds;
  std::string detail;
  for (const char* task : {"deblur", "vfi_mid", "unroll", "reconstruct"}) {
    const double p = run.psnr.at(task);
    pass = pass && p >= kOverfitPsnr;
    detail += std::string(task) + " " + fmt("%.2f", p) + " ";
  }
  detail += "dB (>= 30; deblur_vfi " + fmt("%.2f", run.psnr.at("deblur_vfi")) + "); " + fmt("%.0f", run.seconds) +
            "s < 1800s";
  return {pass, detail};
}

Outcome ablation_direction() {
  const auto& full = full_run();
  const auto frames_only = overfit(false);
  const double a = full.psnr.at("vfi_all"), b = frames_only.psnr.at("vfi_all");
  return {b < a, "vfi PSNR frames only " + fmt("%.2f", b) + " < full " + fmt("%.2f", a) +
                     " dB (mean of t = 1/4, 1/2, 3/4; midpoint " + fmt("%.2f", frames_only.psnr.at("vfi_mid")) +
                     " vs " + fmt("%.2f", full.psnr.at("vfi_mid")) + ")"};
}

// ---------------------------------------------------------------------------
// 7. formats

template <class T, class Write, class Read>
bool stable_bytes(const T& original, Write write, Read read) {
  std::ostringstream first;
  write(first, original);
  std::istringstream in(first.str());
  const T value = read(in);
  std::ostringstream second;
  write(second, value);
  return first.str() == second.str() && !first.str().empty();
}

std::optional<std::pair<int, int>> pgm_size(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::string magic;
  int w = 0, h = 0, maxval = 0;
  if (!(in >> magic >> w >> h >> maxval) || magic != "P5") return std::nullopt;
  in.get();
  const std::size_t bytes = static_cast<std::size_t>(w) * h * (maxval > 255 ? 2 : 1);
  std::string payload(bytes, '\0');
  if (!in.read(payload.data(), static_cast<std::streamsize>(bytes))) return std::nullopt;
  if (in.peek() != std::char_traits<char>::eof()) return std::nullopt;
  return std::pair{w, h};
}

Outcome format_round_trips() {
  std::mt19937_64 rng(8);
  bool nrxt = true;
  for (DType dt : {DType::f32, DType::f64}) {
    nrxt = nrxt && stable_bytes(Tensor::randn({2, 3, 5}, rng, 1.0, dt),
                                [](std::ostream& os, const Tensor& t) { write_tensor(os, t); },
                                [](std::istream& is) { return read_tensor(is); });
  }
  const auto stream = sim::simulate_events(sim::random_scene(9, 16, 12));
  const bool nrev = stream.size() > 0 &&
                    stable_bytes(stream, [](std::ostream& os, const sim::EventStream& e) { sim::write_events(os, e); },
                                 [](std::istream& is) { return sim::read_events(is); });
  const bool nrck = stable_bytes(NireModel(tiny_config()).state(),
                                 [](std::ostream& os, const NamedTensors& v) { write_checkpoint(os, v); },
                                 [](std::istream& is) { return read_checkpoint(is); });

  std::string cli = "skipped (no --cli)";
  bool cli_ok = false;
  if (!g_cli.empty()) {
    const auto dir = fs::temp_directory_path() / "nire_acceptance_cli";
    fs::remove_all(dir);
    fs::create_directories(dir);
    TrainConfig tc;
    tc.model = tiny_config();
    save_checkpoint(dir / "model.nrck", Trainer(tc).state());
    const std::string q = "\"";
    const std::string gen = q + g_cli + q + " gen-data --width 16 --height 8 --tasks vfi --seed 4 --out " + q +
                            (dir / "data").string() + q + " > /dev/null";
    const std::string infer = q + g_cli + q + " infer --checkpoint " + q + (dir / "model.nrck").string() + q +
                              " --bundle " + q + (dir / "data" / "scene4_vfi").string() + q +
                              " --shutter gs:0.25,0.5 --out " + q + (dir / "out.pgm").string() + q + " > /dev/null";
    const int gen_status = std::system(gen.c_str());
    const int infer_status = gen_status == 0 ? std::system(infer.c_str()) : -1;
    const auto size = pgm_size(dir / "out.pgm");
    cli_ok = gen_status == 0 && infer_status == 0 && size && size->first == 16 && size->second == 8;
    cli = cli_ok ? "infer wrote a 16x8 P5 image" : "infer FAILED";
    fs::remove_all(dir);
  }
  return {nrxt && nrev && nrck && cli_ok, std::string("NRXT ") + (nrxt ? "stable" : "CHANGED") + ", NREV " +
                                               (nrev ? "stable" : "CHANGED") + ", NRCK " +
                                               (nrck ? "stable" : "CHANGED") + "; " + cli};
}

}  // namespace

int main(int argc, char** argv) {
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--verbose") {
      g_verbose = true;
    } else if (arg == "--cli" && i + 1 < argc) {
      g_cli = argv[++i];
    } else {
      selected.insert(std::atoi(arg.c_str()));
    }
  }
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"gradient suite", gradient_suite},
      {"physics suite", physics_suite},
      {"encoding suite", encoding_suite},
      {"attention semantics", attention_suite},
      {"multi-task overfit", overfit_acceptance},
      {"event ablation direction", ablation_direction},
      {"format round trips", format_round_trips},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int number = static_cast<int>(i) + 1;
    if (!selected.empty() && !selected.count(number)) continue;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    failures += o.pass ? 0 : 1;
    std::printf("criterion %d %-26s %s  %s\n", number, criteria[i].first, o.pass ? "PASS" : "FAIL", o.detail.c_str());
    std::fflush(stdout);
  }
  return failures ? 1 : 0;
}
