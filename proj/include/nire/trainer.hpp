#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "nire/losses.hpp"
#include "nire/model.hpp"
#include "nire/optim.hpp"
#include "nire/sampler.hpp"

namespace nire {

struct TrainConfig {
  ModelConfig model;
  int iterations = 2000;
  int batch_size = 4;
  AdamOptions optimizer;
  TaskMix mix;
  std::uint64_t seed = 1;
  double feature_weight = 0.1;
  double charbonnier_eps = kCharbonnierEps;
  /// Training scenes are seeds scene_seed .. scene_seed + scene_count - 1.
  std::uint64_t scene_seed = 1;
  int scene_count = 1;
  SamplerOptions data;
  /// 0 disables periodic checkpoints.
  int checkpoint_every = 0;
  std::string checkpoint_path;
  std::string loss_csv;
  /// Where the offending batch is written when the loss goes non-finite.
  std::string dump_dir;

  /// Throws ConfigError for non-positive sizes, bad weights, or a model/data mismatch.
  void validate() const;
  std::vector<std::uint64_t> scene_pool() const;
};

/// JSON object with the keys documented in the README. Missing keys keep defaults;
/// unknown keys are rejected. Throws ConfigError.
TrainConfig parse_train_config(const std::string& json_text);
TrainConfig load_train_config(const std::string& path);
std::string train_config_to_json(const TrainConfig& config);

struct StepStats {
  int iteration = 0;
  double loss = 0.0;
  double charbonnier = 0.0;
  double feature = 0.0;
  std::vector<sim::TaskKind> tasks;
};

class Trainer {
 public:
  explicit Trainer(TrainConfig config);

  /// Runs the next iteration. Throws NumericError (after dumping the batch
  /// when dump_dir is set) if the loss is not finite.
  StepStats step();
  /// Steps until config.iterations, writing the loss CSV and checkpoints.
  void run(const std::function<void(const StepStats&)>& on_step = {});

  int iteration() const { return iteration_; }
  const TrainConfig& config() const { return config_; }
  NireModel& model() { return model_; }
  const NireModel& model() const { return model_; }
  MultiTaskSampler& sampler() { return sampler_; }
  const Adam& optimizer() const { return optimizer_; }

  /// Model parameters, optimizer moments, and "optim.iteration".
  NamedTensors state() const;
  void load_state(const NamedTensors& state);
  void save(const std::string& path) const;

 private:
  TrainConfig config_;
  NireModel model_;
  Adam optimizer_;
  MultiTaskSampler sampler_;
  FeatureLoss features_;
  int iteration_ = 0;
};

std::string loss_csv_header();
std::string loss_csv_row(const StepStats& stats);

/// Loads a checkpoint; with `expected` set, throws ConfigError when the stored
/// model configuration differs.
NireModel load_model(const std::string& path, const std::optional<ModelConfig>& expected = std::nullopt);

struct EvalOptions {
  std::vector<sim::TaskKind> tasks = {sim::kAllTasks.begin(), sim::kAllTasks.end()};
  int samples = 8;
  std::uint64_t seed = 1000;
  /// When non-empty, samples cycle through these scenes instead of fresh held-out ones.
  std::vector<std::uint64_t> scene_seeds;
  SamplerOptions data;
};

struct EvalRow {
  sim::TaskKind task = sim::TaskKind::deblur;
  int samples = 0;
  double psnr = 0.0;
  double ssim = 0.0;
};

using Predictor = std::function<sim::Frame(const sim::TaskSample&)>;

/// Mean PSNR / SSIM per task for any predictor.
std::vector<EvalRow> evaluate_predictor(const Predictor& predict, const EvalOptions& options);
std::vector<EvalRow> evaluate(const NireModel& model, const EvalOptions& options);
/// Single forward pass without graph recording.
sim::Frame predict(const NireModel& model, const sim::TaskSample& sample);

std::string eval_csv(const std::vector<EvalRow>& rows);
std::string eval_table(const std::vector<EvalRow>& rows);

struct ModelGradReport {
  double max_rel_error = 0.0;
  std::string worst_param;
  std::size_t worst_index = 0;
  std::size_t components = 0;
  /// Largest |gradient| over key biases, which the softmax makes exactly zero.
  double key_bias_gradient = 0.0;
};

/// Finite-difference check of every parameter of a float64 model on one
/// joint deblur + interpolation sample of `size` x `size` pixels. Parameters
/// are jittered first so no activation sits exactly on a relu kink.
ModelGradReport check_model_gradients(const ModelConfig& config, int size, std::uint64_t seed = 5, double h = 1e-5);

}  // namespace nire
