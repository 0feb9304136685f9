// nire: data generation, training, evaluation and inference front end.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "nire/bundle.hpp"
#include "nire/error.hpp"
#include "nire/events.hpp"
#include "nire/serialize.hpp"
#include "nire/time_codec.hpp"
#include "nire/trainer.hpp"
#include "nire/voxel.hpp"

namespace fs = std::filesystem;
using namespace nire;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitNumeric = 3;

std::vector<sim::TaskKind> parse_tasks(const std::string& text) {
  if (text == "all") return {sim::kAllTasks.begin(), sim::kAllTasks.end()};
  std::vector<sim::TaskKind> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(sim::parse_task(item));
  if (out.empty()) throw ConfigError("no task given");
  return out;
}

DType parse_dtype(const std::string& s) {
  if (s == "f32") return DType::f32;
  if (s == "f64") return DType::f64;
  throw ConfigError("dtype must be f32 or f64");
}

struct DataFlags {
  int width = 32;
  int height = 32;
  int channels = 1;
  std::uint64_t seed = 1;
};

void add_data_flags(CLI::App* cmd, DataFlags& d) {
  cmd->add_option("--width", d.width, "image width")->capture_default_str();
  cmd->add_option("--height", d.height, "image height")->capture_default_str();
  cmd->add_option("--channels", d.channels, "1 or 3")->capture_default_str();
  cmd->add_option("--seed", d.seed, "scene seed")->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Neural image re-exposure toolkit"};
  app.require_subcommand(1);

  // gen-data
  DataFlags gen;
  std::string gen_out = "data", gen_tasks = "all";
  int gen_count = 1, gen_samples = 64;
  auto* gen_cmd = app.add_subcommand("gen-data", "write task bundles (frames, events, manifest) for seeded scenes");
  add_data_flags(gen_cmd, gen);
  gen_cmd->add_option("--out", gen_out, "output directory")->capture_default_str();
  gen_cmd->add_option("--tasks", gen_tasks, "comma-separated tasks or 'all'")->capture_default_str();
  gen_cmd->add_option("--count", gen_count, "scenes to generate")->capture_default_str();
  gen_cmd->add_option("--exposure-samples", gen_samples, "time samples per exposure")->capture_default_str();

  // simulate-events
  DataFlags ev;
  std::string ev_out = "events.nrev", ev_csv;
  sim::EventParams ev_params;
  auto* ev_cmd = app.add_subcommand("simulate-events", "simulate the event stream of a seeded scene");
  add_data_flags(ev_cmd, ev);
  ev_cmd->add_option("--out", ev_out, "NREV output")->capture_default_str();
  ev_cmd->add_option("--csv", ev_csv, "optional CSV export");
  ev_cmd->add_option("--contrast", ev_params.contrast, "log contrast threshold")->capture_default_str();
  ev_cmd->add_option("--dt", ev_params.dt, "simulation step")->capture_default_str();

  // voxelize
  std::string vox_in, vox_out = "voxels.nrxt", vox_dtype = "f32";
  int vox_segments = 4, vox_bins = 5;
  auto* vox_cmd = app.add_subcommand("voxelize", "convert an NREV stream to an [M, B, H, W] voxel tensor");
  vox_cmd->add_option("--events", vox_in, "NREV input")->required();
  vox_cmd->add_option("--out", vox_out, "NRXT output")->capture_default_str();
  vox_cmd->add_option("--segments", vox_segments, "segments M")->capture_default_str();
  vox_cmd->add_option("--bins", vox_bins, "bins B")->capture_default_str();
  vox_cmd->add_option("--dtype", vox_dtype, "f32 or f64")->capture_default_str();

  // train
  std::string train_config_path, train_resume, train_dump_config;
  std::optional<int> t_iterations, t_batch, t_scene_count, t_ckpt_every;
  std::optional<double> t_lr, t_feature_weight;
  std::optional<std::uint64_t> t_seed, t_scene_seed;
  std::optional<std::string> t_ckpt, t_csv, t_tasks_weights;
  std::optional<bool> t_events;
  auto* train_cmd = app.add_subcommand("train", "train a model; flags override config keys");
  train_cmd->add_option("--config", train_config_path, "JSON config file");
  train_cmd->add_option("--iterations", t_iterations);
  train_cmd->add_option("--batch-size", t_batch);
  train_cmd->add_option("--learning-rate", t_lr);
  train_cmd->add_option("--feature-weight", t_feature_weight);
  train_cmd->add_option("--seed", t_seed);
  train_cmd->add_option("--scene-seed", t_scene_seed);
  train_cmd->add_option("--scene-count", t_scene_count);
  train_cmd->add_option("--checkpoint", t_ckpt, "checkpoint path");
  train_cmd->add_option("--checkpoint-every", t_ckpt_every);
  train_cmd->add_option("--loss-csv", t_csv);
  train_cmd->add_option("--task-weights", t_tasks_weights, "five comma-separated weights");
  train_cmd->add_option("--use-events", t_events);
  train_cmd->add_option("--resume", train_resume, "continue from this checkpoint");
  train_cmd->add_option("--print-config", train_dump_config, "write the effective config here and exit");

  // eval
  std::string eval_ckpt, eval_config_path, eval_tasks = "all", eval_csv_path;
  int eval_samples = 8;
  std::uint64_t eval_seed = 1000;
  std::vector<std::uint64_t> eval_scenes;
  auto* eval_cmd = app.add_subcommand("eval", "per-task PSNR / SSIM on held-out seeded scenes");
  eval_cmd->add_option("--checkpoint", eval_ckpt)->required();
  eval_cmd->add_option("--config", eval_config_path, "training config the checkpoint must match");
  eval_cmd->add_option("--tasks", eval_tasks)->capture_default_str();
  eval_cmd->add_option("--samples", eval_samples)->capture_default_str();
  eval_cmd->add_option("--seed", eval_seed)->capture_default_str();
  eval_cmd->add_option("--scenes", eval_scenes, "evaluate on these scene seeds instead");
  eval_cmd->add_option("--csv", eval_csv_path, "CSV output");

  // infer
  std::string inf_ckpt, inf_bundle, inf_shutter, inf_out = "out.pgm";
  int inf_bits = 8;
  auto* inf_cmd = app.add_subcommand("infer", "re-expose a bundle under a new shutter");
  inf_cmd->add_option("--checkpoint", inf_ckpt)->required();
  inf_cmd->add_option("--bundle", inf_bundle)->required();
  inf_cmd->add_option("--shutter", inf_shutter, "gs:ta,tb | rs:t1,alpha,delta | instant:t (default: bundle target)");
  inf_cmd->add_option("--out", inf_out)->capture_default_str();
  inf_cmd->add_option("--bits", inf_bits, "8 or 16")->capture_default_str();

  // grad-check
  int gc_size = 8;
  double gc_tol = 1e-3;
  std::uint64_t gc_seed = 5;
  auto* gc_cmd = app.add_subcommand("grad-check", "finite-difference check of the smallest float64 model");
  gc_cmd->add_option("--size", gc_size)->capture_default_str();
  gc_cmd->add_option("--seed", gc_seed)->capture_default_str();
  gc_cmd->add_option("--tolerance", gc_tol)->capture_default_str();

  // dump-encoding
  std::string de_shutter, de_out = "encoding.nrxt";
  int de_w = 32, de_h = 32, de_level = 0, de_freq = 6;
  auto* de_cmd = app.add_subcommand("dump-encoding", "write the [H_l, W_l, 4F] shutter encoding map");
  de_cmd->add_option("--shutter", de_shutter)->required();
  de_cmd->add_option("--width", de_w)->capture_default_str();
  de_cmd->add_option("--height", de_h)->capture_default_str();
  de_cmd->add_option("--level", de_level)->capture_default_str();
  de_cmd->add_option("--frequencies", de_freq)->capture_default_str();
  de_cmd->add_option("--out", de_out)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*gen_cmd) {
      SamplerOptions opts;
      opts.width = gen.width;
      opts.height = gen.height;
      opts.channels = gen.channels;
      opts.task.exposure_samples = gen_samples;
      const auto tasks = parse_tasks(gen_tasks);
      std::vector<std::uint64_t> seeds;
      for (int i = 0; i < gen_count; ++i) seeds.push_back(gen.seed + static_cast<std::uint64_t>(i));
      MultiTaskSampler sampler(seeds, TaskMix{}, opts);
      for (auto seed : seeds) {
        for (auto task : tasks) {
          auto rng = keyed_rng(seed, 1 + static_cast<std::uint64_t>(task), 0);
          const auto dir = fs::path(gen_out) / ("scene" + std::to_string(seed) + "_" + sim::to_string(task));
          write_bundle(dir.string(), sampler.sample(task, seed, rng));
          std::cout << dir.string() << "\n";
        }
      }
    } else if (*ev_cmd) {
      const auto scene = sim::random_scene(ev.seed, ev.width, ev.height, ev.channels);
      const auto stream = sim::simulate_events(scene, ev_params);
      sim::save_events(ev_out, stream);
      if (!ev_csv.empty()) std::ofstream(ev_csv) << sim::events_to_csv(stream);
      std::cout << stream.events.size() << " events -> " << ev_out << "\n";
    } else if (*vox_cmd) {
      const auto stream = sim::load_events(vox_in);
      const auto grids = sim::voxel_sequence(stream, vox_segments, vox_bins, parse_dtype(vox_dtype)).stacked();
      save_tensor(vox_out, grids);
      std::cout << to_string(grids.shape()) << " -> " << vox_out << "\n";
    } else if (*train_cmd) {
      TrainConfig cfg = train_config_path.empty() ? TrainConfig{} : load_train_config(train_config_path);
      if (t_iterations) cfg.iterations = *t_iterations;
      if (t_batch) cfg.batch_size = *t_batch;
      if (t_lr) cfg.optimizer.learning_rate = *t_lr;
      if (t_feature_weight) cfg.feature_weight = *t_feature_weight;
      if (t_seed) cfg.seed = *t_seed;
      if (t_scene_seed) cfg.scene_seed = *t_scene_seed;
      if (t_scene_count) cfg.scene_count = *t_scene_count;
      if (t_ckpt) cfg.checkpoint_path = *t_ckpt;
      if (t_ckpt_every) cfg.checkpoint_every = *t_ckpt_every;
      if (t_csv) cfg.loss_csv = *t_csv;
      if (t_events) cfg.model.use_events = *t_events;
      if (t_tasks_weights) {
        std::stringstream ss(*t_tasks_weights);
        std::string item;
        for (std::size_t i = 0; i < cfg.mix.weights.size(); ++i) {
          if (!std::getline(ss, item, ',')) throw ConfigError("--task-weights needs five values");
          cfg.mix.weights[i] = std::stod(item);
        }
      }
      cfg.validate();
      if (!train_dump_config.empty()) {
        std::ofstream(train_dump_config) << train_config_to_json(cfg) << "\n";
        return 0;
      }
      Trainer trainer(cfg);
      if (!train_resume.empty()) trainer.load_state(load_checkpoint(train_resume));
      const int every = std::max(1, cfg.iterations / 20);
      trainer.run([&](const StepStats& s) {
        if (s.iteration % every == 0 || s.iteration == cfg.iterations) {
          std::printf("iter %6d  loss %.6f\n", s.iteration, s.loss);
          std::fflush(stdout);
        }
      });
    } else if (*eval_cmd) {
      std::optional<ModelConfig> expected;
      EvalOptions eo;
      if (!eval_config_path.empty()) {
        const auto cfg = load_train_config(eval_config_path);
        expected = cfg.model;
        eo.data = cfg.data;
      }
      const auto model = load_model(eval_ckpt, expected);
      eo.data.channels = model.config().image_channels;
      eo.tasks = parse_tasks(eval_tasks);
      eo.samples = eval_samples;
      eo.seed = eval_seed;
      eo.scene_seeds = eval_scenes;
      const auto rows = evaluate(model, eo);
      std::cout << eval_table(rows);
      if (!eval_csv_path.empty()) std::ofstream(eval_csv_path) << eval_csv(rows);
    } else if (*inf_cmd) {
      const auto model = load_model(inf_ckpt);
      auto sample = read_bundle(inf_bundle);
      if (!inf_shutter.empty()) sample.target_shutter = sim::parse_shutter(inf_shutter);
      const auto frame = predict(model, sample);
      sim::write_pnm(inf_out, frame, inf_bits);
      std::cout << frame.width << "x" << frame.height << " -> " << inf_out << "\n";
    } else if (*gc_cmd) {
      const auto report = check_model_gradients(tiny_config(), gc_size, gc_seed);
      std::printf("components %zu  max rel error %.3e (%s[%zu])  key-bias gradient %.1e\n", report.components,
                  report.max_rel_error, report.worst_param.c_str(), report.worst_index, report.key_bias_gradient);
      if (!(report.max_rel_error < gc_tol)) return kExitNumeric;
    } else if (*de_cmd) {
      const auto shutter = sim::parse_shutter(de_shutter);
      const auto map = shutter_encoding_map(shutter, de_h, de_w, de_level, de_freq, DType::f64);
      save_tensor(de_out, map);
      std::cout << to_string(map.shape()) << " -> " << de_out << "\n";
    }
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  }
  return 0;
}
