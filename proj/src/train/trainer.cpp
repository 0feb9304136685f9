#include "nire/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "json.hpp"

#include "nire/error.hpp"
#include "nire/grad_check.hpp"
#include "nire/metrics.hpp"
#include "nire/ops.hpp"

namespace nire {

using nlohmann::json;

void TrainConfig::validate() const {
  model.validate();
  auto fail = [](const std::string& m) { throw ConfigError("train config: " + m); };
  if (iterations < 0) fail("iterations must be >= 0");
  if (batch_size < 1) fail("batch_size must be >= 1");
  if (scene_count < 1) fail("scene_count must be >= 1");
  if (!(feature_weight >= 0.0)) fail("feature_weight must be >= 0");
  if (!(charbonnier_eps > 0.0)) fail("charbonnier_eps must be positive");
  if (checkpoint_every < 0) fail("checkpoint_every must be >= 0");
  if (data.channels != model.image_channels) fail("data channels differ from model image_channels");
  if (data.task.exposure_samples < 1) fail("exposure_samples must be >= 1");
  mix.validate();
  try {
    model.check_image_size(data.height, data.width);
  } catch (const ShapeError& e) {
    fail(e.what());
  }
}

std::vector<std::uint64_t> TrainConfig::scene_pool() const {
  std::vector<std::uint64_t> seeds;
  for (int i = 0; i < scene_count; ++i) seeds.push_back(scene_seed + static_cast<std::uint64_t>(i));
  return seeds;
}

// ---------------------------------------------------------------------------
// JSON config

namespace {

class Reader {
 public:
  Reader(const json& obj, std::string where) : obj_(obj), where_(std::move(where)) {
    if (!obj_.is_object()) throw ConfigError(where_ + " must be a JSON object");
  }
  ~Reader() noexcept(false) {
    if (std::uncaught_exceptions()) return;
    for (const auto& [key, _] : obj_.items()) {
      if (!seen_.count(key)) throw ConfigError("unknown key '" + key + "' in " + where_);
    }
  }

  template <class T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    if (!obj_.contains(key)) return;
    try {
      out = obj_.at(key).get<T>();
    } catch (const json::exception&) {
      throw ConfigError("bad value for '" + std::string(key) + "' in " + where_);
    }
  }

  const json* child(const char* key) {
    seen_.insert(key);
    return obj_.contains(key) ? &obj_.at(key) : nullptr;
  }

 private:
  const json& obj_;
  std::string where_;
  std::set<std::string> seen_;
};

void read_model(const json& j, ModelConfig& m) {
  Reader r(j, "model");
  r.get("levels", m.levels);
  r.get("channels", m.channels);
  r.get("segments", m.segments);
  r.get("bins", m.bins);
  r.get("window", m.window);
  r.get("frequencies", m.frequencies);
  r.get("attn_dim", m.attn_dim);
  r.get("heads", m.heads);
  r.get("self_layers", m.self_layers);
  r.get("ffn_mult", m.ffn_mult);
  r.get("image_channels", m.image_channels);
  r.get("use_events", m.use_events);
  r.get("use_time_encodings", m.use_time_encodings);
  r.get("use_feature_enhancement", m.use_feature_enhancement);
  r.get("seed", m.seed);
  std::string dtype = m.dtype == DType::f32 ? "f32" : "f64";
  r.get("dtype", dtype);
  if (dtype == "f32") {
    m.dtype = DType::f32;
  } else if (dtype == "f64") {
    m.dtype = DType::f64;
  } else {
    throw ConfigError("model dtype must be f32 or f64");
  }
}

json write_model(const ModelConfig& m) {
  return {{"levels", m.levels},
          {"channels", m.channels},
          {"segments", m.segments},
          {"bins", m.bins},
          {"window", m.window},
          {"frequencies", m.frequencies},
          {"attn_dim", m.attn_dim},
          {"heads", m.heads},
          {"self_layers", m.self_layers},
          {"ffn_mult", m.ffn_mult},
          {"image_channels", m.image_channels},
          {"use_events", m.use_events},
          {"use_time_encodings", m.use_time_encodings},
          {"use_feature_enhancement", m.use_feature_enhancement},
          {"seed", m.seed},
          {"dtype", m.dtype == DType::f32 ? "f32" : "f64"}};
}

}  // namespace

TrainConfig parse_train_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  TrainConfig c;
  {
    Reader r(j, "config");
    r.get("iterations", c.iterations);
    r.get("batch_size", c.batch_size);
    r.get("learning_rate", c.optimizer.learning_rate);
    r.get("beta1", c.optimizer.beta1);
    r.get("beta2", c.optimizer.beta2);
    r.get("adam_epsilon", c.optimizer.epsilon);
    r.get("weight_decay", c.optimizer.weight_decay);
    r.get("seed", c.seed);
    r.get("feature_weight", c.feature_weight);
    r.get("charbonnier_eps", c.charbonnier_eps);
    r.get("scene_seed", c.scene_seed);
    r.get("scene_count", c.scene_count);
    r.get("width", c.data.width);
    r.get("height", c.data.height);
    r.get("checkpoint_every", c.checkpoint_every);
    r.get("checkpoint_path", c.checkpoint_path);
    r.get("loss_csv", c.loss_csv);
    r.get("dump_dir", c.dump_dir);
    if (const auto* w = r.child("task_weights")) {
      Reader tw(*w, "task_weights");
      for (auto task : sim::kAllTasks) tw.get(sim::to_string(task), c.mix.weights[static_cast<std::size_t>(task)]);
    }
    if (const auto* s = r.child("scene")) {
      Reader sr(*s, "scene");
      sr.get("min_sprites", c.data.scene.min_sprites);
      sr.get("max_sprites", c.data.scene.max_sprites);
      sr.get("min_size", c.data.scene.min_size);
      sr.get("max_size", c.data.scene.max_size);
      sr.get("max_speed", c.data.scene.max_speed);
      sr.get("background_amplitude", c.data.scene.background_amplitude);
    }
    if (const auto* t = r.child("task")) {
      Reader tr(*t, "task");
      tr.get("exposure_samples", c.data.task.exposure_samples);
      tr.get("vfi_steps", c.data.task.vfi_steps);
      tr.get("vfi_index", c.data.task.vfi_index);
      tr.get("unroll_duration_rows", c.data.task.unroll_duration_rows);
      tr.get("joint_duration", c.data.task.joint_duration);
      tr.get("contrast", c.data.task.events.contrast);
      tr.get("log_floor", c.data.task.events.log_floor);
      tr.get("event_dt", c.data.task.events.dt);
    }
    if (const auto* m = r.child("model")) read_model(*m, c.model);
  }
  c.data.channels = c.model.image_channels;
  c.validate();
  return c;
}

TrainConfig load_train_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_train_config(ss.str());
}

std::string train_config_to_json(const TrainConfig& c) {
  json weights = json::object();
  for (auto task : sim::kAllTasks) weights[sim::to_string(task)] = c.mix.weights[static_cast<std::size_t>(task)];
  const auto& s = c.data.scene;
  const auto& t = c.data.task;
  json j = {{"iterations", c.iterations},
            {"batch_size", c.batch_size},
            {"learning_rate", c.optimizer.learning_rate},
            {"beta1", c.optimizer.beta1},
            {"beta2", c.optimizer.beta2},
            {"adam_epsilon", c.optimizer.epsilon},
            {"weight_decay", c.optimizer.weight_decay},
            {"seed", c.seed},
            {"feature_weight", c.feature_weight},
            {"charbonnier_eps", c.charbonnier_eps},
            {"scene_seed", c.scene_seed},
            {"scene_count", c.scene_count},
            {"width", c.data.width},
            {"height", c.data.height},
            {"checkpoint_every", c.checkpoint_every},
            {"checkpoint_path", c.checkpoint_path},
            {"loss_csv", c.loss_csv},
            {"dump_dir", c.dump_dir},
            {"task_weights", weights},
            {"scene",
             {{"min_sprites", s.min_sprites},
              {"max_sprites", s.max_sprites},
              {"min_size", s.min_size},
              {"max_size", s.max_size},
              {"max_speed", s.max_speed},
              {"background_amplitude", s.background_amplitude}}},
            {"task",
             {{"exposure_samples", t.exposure_samples},
              {"vfi_steps", t.vfi_steps},
              {"vfi_index", t.vfi_index},
              {"unroll_duration_rows", t.unroll_duration_rows},
              {"joint_duration", t.joint_duration},
              {"contrast", t.events.contrast},
              {"log_floor", t.events.log_floor},
              {"event_dt", t.events.dt}}},
            {"model", write_model(c.model)}};
  return j.dump(2);
}

// ---------------------------------------------------------------------------
// Training

namespace {

void dump_batch(const std::string& dir, int iteration, const std::vector<sim::TaskSample>& batch) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  std::ofstream info(fs::path(dir) / "batch.txt");
  info << "iteration " << iteration << "\n";
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const auto& s = batch[b];
    info << "sample " << b << " task " << sim::to_string(s.task) << " scene " << s.scene_seed << " target "
         << sim::format_shutter(s.target_shutter) << "\n";
    for (std::size_t i = 0; i < s.inputs.size(); ++i) {
      info << "  input " << i << " " << sim::format_shutter(s.inputs[i].shutter) << "\n";
      sim::write_pnm((fs::path(dir) / ("sample" + std::to_string(b) + "_input" + std::to_string(i) + ".pgm")).string(),
                     s.inputs[i], 16);
    }
    sim::write_pnm((fs::path(dir) / ("sample" + std::to_string(b) + "_target.pgm")).string(), s.target, 16);
    sim::save_events(fs::path(dir) / ("sample" + std::to_string(b) + ".nrev"), s.events);
  }
}

}  // namespace

Trainer::Trainer(TrainConfig config)
    : config_((config.validate(), std::move(config))),
      model_(config_.model),
      optimizer_(model_.params(), config_.optimizer),
      sampler_(config_.scene_pool(), config_.mix, config_.data),
      features_(config_.model.image_channels, config_.model.dtype) {}

StepStats Trainer::step() {
  StepStats stats;
  stats.iteration = iteration_ + 1;
  auto rng = keyed_rng(config_.seed, 0, static_cast<std::uint64_t>(iteration_));
  std::vector<sim::TaskSample> batch;
  for (int b = 0; b < config_.batch_size; ++b) batch.push_back(sampler_.sample(rng));

  for (auto& [_, p] : model_.params().entries()) Tensor(p).zero_grad();
  const double scale = 1.0 / config_.batch_size;
  bool finite = true;
  for (const auto& s : batch) {
    stats.tasks.push_back(s.task);
    const auto input = prepare_input(s, config_.model);
    const auto pred = model_.forward(input, s.target_shutter);
    const auto target = reshape(sim::frame_to_tensor(s.target, config_.model.dtype), pred.shape());
    const auto terms = reconstruction_loss(pred, target, features_, config_.feature_weight, config_.charbonnier_eps);
    const double value = terms.total.item();
    if (!std::isfinite(value)) {
      finite = false;
      break;
    }
    stats.loss += value * scale;
    stats.charbonnier += terms.charbonnier * scale;
    stats.feature += terms.feature * scale;
    mul_scalar(terms.total, scale).backward();
  }
  if (finite) {
    for (const auto& [_, p] : model_.params().entries()) {
      for (double g : p.grad().to_vector()) {
        if (!std::isfinite(g)) {
          finite = false;
          break;
        }
      }
      if (!finite) break;
    }
  }
  if (!finite) {
    std::string msg = "non-finite loss at iteration " + std::to_string(stats.iteration);
    if (!config_.dump_dir.empty()) {
      dump_batch(config_.dump_dir, stats.iteration, batch);
      msg += "; batch written to " + config_.dump_dir;
    }
    throw NumericError(msg);
  }
  optimizer_.step();
  ++iteration_;
  return stats;
}

std::string loss_csv_header() { return "iteration,loss,charbonnier,feature,tasks\n"; }

std::string loss_csv_row(const StepStats& s) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "%d,%.9g,%.9g,%.9g,", s.iteration, s.loss, s.charbonnier, s.feature);
  std::string row = buf;
  for (std::size_t i = 0; i < s.tasks.size(); ++i) {
    if (i) row += ';';
    row += sim::to_string(s.tasks[i]);
  }
  return row + "\n";
}

void Trainer::run(const std::function<void(const StepStats&)>& on_step) {
  std::ofstream csv;
  if (!config_.loss_csv.empty()) {
    const bool fresh = iteration_ == 0 || !std::filesystem::exists(config_.loss_csv);
    csv.open(config_.loss_csv, fresh ? std::ios::trunc : std::ios::app);
    if (!csv) throw ConfigError("cannot write loss csv " + config_.loss_csv);
    if (fresh) csv << loss_csv_header();
  }
  while (iteration_ < config_.iterations) {
    const auto stats = step();
    if (csv.is_open()) csv << loss_csv_row(stats) << std::flush;
    if (on_step) on_step(stats);
    if (!config_.checkpoint_path.empty() && config_.checkpoint_every > 0 && iteration_ % config_.checkpoint_every == 0) {
      save(config_.checkpoint_path);
    }
  }
  if (!config_.checkpoint_path.empty()) save(config_.checkpoint_path);
}

NamedTensors Trainer::state() const {
  auto out = model_.state();
  for (auto& entry : optimizer_.state()) out.push_back(std::move(entry));
  out.emplace_back("optim.iteration", Tensor::scalar(iteration_, DType::f64));
  return out;
}

void Trainer::load_state(const NamedTensors& state) {
  model_.load_state(state);
  optimizer_.load_state(state);
  for (const auto& [name, t] : state) {
    if (name == "optim.iteration") {
      iteration_ = static_cast<int>(t.item());
      return;
    }
  }
  throw ContractError("checkpoint has no optim.iteration entry");
}

void Trainer::save(const std::string& path) const { save_checkpoint(path, state()); }

NireModel load_model(const std::string& path, const std::optional<ModelConfig>& expected) {
  auto state = load_checkpoint(path);
  auto model = NireModel::from_state(state);
  if (expected && !(model.config() == *expected)) {
    throw ConfigError("checkpoint " + path + " was trained with a different model configuration");
  }
  return model;
}

// ---------------------------------------------------------------------------
// Evaluation

sim::Frame predict(const NireModel& model, const sim::TaskSample& sample) {
  NoGradGuard guard;
  const auto input = prepare_input(sample, model.config());
  return sim::tensor_to_frame(model.forward(input, sample.target_shutter), sample.target_shutter);
}

std::vector<EvalRow> evaluate_predictor(const Predictor& predict_fn, const EvalOptions& options) {
  if (options.samples < 1) throw ConfigError("evaluation needs at least one sample");
  std::vector<std::uint64_t> pool = options.scene_seeds;
  if (pool.empty()) pool.push_back(0);
  MultiTaskSampler sampler(pool, TaskMix{}, options.data);
  std::vector<EvalRow> rows;
  for (auto task : options.tasks) {
    EvalRow row;
    row.task = task;
    for (int i = 0; i < options.samples; ++i) {
      auto rng = keyed_rng(options.seed, 1 + static_cast<std::uint64_t>(task), static_cast<std::uint64_t>(i));
      const std::uint64_t scene =
          options.scene_seeds.empty() ? rng() : options.scene_seeds[static_cast<std::size_t>(i) % pool.size()];
      const auto sample = sampler.sample(task, scene, rng);
      const auto scores = score_images(predict_fn(sample), sample.target);
      row.psnr += scores.psnr;
      row.ssim += scores.ssim;
      ++row.samples;
    }
    row.psnr /= row.samples;
    row.ssim /= row.samples;
    rows.push_back(row);
  }
  return rows;
}

std::vector<EvalRow> evaluate(const NireModel& model, const EvalOptions& options) {
  if (options.data.channels != model.config().image_channels) throw ConfigError("evaluation channels differ from model");
  model.config().check_image_size(options.data.height, options.data.width);
  return evaluate_predictor([&](const sim::TaskSample& s) { return predict(model, s); }, options);
}

std::string eval_csv(const std::vector<EvalRow>& rows) {
  std::string out = "task,samples,psnr,ssim\n";
  char buf[128];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%s,%d,%.6f,%.6f\n", sim::to_string(r.task), r.samples, r.psnr, r.ssim);
    out += buf;
  }
  return out;
}

std::string eval_table(const std::vector<EvalRow>& rows) {
  std::string out = "task          samples  PSNR (dB)    SSIM\n";
  char buf[128];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%-12s %8d %10.2f %7.4f\n", sim::to_string(r.task), r.samples, r.psnr, r.ssim);
    out += buf;
  }
  return out;
}

ModelGradReport check_model_gradients(const ModelConfig& config, int size, std::uint64_t seed, double h) {
  if (config.dtype != DType::f64) throw ConfigError("gradient checks need a float64 model");
  NireModel model(config);
  std::mt19937_64 jitter(seed + 16);
  std::normal_distribution<double> noise(0.0, 0.05);
  for (const auto& [_, t] : model.params().entries()) {
    for (auto& v : Tensor(t).mutable_data<double>()) v += noise(jitter);
  }
  sim::SceneOptions so;
  so.min_size = size / 4.0;
  so.max_size = size / 2.0;
  so.max_speed = 0.3 * size;
  const auto scene = sim::random_scene(seed, size, size, config.image_channels, so);
  sim::TaskConfig tc;
  tc.exposure_samples = 16;
  tc.unroll_duration_rows = size / 4.0;
  std::mt19937_64 rng(seed);
  const auto sample = sim::make_task_sample(scene, sim::TaskKind::deblur_vfi, rng, tc);
  const auto input = prepare_input(sample, config);
  std::mt19937_64 proj_rng(seed + 8);
  const auto probe = Tensor::randn({1, config.image_channels, size, size}, proj_rng, 1.0, DType::f64);
  auto loss = [&]() { return sum(mul(model.forward(input, sample.target_shutter), probe)); };

  std::vector<Tensor> checked, key_biases;
  std::vector<std::string> names;
  for (const auto& [name, t] : model.params().entries()) {
    if (name.ends_with(".key.bias")) {
      key_biases.push_back(t);
    } else {
      checked.push_back(t);
      names.push_back(name);
    }
  }
  const auto r = grad_check_params(loss, checked, h);
  ModelGradReport out;
  out.max_rel_error = r.max_rel_error;
  out.worst_param = names.empty() ? "" : names[r.worst_param];
  out.worst_index = r.worst_index;
  out.components = r.components;
  for (auto t : checked) t.zero_grad();
  for (auto t : key_biases) t.zero_grad();
  loss().backward();
  for (const auto& t : key_biases) {
    out.components += static_cast<std::size_t>(t.numel());
    for (double g : t.grad().to_vector()) out.key_bias_gradient = std::max(out.key_bias_gradient, std::abs(g));
  }
  return out;
}

}  // namespace nire
