#include <pybind11/functional.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstring>
#include <random>

#include "nire/error.hpp"
#include "nire/events.hpp"
#include "nire/exposure.hpp"
#include "nire/frame.hpp"
#include "nire/metrics.hpp"
#include "nire/model.hpp"
#include "nire/scene.hpp"
#include "nire/serialize.hpp"
#include "nire/shutter.hpp"
#include "nire/task.hpp"
#include "nire/time_codec.hpp"
#include "nire/trainer.hpp"
#include "nire/voxel.hpp"

namespace py = pybind11;
using namespace nire;
using sim::EventStream;
using sim::Frame;
using sim::ShutterSpec;

namespace {

using F64Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

F64Array tensor_to_array(const Tensor& t) {
  std::vector<py::ssize_t> shape(t.shape().begin(), t.shape().end());
  F64Array out(shape);
  const auto values = t.to_vector();
  std::memcpy(out.mutable_data(), values.data(), values.size() * sizeof(double));
  return out;
}

Tensor array_to_tensor(const F64Array& a, DType dtype) {
  Shape shape(a.shape(), a.shape() + a.ndim());
  return Tensor::from_values(shape, std::span<const double>(a.data(), static_cast<std::size_t>(a.size())), dtype);
}

F64Array frame_to_array(const Frame& f) {
  F64Array out({f.channels, f.height, f.width});
  std::memcpy(out.mutable_data(), f.pixels.data(), f.pixels.size() * sizeof(double));
  return out;
}

// Accepts [H, W] or [C, H, W].
Frame array_to_frame(const F64Array& a, ShutterSpec shutter = {}) {
  if (a.ndim() != 2 && a.ndim() != 3) throw ShapeError("image must be [H, W] or [C, H, W]");
  const int c = a.ndim() == 3 ? static_cast<int>(a.shape(0)) : 1;
  const int h = static_cast<int>(a.shape(a.ndim() - 2));
  const int w = static_cast<int>(a.shape(a.ndim() - 1));
  Frame f(w, h, c, std::move(shutter));
  std::memcpy(f.pixels.data(), a.data(), f.pixels.size() * sizeof(double));
  return f;
}

DType parse_dtype(const std::string& name) {
  if (name == "f32" || name == "float32") return DType::f32;
  if (name == "f64" || name == "float64") return DType::f64;
  throw ConfigError("unknown dtype '" + name + "'");
}

py::dict events_to_dict(const EventStream& s) {
  const auto n = s.size();
  std::vector<double> t(n);
  std::vector<std::uint16_t> x(n), y(n);
  std::vector<std::int8_t> p(n);
  for (std::size_t i = 0; i < n; ++i) {
    t[i] = s.events[i].t;
    x[i] = s.events[i].x;
    y[i] = s.events[i].y;
    p[i] = s.events[i].p;
  }
  const auto len = static_cast<py::ssize_t>(n);
  py::dict d;
  d["t"] = py::array_t<double>(len, t.data());
  d["x"] = py::array_t<std::uint16_t>(len, x.data());
  d["y"] = py::array_t<std::uint16_t>(len, y.data());
  d["p"] = py::array_t<std::int8_t>(len, p.data());
  return d;
}

}  // namespace

PYBIND11_MODULE(_nire, m) {
  m.doc() = "Event-guided image re-exposure";

  auto base = py::register_exception<Error>(m, "NireError", PyExc_RuntimeError);
  py::register_exception<ShapeError>(m, "ShapeError", base.ptr());
  py::register_exception<BroadcastError>(m, "BroadcastError", base.ptr());
  py::register_exception<DomainError>(m, "DomainError", base.ptr());
  py::register_exception<IndexError>(m, "IndexError", base.ptr());
  py::register_exception<ContractError>(m, "ContractError", base.ptr());
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
  py::register_exception<NumericError>(m, "NumericError", base.ptr());
  py::register_exception<FormatError>(m, "FormatError", base.ptr());

  // Shutters
  py::class_<ShutterSpec>(m, "Shutter")
      .def_static("global_", &ShutterSpec::global, py::arg("t_a"), py::arg("t_b"))
      .def_static("instant", &ShutterSpec::instant, py::arg("t"))
      .def_static("rolling", &ShutterSpec::rolling, py::arg("start"), py::arg("readout_delay"), py::arg("duration"))
      .def_static(
          "per_pixel",
          [](const F64Array& t_a, const F64Array& t_b) {
            if (t_a.ndim() != 2 || t_b.ndim() != 2 || t_a.shape(0) != t_b.shape(0) || t_a.shape(1) != t_b.shape(1))
              throw ShapeError("per-pixel maps must be matching [H, W] arrays");
            sim::PerPixelShutter p;
            p.height = static_cast<int>(t_a.shape(0));
            p.width = static_cast<int>(t_a.shape(1));
            p.t_a.assign(t_a.data(), t_a.data() + t_a.size());
            p.t_b.assign(t_b.data(), t_b.data() + t_b.size());
            return ShutterSpec(std::move(p));
          },
          py::arg("t_a"), py::arg("t_b"))
      .def_static("parse", &sim::parse_shutter, py::arg("text"))
      .def_property_readonly("is_global", &ShutterSpec::is_global)
      .def_property_readonly("is_rolling", &ShutterSpec::is_rolling)
      .def(
          "window",
          [](const ShutterSpec& s, int x, int y) {
            const auto w = s.window(x, y);
            return py::make_tuple(w.t_a, w.t_b);
          },
          py::arg("x"), py::arg("y"))
      .def("state", [](const ShutterSpec& s, int x, int y, double t) { return sim::shutter_state(s, x, y, t); })
      .def("validate", &ShutterSpec::validate, py::arg("width"), py::arg("height"))
      .def("__eq__", [](const ShutterSpec& a, const ShutterSpec& b) { return a == b; })
      .def("__str__", [](const ShutterSpec& s) { return sim::format_shutter(s); })
      .def("__repr__", [](const ShutterSpec& s) {
        if (std::holds_alternative<sim::PerPixelShutter>(s.variant())) return std::string("Shutter(per-pixel)");
        return "Shutter('" + sim::format_shutter(s) + "')";
      });
  m.def("parse_shutter", &sim::parse_shutter, py::arg("text"));

  // Scenes and exposure
  py::class_<sim::SceneOptions>(m, "SceneOptions")
      .def(py::init<>())
      .def_readwrite("min_sprites", &sim::SceneOptions::min_sprites)
      .def_readwrite("max_sprites", &sim::SceneOptions::max_sprites)
      .def_readwrite("min_size", &sim::SceneOptions::min_size)
      .def_readwrite("max_size", &sim::SceneOptions::max_size)
      .def_readwrite("max_speed", &sim::SceneOptions::max_speed)
      .def_readwrite("background_amplitude", &sim::SceneOptions::background_amplitude);

  py::class_<sim::SceneModel>(m, "Scene")
      .def_readonly("width", &sim::SceneModel::width)
      .def_readonly("height", &sim::SceneModel::height)
      .def_readonly("channels", &sim::SceneModel::channels)
      .def_property_readonly("sprite_count", [](const sim::SceneModel& s) { return s.sprites.size(); })
      .def("value", &sim::SceneModel::value, py::arg("x"), py::arg("y"), py::arg("t"), py::arg("channel") = 0)
      .def("render", [](const sim::SceneModel& s, double t) { return frame_to_array(sim::render_instant(s, t)); },
           py::arg("t"))
      .def(
          "expose",
          [](const sim::SceneModel& s, const ShutterSpec& shutter, int n) {
            return frame_to_array(sim::expose(s, shutter, n));
          },
          py::arg("shutter"), py::arg("samples") = 64);

  m.def("random_scene", &sim::random_scene, py::arg("seed"), py::arg("width") = 32, py::arg("height") = 32,
        py::arg("channels") = 1, py::arg("options") = sim::SceneOptions{});
  m.def("moving_sprite_scene", &sim::moving_sprite_scene, py::arg("width") = 96, py::arg("height") = 16,
        py::arg("speed") = 256.0);

  // Events
  py::class_<EventStream>(m, "EventStream")
      .def_readonly("width", &EventStream::width)
      .def_readonly("height", &EventStream::height)
      .def_readonly("contrast", &EventStream::contrast)
      .def("__len__", &EventStream::size)
      .def("is_valid", &EventStream::is_valid)
      .def("arrays", &events_to_dict, "Columns t, x, y, p as numpy arrays.")
      .def("signed_counts",
           [](const EventStream& s) {
             const auto counts = sim::signed_event_counts(s);
             py::array_t<int> out({s.height, s.width});
             std::memcpy(out.mutable_data(), counts.data(), counts.size() * sizeof(int));
             return out;
           })
      .def("to_csv", &sim::events_to_csv)
      .def("save", [](const EventStream& s, const std::string& path) { sim::save_events(path, s); })
      .def_static("load", [](const std::string& path) { return sim::load_events(path); })
      .def("__eq__", [](const EventStream& a, const EventStream& b) { return a == b; });

  m.def(
      "simulate_events",
      [](const sim::SceneModel& scene, double contrast, double log_floor, double dt) {
        return sim::simulate_events(scene, sim::EventParams{contrast, log_floor, dt});
      },
      py::arg("scene"), py::arg("contrast") = 0.15, py::arg("log_floor") = 1e-3, py::arg("dt") = 1.0 / 4096.0);

  m.def(
      "voxelize",
      [](const EventStream& s, int bins, double t_start, double t_end) {
        return tensor_to_array(sim::voxelize(s, bins, s.height, s.width, t_start, t_end));
      },
      py::arg("events"), py::arg("bins"), py::arg("t_start") = 0.0, py::arg("t_end") = 1.0);
  m.def(
      "voxel_sequence",
      [](const EventStream& s, int segments, int bins) {
        return tensor_to_array(sim::voxel_sequence(s, segments, bins).stacked());
      },
      py::arg("events"), py::arg("segments"), py::arg("bins"), "Stacked [M, B, H, W] voxel grids.");

  // Time encodings
  m.def("gamma", [](double t, int f) { return nire::gamma(t, f); }, py::arg("t"), py::arg("frequencies"));
  m.def("range_encoding", &range_encoding, py::arg("t_a"), py::arg("t_b"), py::arg("frequencies"));
  m.def(
      "shutter_encoding_map",
      [](const ShutterSpec& s, int height, int width, int level, int frequencies) {
        return tensor_to_array(shutter_encoding_map(s, height, width, level, frequencies));
      },
      py::arg("shutter"), py::arg("height"), py::arg("width"), py::arg("level") = 0, py::arg("frequencies") = 6);

  // Tasks
  py::enum_<sim::TaskKind>(m, "Task")
      .value("deblur", sim::TaskKind::deblur)
      .value("vfi", sim::TaskKind::vfi)
      .value("unroll", sim::TaskKind::unroll)
      .value("deblur_vfi", sim::TaskKind::deblur_vfi)
      .value("reconstruct", sim::TaskKind::reconstruct);

  py::class_<sim::TaskConfig>(m, "TaskConfig")
      .def(py::init<>())
      .def_readwrite("exposure_samples", &sim::TaskConfig::exposure_samples)
      .def_readwrite("vfi_steps", &sim::TaskConfig::vfi_steps)
      .def_readwrite("vfi_index", &sim::TaskConfig::vfi_index)
      .def_readwrite("unroll_duration_rows", &sim::TaskConfig::unroll_duration_rows)
      .def_readwrite("joint_duration", &sim::TaskConfig::joint_duration);

  py::class_<sim::TaskSample>(m, "TaskSample")
      .def_readonly("task", &sim::TaskSample::task)
      .def_readonly("events", &sim::TaskSample::events)
      .def_readonly("target_shutter", &sim::TaskSample::target_shutter)
      .def_readonly("scene_seed", &sim::TaskSample::scene_seed)
      .def_property_readonly("inputs",
                             [](const sim::TaskSample& s) {
                               py::list out;
                               for (const auto& f : s.inputs) out.append(frame_to_array(f));
                               return out;
                             })
      .def_property_readonly("input_shutters",
                             [](const sim::TaskSample& s) {
                               std::vector<ShutterSpec> out;
                               for (const auto& f : s.inputs) out.push_back(f.shutter);
                               return out;
                             })
      .def_property_readonly("target", [](const sim::TaskSample& s) { return frame_to_array(s.target); })
      .def("retarget",
           [](sim::TaskSample s, const ShutterSpec& shutter) {
             s.target_shutter = shutter;
             s.target = Frame(s.target.width, s.target.height, s.target.channels, shutter);
             return s;
           },
           py::arg("shutter"), "Copy with a new desired shutter and an empty target.");

  m.def(
      "make_sample",
      [](const sim::SceneModel& scene, sim::TaskKind task, std::uint64_t seed, const sim::TaskConfig& config) {
        std::mt19937_64 rng(seed);
        auto s = sim::make_task_sample(scene, task, rng, config);
        return s;
      },
      py::arg("scene"), py::arg("task"), py::arg("seed") = 1, py::arg("config") = sim::TaskConfig{});

  // Model
  py::class_<ModelConfig>(m, "ModelConfig")
      .def(py::init<>())
      .def_static("tiny", &tiny_config)
      .def_static("desk", &desk_config)
      .def_readwrite("levels", &ModelConfig::levels)
      .def_readwrite("channels", &ModelConfig::channels)
      .def_readwrite("segments", &ModelConfig::segments)
      .def_readwrite("bins", &ModelConfig::bins)
      .def_readwrite("window", &ModelConfig::window)
      .def_readwrite("frequencies", &ModelConfig::frequencies)
      .def_readwrite("attn_dim", &ModelConfig::attn_dim)
      .def_readwrite("heads", &ModelConfig::heads)
      .def_readwrite("self_layers", &ModelConfig::self_layers)
      .def_readwrite("ffn_mult", &ModelConfig::ffn_mult)
      .def_readwrite("image_channels", &ModelConfig::image_channels)
      .def_readwrite("use_events", &ModelConfig::use_events)
      .def_readwrite("use_time_encodings", &ModelConfig::use_time_encodings)
      .def_readwrite("use_feature_enhancement", &ModelConfig::use_feature_enhancement)
      .def_readwrite("seed", &ModelConfig::seed)
      .def_property(
          "dtype", [](const ModelConfig& c) { return std::string(c.dtype == DType::f64 ? "f64" : "f32"); },
          [](ModelConfig& c, const std::string& name) { c.dtype = parse_dtype(name); })
      .def("validate", &ModelConfig::validate)
      .def("__eq__", [](const ModelConfig& a, const ModelConfig& b) { return a == b; });

  py::class_<NireModel>(m, "Model")
      .def(py::init<ModelConfig>(), py::arg("config"))
      .def_property_readonly("config", &NireModel::config)
      .def_property_readonly("parameter_count", &NireModel::parameter_count)
      .def("parameter_names",
           [](const NireModel& model) {
             std::vector<std::string> names;
             for (const auto& [name, t] : model.state())
               if (name.rfind("meta.", 0) != 0) names.push_back(name);
             return names;
           })
      .def(
          "predict", [](const NireModel& model, const sim::TaskSample& s) { return frame_to_array(predict(model, s)); },
          py::arg("sample"))
      .def(
          "forward",
          [](const NireModel& model, const F64Array& frames, const F64Array& voxels,
             const std::vector<ShutterSpec>& shutters, const ShutterSpec& target) {
            if (frames.ndim() != 4 || voxels.ndim() != 4) throw ShapeError("frames and voxels must be 4-D");
            ModelInput in;
            in.frames = array_to_tensor(frames, model.config().dtype);
            in.voxels = array_to_tensor(voxels, model.config().dtype);
            in.shutters = shutters;
            in.height = static_cast<int>(frames.shape(2));
            in.width = static_cast<int>(frames.shape(3));
            NoGradGuard guard;
            return tensor_to_array(model.forward(in, target));
          },
          py::arg("frames"), py::arg("voxels"), py::arg("shutters"), py::arg("target"),
          "frames [N, C, H, W], voxels [M, B, H, W] -> [1, C, H, W].")
      .def("save", [](const NireModel& model, const std::string& path) { save_checkpoint(path, model.state()); });

  m.def(
      "load_model", [](const std::string& path) { return load_model(path); }, py::arg("path"));

  // Metrics
  m.def(
      "psnr", [](const F64Array& a, const F64Array& b) { return psnr(array_to_frame(a), array_to_frame(b)); },
      py::arg("pred"), py::arg("gt"));
  m.def(
      "ssim", [](const F64Array& a, const F64Array& b) { return ssim(array_to_frame(a), array_to_frame(b)); },
      py::arg("pred"), py::arg("gt"));

  // Training
  py::class_<StepStats>(m, "StepStats")
      .def_readonly("iteration", &StepStats::iteration)
      .def_readonly("loss", &StepStats::loss)
      .def_readonly("charbonnier", &StepStats::charbonnier)
      .def_readonly("feature", &StepStats::feature)
      .def_readonly("tasks", &StepStats::tasks);

  py::class_<Trainer>(m, "Trainer")
      .def(py::init([](const std::string& json_text) { return Trainer(parse_train_config(json_text)); }),
           py::arg("config_json") = "{}")
      .def_property_readonly("iteration", &Trainer::iteration)
      .def_property_readonly("config_json", [](const Trainer& t) { return train_config_to_json(t.config()); })
      .def_property_readonly("model", py::overload_cast<>(&Trainer::model, py::const_),
                             py::return_value_policy::reference_internal)
      .def("step", &Trainer::step)
      .def("run", &Trainer::run, py::arg("on_step") = std::function<void(const StepStats&)>{})
      .def("save", &Trainer::save, py::arg("path"))
      .def("load", [](Trainer& t, const std::string& path) { t.load_state(load_checkpoint(path)); }, py::arg("path"));

  m.def(
      "check_model_gradients",
      [](const ModelConfig& config, int size, std::uint64_t seed, double h) {
        const auto r = check_model_gradients(config, size, seed, h);
        py::dict d;
        d["max_rel_error"] = r.max_rel_error;
        d["worst_param"] = r.worst_param;
        d["worst_index"] = r.worst_index;
        d["components"] = r.components;
        d["key_bias_gradient"] = r.key_bias_gradient;
        return d;
      },
      py::arg("config"), py::arg("size") = 8, py::arg("seed") = 5, py::arg("h") = 1e-5);
}
