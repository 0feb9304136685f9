#include "nire/task.hpp"

#include "nire/error.hpp"
#include "nire/exposure.hpp"

namespace nire::sim {

const char* to_string(TaskKind task) {
  switch (task) {
    case TaskKind::deblur: return "deblur";
    case TaskKind::vfi: return "vfi";
    case TaskKind::unroll: return "unroll";
    case TaskKind::deblur_vfi: return "deblur_vfi";
    case TaskKind::reconstruct: return "reconstruct";
  }
  return "?";
}

TaskKind parse_task(const std::string& name) {
  for (TaskKind t : kAllTasks) {
    if (name == to_string(t)) return t;
  }
  throw ConfigError("unknown task '" + name + "' (expected deblur, vfi, unroll, deblur_vfi or reconstruct)");
}

ShutterSpec unroll_input_shutter(int height, double duration_rows) {
  const double span = height + duration_rows;
  return ShutterSpec::rolling(0.0, 1.0 / span, duration_rows / span);
}

double unroll_target_time(int height, double duration_rows) { return 0.5 * height / (height + duration_rows); }

Frame exposure_for(const SceneModel& scene, const ShutterSpec& shutter, int n_samples) {
  if (const auto* g = std::get_if<GlobalShutter>(&shutter.variant()); g && g->t_a == g->t_b) {
    return render_instant(scene, g->t_a);
  }
  return expose(scene, shutter, n_samples);
}

TaskSample make_task_sample(const SceneModel& scene, TaskKind task, std::mt19937_64& rng, const TaskConfig& config,
                            const EventStream* events) {
  if (config.vfi_steps < 2) throw ConfigError("vfi_steps must be at least 2");
  if (!(config.joint_duration > 0.0 && config.joint_duration < 0.5)) {
    throw ConfigError("joint_duration must lie in (0, 0.5)");
  }
  TaskSample s;
  s.task = task;
  s.events = events ? *events : simulate_events(scene, config.events);

  auto pick_vfi_time = [&]() {
    int i = config.vfi_index;
    if (i < 0) i = std::uniform_int_distribution<int>(1, config.vfi_steps - 1)(rng);
    if (i < 1 || i >= config.vfi_steps) throw ConfigError("vfi_index out of range");
    return static_cast<double>(i) / config.vfi_steps;
  };
  auto add_input = [&](const ShutterSpec& spec) { s.inputs.push_back(exposure_for(scene, spec, config.exposure_samples)); };

  switch (task) {
    case TaskKind::deblur:
      add_input(ShutterSpec::global(0.0, 1.0));
      s.target_shutter = ShutterSpec::instant(0.5);
      break;
    case TaskKind::vfi:
      add_input(ShutterSpec::instant(0.0));
      add_input(ShutterSpec::instant(1.0));
      s.target_shutter = ShutterSpec::instant(pick_vfi_time());
      break;
    case TaskKind::unroll:
      add_input(unroll_input_shutter(scene.height, config.unroll_duration_rows));
      s.target_shutter = ShutterSpec::instant(unroll_target_time(scene.height, config.unroll_duration_rows));
      break;
    case TaskKind::deblur_vfi:
      add_input(ShutterSpec::global(0.0, config.joint_duration));
      add_input(ShutterSpec::global(1.0 - config.joint_duration, 1.0));
      s.target_shutter = ShutterSpec::instant(pick_vfi_time());
      break;
    case TaskKind::reconstruct: {
      const bool rolling = std::uniform_int_distribution<int>(0, 1)(rng) == 1;
      add_input(rolling ? unroll_input_shutter(scene.height, config.unroll_duration_rows) : ShutterSpec::global(0.0, 1.0));
      s.target_shutter = s.inputs.front().shutter;
      s.target = s.inputs.front();
      return s;
    }
  }
  s.target = exposure_for(scene, s.target_shutter, config.exposure_samples);
  return s;
}

}  // namespace nire::sim
