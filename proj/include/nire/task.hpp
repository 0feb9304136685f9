#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "nire/events.hpp"
#include "nire/frame.hpp"
#include "nire/scene.hpp"

namespace nire::sim {

enum class TaskKind { deblur = 0, vfi = 1, unroll = 2, deblur_vfi = 3, reconstruct = 4 };
inline constexpr int kTaskCount = 5;
inline constexpr std::array<TaskKind, kTaskCount> kAllTasks = {TaskKind::deblur, TaskKind::vfi, TaskKind::unroll,
                                                               TaskKind::deblur_vfi, TaskKind::reconstruct};

const char* to_string(TaskKind task);
/// Throws ConfigError for unknown names.
TaskKind parse_task(const std::string& name);

struct TaskConfig {
  int exposure_samples = 64;
  /// Interpolation targets are i / vfi_steps for i in 1..vfi_steps-1.
  int vfi_steps = 4;
  /// Fixed interpolation index; -1 draws it from the generator.
  int vfi_index = -1;
  /// Rolling-shutter exposure length in rows.
  double unroll_duration_rows = 8.0;
  /// Exposure length of each key frame in the joint deblur + interpolation task.
  double joint_duration = 0.25;
  EventParams events;
};

struct TaskSample {
  TaskKind task = TaskKind::deblur;
  std::vector<Frame> inputs;
  EventStream events;
  ShutterSpec target_shutter;
  Frame target;
  std::uint64_t scene_seed = 0;
};

/// Rolling shutter that sweeps all rows across [0, 1] with each row open
/// for `duration_rows` row times.
ShutterSpec unroll_input_shutter(int height, double duration_rows);
/// Global-shutter instant the rolling-shutter correction task targets.
double unroll_target_time(int height, double duration_rows);

/// Builds inputs and target for one task on one scene. Pass precomputed
/// events to skip simulation when the same scene is reused.
TaskSample make_task_sample(const SceneModel& scene, TaskKind task, std::mt19937_64& rng,
                            const TaskConfig& config = {}, const EventStream* events = nullptr);

/// Exposes `shutter` on the scene, rendering zero-length windows instantly.
Frame exposure_for(const SceneModel& scene, const ShutterSpec& shutter, int n_samples);

}  // namespace nire::sim
