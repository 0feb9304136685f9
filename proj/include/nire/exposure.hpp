#pragma once

#include "nire/frame.hpp"
#include "nire/scene.hpp"
#include "nire/shutter.hpp"

namespace nire::sim {

/// Scene sampled at pixel centers at instant t. Throws DomainError for t outside [0, 1].
Frame render_instant(const SceneModel& scene, double t);

/// Midpoint-rule exposure. Each pixel is the mean of the scene at
/// `n_samples` times t_a + (k + 0.5)(t_b - t_a) / n over its own window.
/// Zero-length windows give the instantaneous value.
Frame expose(const SceneModel& scene, const ShutterSpec& shutter, int n_samples = 64);

/// k-th midpoint time of an n-sample exposure of [t_a, t_b].
inline double midpoint_time(double t_a, double t_b, int k, int n) {
  return t_a + (k + 0.5) * (t_b - t_a) / n;
}

}  // namespace nire::sim
