#include "nire/exposure.hpp"

#include "nire/error.hpp"

namespace nire::sim {

namespace {

void check_time(double t) {
  if (!(t >= 0.0 && t <= 1.0)) throw DomainError("scene time " + std::to_string(t) + " outside [0, 1]");
}

}  // namespace

Frame render_instant(const SceneModel& scene, double t) {
  check_time(t);
  Frame f(scene.width, scene.height, scene.channels, ShutterSpec::instant(t));
  for (int c = 0; c < scene.channels; ++c) {
    for (int y = 0; y < scene.height; ++y) {
      for (int x = 0; x < scene.width; ++x) f.at(c, y, x) = scene.value(x + 0.5, y + 0.5, t, c);
    }
  }
  return f;
}

Frame expose(const SceneModel& scene, const ShutterSpec& shutter, int n_samples) {
  if (n_samples < 1) throw ContractError("expose needs at least one sample");
  shutter.validate(scene.width, scene.height);
  Frame f(scene.width, scene.height, scene.channels, shutter);
  for (int c = 0; c < scene.channels; ++c) {
    for (int y = 0; y < scene.height; ++y) {
      for (int x = 0; x < scene.width; ++x) {
        const auto w = shutter.window(x, y);
        if (w.t_a == w.t_b) {
          f.at(c, y, x) = scene.value(x + 0.5, y + 0.5, w.t_a, c);
          continue;
        }
        // Accumulate in sample order so a global window reproduces the mean of
        // render_instant frames bit for bit.
        double acc = 0.0;
        for (int k = 0; k < n_samples; ++k) {
          acc += scene.value(x + 0.5, y + 0.5, midpoint_time(w.t_a, w.t_b, k, n_samples), c);
        }
        f.at(c, y, x) = acc / n_samples;
      }
    }
  }
  return f;
}

}  // namespace nire::sim
