#pragma once

#include <cstdint>
#include <vector>

namespace nire::sim {

/// 0.5 + amplitude * sin(2 pi (fx (x - vx t) + fy (y - vy t)) + phase + c * channel_phase)
struct Background {
  double amplitude = 0.2;
  double freq_x = 1.0 / 16.0;
  double freq_y = 1.0 / 24.0;
  double phase = 0.0;
  double velocity_x = 0.0;
  double velocity_y = 0.0;
  double channel_phase = 0.9;
};

enum class SpriteShape { rect, disk };

/// Solid sprite moving at constant velocity. Position is the center at t=0;
/// disks use `width` as the diameter.
struct Sprite {
  SpriteShape shape = SpriteShape::rect;
  double width = 6.0;
  double height = 6.0;
  double intensity = 1.0;
  double x0 = 0.0;
  double y0 = 0.0;
  double velocity_x = 0.0;
  double velocity_y = 0.0;

  /// Fraction of the point (x, y) covered at time t, with a 1 px linear ramp
  /// across the edge.
  double coverage(double x, double y, double t) const;
};

/// Analytic dynamic scene. Coordinates are continuous pixel units with pixel
/// (i, j) centered at (i + 0.5, j + 0.5); time is normalized to [0, 1].
struct SceneModel {
  int width = 32;
  int height = 32;
  int channels = 1;
  Background background;
  std::vector<Sprite> sprites;

  /// Scene radiance at a continuous position, clamped to [0, 1].
  double value(double x, double y, double t, int channel = 0) const;
  /// Channel mean of `value`, used as the luminance the event sensor sees.
  double luminance(double x, double y, double t) const;
  bool is_static() const;
  void validate() const;
};

struct SceneOptions {
  int min_sprites = 2;
  int max_sprites = 3;
  double min_size = 6.0;
  double max_size = 12.0;
  double max_speed = 10.0;
  double background_amplitude = 0.2;
};

/// Procedural scene drawn from a seeded generator. The same seed always gives
/// the same scene.
SceneModel random_scene(std::uint64_t seed, int width, int height, int channels = 1,
                        const SceneOptions& options = {});

/// Static textured background swept by the leading edge of a fast bright bar.
/// Every pixel the edge reaches sees a single near-step change in time.
SceneModel moving_sprite_scene(int width = 96, int height = 16, double speed = 256.0);

}  // namespace nire::sim
