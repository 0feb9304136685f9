#include "nire/scene.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "nire/error.hpp"

namespace nire::sim {

double Sprite::coverage(double x, double y, double t) const {
  const double dx = x - (x0 + velocity_x * t);
  const double dy = y - (y0 + velocity_y * t);
  double inside = 0.0;  // signed distance to the edge, positive inside
  if (shape == SpriteShape::rect) {
    inside = std::min(0.5 * width - std::abs(dx), 0.5 * height - std::abs(dy));
  } else {
    inside = 0.5 * width - std::hypot(dx, dy);
  }
  return std::clamp(inside + 0.5, 0.0, 1.0);
}

double SceneModel::value(double x, double y, double t, int channel) const {
  const auto& bg = background;
  const double arg = 2.0 * std::numbers::pi *
                         (bg.freq_x * (x - bg.velocity_x * t) + bg.freq_y * (y - bg.velocity_y * t)) +
                     bg.phase + channel * bg.channel_phase;
  double v = 0.5 + bg.amplitude * std::sin(arg);
  for (const auto& s : sprites) {
    const double a = s.coverage(x, y, t);
    if (a > 0.0) v = v * (1.0 - a) + s.intensity * a;
  }
  return std::clamp(v, 0.0, 1.0);
}

double SceneModel::luminance(double x, double y, double t) const {
  if (channels == 1) return value(x, y, t, 0);
  double s = 0.0;
  for (int c = 0; c < channels; ++c) s += value(x, y, t, c);
  return s / channels;
}

bool SceneModel::is_static() const {
  if (background.velocity_x != 0.0 || background.velocity_y != 0.0) return false;
  return std::all_of(sprites.begin(), sprites.end(),
                     [](const Sprite& s) { return s.velocity_x == 0.0 && s.velocity_y == 0.0; });
}

void SceneModel::validate() const {
  if (width <= 0 || height <= 0) throw DomainError("scene dimensions must be positive");
  if (channels <= 0) throw DomainError("scene needs at least one channel");
  for (const auto& s : sprites) {
    if (!(s.intensity > 0.0 && s.intensity <= 1.0)) throw DomainError("sprite intensity must lie in (0, 1]");
    if (!(s.width > 0.0 && s.height > 0.0)) throw DomainError("sprite size must be positive");
  }
}

SceneModel random_scene(std::uint64_t seed, int width, int height, int channels, const SceneOptions& options) {
  std::mt19937_64 rng(seed);
  auto uniform = [&](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); };

  SceneModel scene;
  scene.width = width;
  scene.height = height;
  scene.channels = channels;
  scene.background.amplitude = options.background_amplitude * uniform(0.5, 1.0);
  scene.background.freq_x = uniform(-1.0, 1.0) / 12.0;
  scene.background.freq_y = uniform(-1.0, 1.0) / 12.0;
  scene.background.phase = uniform(0.0, 2.0 * std::numbers::pi);

  const int count = std::uniform_int_distribution<int>(options.min_sprites, options.max_sprites)(rng);
  for (int i = 0; i < count; ++i) {
    Sprite s;
    s.shape = uniform(0.0, 1.0) < 0.5 ? SpriteShape::rect : SpriteShape::disk;
    s.width = uniform(options.min_size, options.max_size);
    s.height = s.shape == SpriteShape::rect ? uniform(options.min_size, options.max_size) : s.width;
    // Keep sprites clearly brighter or darker than the mid-grey background.
    s.intensity = uniform(0.0, 1.0) < 0.5 ? uniform(0.05, 0.25) : uniform(0.75, 1.0);
    const double angle = uniform(0.0, 2.0 * std::numbers::pi);
    const double speed = uniform(0.5, 1.0) * options.max_speed;
    s.velocity_x = speed * std::cos(angle);
    s.velocity_y = speed * std::sin(angle);
    // Place the path midpoint inside the frame so the sprite is visible throughout.
    const double cx = uniform(0.25, 0.75) * width;
    const double cy = uniform(0.25, 0.75) * height;
    s.x0 = cx - 0.5 * s.velocity_x;
    s.y0 = cy - 0.5 * s.velocity_y;
    scene.sprites.push_back(s);
  }
  return scene;
}

SceneModel moving_sprite_scene(int width, int height, double speed) {
  SceneModel scene;
  scene.width = width;
  scene.height = height;
  scene.background.amplitude = 0.15;
  scene.background.freq_x = 1.0 / 37.0;
  scene.background.freq_y = 1.0 / 11.0;
  scene.background.phase = 0.3;
  // A bar long enough that its trailing edge never enters the frame: each
  // pixel sees exactly one transition.
  Sprite s;
  s.width = 4.0 * speed + 2.0 * width;
  s.height = 2.0 * height;
  s.intensity = 0.95;
  s.x0 = -0.5 * s.width;
  s.y0 = 0.5 * height;
  s.velocity_x = speed;
  scene.sprites.push_back(s);
  return scene;
}

}  // namespace nire::sim
