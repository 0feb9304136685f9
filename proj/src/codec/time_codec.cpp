#include "nire/time_codec.hpp"

#include <cmath>
#include <numbers>

#include "nire/error.hpp"

namespace nire {

namespace {

// Reduces x to quadrant q and offset f with x = q / 2 + f, |f| <= 1/4.
// fmod and the subtraction are exact in binary floating point.
void reduce(double x, int& quadrant, double& offset) {
  const double r = std::fmod(x, 2.0);
  const double q = std::nearbyint(2.0 * r);
  offset = r - 0.5 * q;
  quadrant = static_cast<int>(q) & 3;
}

}  // namespace

double sin_pi(double x) {
  int q = 0;
  double f = 0.0;
  reduce(x, q, f);
  const double s = std::sin(std::numbers::pi * f);
  const double c = std::cos(std::numbers::pi * f);
  switch (q) {
    case 0: return s;
    case 1: return c;
    case 2: return -s;
    default: return -c;
  }
}

double cos_pi(double x) {
  int q = 0;
  double f = 0.0;
  reduce(x, q, f);
  const double s = std::sin(std::numbers::pi * f);
  const double c = std::cos(std::numbers::pi * f);
  switch (q) {
    case 0: return c;
    case 1: return -s;
    case 2: return -c;
    default: return s;
  }
}

std::vector<double> gamma(double t, int frequencies) {
  if (!(t >= 0.0 && t <= 1.0)) throw DomainError("time " + std::to_string(t) + " outside [0, 1]");
  if (frequencies < 1) throw ContractError("need at least one frequency");
  std::vector<double> out(2 * static_cast<std::size_t>(frequencies));
  double scaled = t;
  for (int k = 0; k < frequencies; ++k) {
    out[2 * k] = sin_pi(scaled);
    out[2 * k + 1] = cos_pi(scaled);
    scaled *= 2.0;
  }
  return out;
}

std::vector<double> range_encoding(double t_a, double t_b, int frequencies) {
  if (t_a > t_b) throw ContractError("range encoding needs t_a <= t_b");
  auto out = gamma(t_a, frequencies);
  const auto end = gamma(t_b, frequencies);
  out.insert(out.end(), end.begin(), end.end());
  return out;
}

double cell_center(int i, int level) { return (i + 0.5) * std::ldexp(1.0, level) - 0.5; }

Tensor shutter_encoding_map(const sim::ShutterSpec& shutter, int height, int width, int level, int frequencies,
                            DType dtype) {
  const int scale = 1 << level;
  if (height % scale || width % scale) throw ShapeError("image size not divisible by the level scale");
  const int h = height / scale;
  const int w = width / scale;
  const auto dim = static_cast<std::size_t>(4 * frequencies);
  std::vector<double> values(static_cast<std::size_t>(h) * w * dim);
  const bool per_pixel = std::holds_alternative<sim::PerPixelShutter>(shutter.variant());
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const auto win = per_pixel ? shutter.block_window(x * scale, y * scale, (x + 1) * scale, (y + 1) * scale)
                                 : shutter.window_at(cell_center(x, level), cell_center(y, level));
      const auto enc = range_encoding(win.t_a, win.t_b, frequencies);
      std::copy(enc.begin(), enc.end(), values.begin() + static_cast<std::ptrdiff_t>((y * w + x) * dim));
    }
  }
  return Tensor::from_values({h, w, static_cast<std::int64_t>(dim)}, values, dtype);
}

TokenTimes token_time_metadata(const std::vector<sim::ShutterSpec>& input_shutters,
                               const sim::ShutterSpec& target_shutter, int height, int width, int segments,
                               int levels, int frequencies, DType dtype) {
  TokenTimes out;
  for (int m = 0; m < segments; ++m) {
    out.segments.push_back(
        range_encoding(static_cast<double>(m) / segments, static_cast<double>(m + 1) / segments, frequencies));
  }
  for (const auto& spec : input_shutters) {
    auto& maps = out.frames.emplace_back();
    for (int l = 0; l < levels; ++l) maps.push_back(shutter_encoding_map(spec, height, width, l, frequencies, dtype));
  }
  for (int l = 0; l < levels; ++l) {
    out.film.push_back(shutter_encoding_map(target_shutter, height, width, l, frequencies, dtype));
  }
  return out;
}

}  // namespace nire
