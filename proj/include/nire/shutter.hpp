#pragma once

#include <string>
#include <variant>
#include <vector>

namespace nire::sim {

/// Every pixel opens at `t_a` and closes at `t_b`.
struct GlobalShutter {
  double t_a = 0.0;
  double t_b = 0.0;
  bool operator==(const GlobalShutter&) const = default;
};

/// Row y opens at start + readout_delay * y and stays open for `duration`.
struct RollingShutter {
  double start = 0.0;
  double readout_delay = 0.0;
  double duration = 0.0;
  bool operator==(const RollingShutter&) const = default;
};

/// Explicit H x W maps of window starts and ends, row-major.
struct PerPixelShutter {
  int width = 0;
  int height = 0;
  std::vector<double> t_a;
  std::vector<double> t_b;
  bool operator==(const PerPixelShutter&) const = default;
};

struct ExposureWindow {
  double t_a;
  double t_b;
};

/// Per-pixel exposure window specification. Times are normalized to [0, 1].
class ShutterSpec {
 public:
  using Variant = std::variant<GlobalShutter, RollingShutter, PerPixelShutter>;

  ShutterSpec() = default;
  ShutterSpec(Variant v) : v_(std::move(v)) {}  // NOLINT(google-explicit-constructor)
  ShutterSpec(GlobalShutter g) : v_(g) {}          // NOLINT(google-explicit-constructor)
  ShutterSpec(RollingShutter r) : v_(r) {}         // NOLINT(google-explicit-constructor)
  ShutterSpec(PerPixelShutter p) : v_(std::move(p)) {}  // NOLINT(google-explicit-constructor)

  static ShutterSpec global(double t_a, double t_b) { return GlobalShutter{t_a, t_b}; }
  static ShutterSpec instant(double t) { return GlobalShutter{t, t}; }
  static ShutterSpec rolling(double start, double readout_delay, double duration) {
    return RollingShutter{start, readout_delay, duration};
  }

  const Variant& variant() const { return v_; }
  bool is_global() const { return std::holds_alternative<GlobalShutter>(v_); }
  bool is_rolling() const { return std::holds_alternative<RollingShutter>(v_); }

  /// Window of the pixel at integer column x, row y.
  ExposureWindow window(int x, int y) const;
  /// Window at a continuous pixel-index position. Per-pixel maps are averaged
  /// over the covered block [x0, x1) x [y0, y1) instead; see `block_window`.
  ExposureWindow window_at(double x, double y) const;
  /// Mean window over the integer pixel block [x0, x1) x [y0, y1).
  ExposureWindow block_window(int x0, int y0, int x1, int y1) const;

  /// Throws DomainError when a window leaves [0, 1], closes before it opens,
  /// or a rolling shutter does not advance row by row.
  void validate(int width, int height) const;

  bool operator==(const ShutterSpec&) const = default;

 private:
  Variant v_ = GlobalShutter{};
};

/// 1 iff t lies in the half-open window [t_a, t_b) of pixel (x, y).
int shutter_state(const ShutterSpec& shutter, int x, int y, double t);

/// Parses "gs:ta,tb", "rs:t1,alpha,delta" or "instant:t". Throws ConfigError.
ShutterSpec parse_shutter(const std::string& text);
/// Inverse of parse_shutter for the global and rolling variants.
std::string format_shutter(const ShutterSpec& shutter);

}  // namespace nire::sim
