#include "nire/shutter.hpp"

#include <charconv>
#include <cmath>
#include <iomanip>
#include <sstream>

#include "nire/error.hpp"

namespace nire::sim {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

void check_window(double a, double b, const char* what) {
  if (!(a >= 0.0 && b <= 1.0 && a <= b)) {
    std::ostringstream os;
    os << what << ": exposure window [" << a << ", " << b << "] must satisfy 0 <= t_a <= t_b <= 1";
    throw DomainError(os.str());
  }
}

}  // namespace

ExposureWindow ShutterSpec::window(int x, int y) const {
  return std::visit(
      Overloaded{
          [](const GlobalShutter& g) { return ExposureWindow{g.t_a, g.t_b}; },
          [y](const RollingShutter& r) {
            const double a = r.start + r.readout_delay * y;
            return ExposureWindow{a, a + r.duration};
          },
          [x, y](const PerPixelShutter& p) {
            if (x < 0 || y < 0 || x >= p.width || y >= p.height) throw IndexError("pixel outside shutter map");
            const auto i = static_cast<std::size_t>(y) * static_cast<std::size_t>(p.width) +
                           static_cast<std::size_t>(x);
            return ExposureWindow{p.t_a[i], p.t_b[i]};
          },
      },
      v_);
}

ExposureWindow ShutterSpec::window_at(double x, double y) const {
  return std::visit(
      Overloaded{
          [](const GlobalShutter& g) { return ExposureWindow{g.t_a, g.t_b}; },
          [y](const RollingShutter& r) {
            const double a = r.start + r.readout_delay * y;
            return ExposureWindow{a, a + r.duration};
          },
          [this, x, y](const PerPixelShutter&) {
            return window(static_cast<int>(std::lround(x)), static_cast<int>(std::lround(y)));
          },
      },
      v_);
}

ExposureWindow ShutterSpec::block_window(int x0, int y0, int x1, int y1) const {
  if (const auto* p = std::get_if<PerPixelShutter>(&v_)) {
    double sa = 0.0, sb = 0.0;
    for (int y = y0; y < y1; ++y) {
      for (int x = x0; x < x1; ++x) {
        const auto w = window(x, y);
        sa += w.t_a;
        sb += w.t_b;
      }
    }
    const double n = static_cast<double>(x1 - x0) * static_cast<double>(y1 - y0);
    (void)p;
    return {sa / n, sb / n};
  }
  // Windows of the analytic variants are affine in position, so the block mean
  // equals the window at the block center.
  return window_at(0.5 * (x0 + x1 - 1), 0.5 * (y0 + y1 - 1));
}

void ShutterSpec::validate(int width, int height) const {
  std::visit(Overloaded{
                 [](const GlobalShutter& g) { check_window(g.t_a, g.t_b, "global shutter"); },
                 [height](const RollingShutter& r) {
                   if (!(r.readout_delay > 0.0)) throw DomainError("rolling shutter needs a positive readout delay");
                   if (!(r.duration >= 0.0)) throw DomainError("rolling shutter needs a non-negative duration");
                   check_window(r.start, r.start + r.duration, "rolling shutter first row");
                   const double last = r.start + r.readout_delay * (height - 1);
                   check_window(last, last + r.duration, "rolling shutter last row");
                 },
                 [width, height](const PerPixelShutter& p) {
                   if (p.width != width || p.height != height) throw DomainError("per-pixel shutter map size mismatch");
                   const auto n = static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
                   if (p.t_a.size() != n || p.t_b.size() != n) throw DomainError("per-pixel shutter map has wrong length");
                   for (std::size_t i = 0; i < n; ++i) check_window(p.t_a[i], p.t_b[i], "per-pixel shutter");
                 },
             },
             v_);
}

int shutter_state(const ShutterSpec& shutter, int x, int y, double t) {
  const auto w = shutter.window(x, y);
  return (t >= w.t_a && t < w.t_b) ? 1 : 0;
}

namespace {

std::vector<double> parse_numbers(const std::string& body, const std::string& text) {
  std::vector<double> out;
  std::size_t pos = 0;
  while (pos <= body.size()) {
    const std::size_t comma = body.find(',', pos);
    const std::string item = body.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
    double v = 0.0;
    const auto* first = item.data();
    const auto* last = item.data() + item.size();
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (item.empty() || ec != std::errc() || ptr != last) throw ConfigError("malformed shutter spec '" + text + "'");
    out.push_back(v);
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  return out;
}

}  // namespace

ShutterSpec parse_shutter(const std::string& text) {
  const std::size_t colon = text.find(':');
  if (colon == std::string::npos) throw ConfigError("shutter spec needs a kind prefix: '" + text + "'");
  const std::string kind = text.substr(0, colon);
  const auto nums = parse_numbers(text.substr(colon + 1), text);
  if (kind == "gs" && nums.size() == 2) return ShutterSpec::global(nums[0], nums[1]);
  if (kind == "rs" && nums.size() == 3) return ShutterSpec::rolling(nums[0], nums[1], nums[2]);
  if (kind == "instant" && nums.size() == 1) return ShutterSpec::instant(nums[0]);
  throw ConfigError("unknown shutter spec '" + text + "' (expected gs:ta,tb | rs:t1,alpha,delta | instant:t)");
}

std::string format_shutter(const ShutterSpec& shutter) {
  std::ostringstream os;
  os << std::setprecision(17);
  std::visit(Overloaded{
                 [&](const GlobalShutter& g) { os << "gs:" << g.t_a << ',' << g.t_b; },
                 [&](const RollingShutter& r) { os << "rs:" << r.start << ',' << r.readout_delay << ',' << r.duration; },
                 [](const PerPixelShutter&) { throw ConfigError("per-pixel shutters have no text form"); },
             },
             shutter.variant());
  return os.str();
}

}  // namespace nire::sim
