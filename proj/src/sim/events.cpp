#include "nire/events.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "nire/error.hpp"
#include "nire/serialize.hpp"

namespace nire::sim {

namespace {

constexpr std::uint8_t kEventVersion = 1;
// Relative slack on the threshold test so a change of exactly k contrast steps
// yields k events despite rounding in the log.
constexpr double kThresholdSlack = 1e-9;

}  // namespace

bool EventStream::is_valid() const {
  for (std::size_t i = 0; i < events.size(); ++i) {
    const auto& e = events[i];
    if (i && e.t < events[i - 1].t) return false;
    if (e.x >= width || e.y >= height) return false;
    if (!(e.t >= 0.0 && e.t <= 1.0)) return false;
    if (e.p != 1 && e.p != -1) return false;
  }
  return true;
}

EventStream simulate_events(const IntensityField& field, int width, int height, const EventParams& params) {
  if (!(params.contrast > 0.0)) throw DomainError("event contrast threshold must be positive");
  if (!(params.dt > 0.0 && params.dt <= 1e-3)) throw DomainError("event sampling step must lie in (0, 1e-3]");
  if (!(params.log_floor > 0.0)) throw DomainError("log floor must be positive");
  if (width <= 0 || height <= 0 || width > 65535 || height > 65535) throw DomainError("bad sensor dimensions");

  EventStream out;
  out.width = width;
  out.height = height;
  out.contrast = params.contrast;
  out.log_floor = params.log_floor;

  const auto steps = static_cast<int>(std::ceil(1.0 / params.dt - 1e-9));
  const double C = params.contrast;
  auto log_at = [&](int x, int y, double t) { return std::log(field(x, y, t) + params.log_floor); };

  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      double ref = log_at(x, y, 0.0);
      double prev = ref;
      double t_prev = 0.0;
      for (int k = 1; k <= steps; ++k) {
        const double t = std::min(1.0, k * params.dt);
        const double cur = log_at(x, y, t);
        const double delta = cur - ref;
        const auto n = static_cast<int>(std::floor(std::abs(delta) / C + kThresholdSlack));
        if (n > 0) {
          const double sign = delta > 0 ? 1.0 : -1.0;
          for (int j = 1; j <= n; ++j) {
            const double level = ref + sign * j * C;
            double frac = cur != prev ? (level - prev) / (cur - prev) : 1.0;
            frac = std::clamp(frac, 0.0, 1.0);
            out.events.push_back({t_prev + frac * (t - t_prev), static_cast<std::uint16_t>(x),
                                  static_cast<std::uint16_t>(y), static_cast<std::int8_t>(sign)});
          }
          ref += sign * n * C;
        }
        prev = cur;
        t_prev = t;
      }
    }
  }
  std::stable_sort(out.events.begin(), out.events.end(),
                   [](const EventRecord& a, const EventRecord& b) { return a.t < b.t; });
  return out;
}

EventStream simulate_events(const SceneModel& scene, const EventParams& params) {
  return simulate_events([&scene](int x, int y, double t) { return scene.luminance(x + 0.5, y + 0.5, t); },
                         scene.width, scene.height, params);
}

std::vector<int> signed_event_counts(const EventStream& stream) {
  std::vector<int> counts(static_cast<std::size_t>(stream.width) * stream.height, 0);
  for (const auto& e : stream.events) counts[static_cast<std::size_t>(e.y) * stream.width + e.x] += e.p;
  return counts;
}

void write_events(std::ostream& os, const EventStream& stream) {
  os.write("NREV", 4);
  io::write_u8(os, kEventVersion);
  io::write_u16(os, static_cast<std::uint16_t>(stream.width));
  io::write_u16(os, static_cast<std::uint16_t>(stream.height));
  io::write_f64(os, stream.contrast);
  io::write_u64(os, stream.events.size());
  for (const auto& e : stream.events) {
    io::write_f64(os, e.t);
    io::write_u16(os, e.x);
    io::write_u16(os, e.y);
    io::write_i8(os, e.p);
  }
}

EventStream read_events(std::istream& is) {
  io::expect_magic(is, "NREV", "event stream");
  if (io::read_u8(is) != kEventVersion) throw FormatError("unsupported NREV version");
  EventStream s;
  s.width = io::read_u16(is);
  s.height = io::read_u16(is);
  s.contrast = io::read_f64(is);
  const std::uint64_t count = io::read_u64(is);
  if (count > (1ull << 34)) throw FormatError("implausible NREV event count");
  s.events.reserve(static_cast<std::size_t>(std::min<std::uint64_t>(count, 1u << 20)));
  for (std::uint64_t i = 0; i < count; ++i) {
    EventRecord e;
    e.t = io::read_f64(is);
    e.x = io::read_u16(is);
    e.y = io::read_u16(is);
    e.p = io::read_i8(is);
    s.events.push_back(e);
  }
  return s;
}

void save_events(const std::filesystem::path& path, const EventStream& stream) {
  std::ostringstream os;
  write_events(os, stream);
  const std::string b = os.str();
  io::write_file(path, std::vector<std::uint8_t>(b.begin(), b.end()));
}

EventStream load_events(const std::filesystem::path& path) {
  const auto bytes = io::read_file(path);
  std::istringstream is(std::string(bytes.begin(), bytes.end()));
  return read_events(is);
}

std::string events_to_csv(const EventStream& stream) {
  std::string out = "t,x,y,p\n";
  char line[64];
  for (const auto& e : stream.events) {
    std::snprintf(line, sizeof line, "%.9f,%u,%u,%d\n", e.t, static_cast<unsigned>(e.x), static_cast<unsigned>(e.y),
                  static_cast<int>(e.p));
    out += line;
  }
  return out;
}

}  // namespace nire::sim
