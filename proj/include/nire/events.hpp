#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "nire/scene.hpp"

namespace nire::sim {

struct EventRecord {
  double t = 0.0;
  std::uint16_t x = 0;
  std::uint16_t y = 0;
  std::int8_t p = 1;
  bool operator==(const EventRecord&) const = default;
};

struct EventStream {
  int width = 0;
  int height = 0;
  double contrast = 0.15;
  double log_floor = 1e-3;
  std::vector<EventRecord> events;

  std::size_t size() const { return events.size(); }
  bool empty() const { return events.empty(); }
  /// Sorted by t, coordinates in bounds, t in [0, 1], polarity +-1.
  bool is_valid() const;
  bool operator==(const EventStream&) const = default;
};

struct EventParams {
  double contrast = 0.15;
  double log_floor = 1e-3;
  double dt = 1.0 / 4096.0;
};

/// Linear intensity at integer pixel (x, y) and time t.
using IntensityField = std::function<double(int x, int y, double t)>;

/// Log-threshold crossing sensor. Each pixel tracks ln(I + log_floor) on a
/// uniform dt grid over [0, 1]; every full contrast step away from the
/// reference level emits one event at the linearly interpolated crossing time.
EventStream simulate_events(const IntensityField& field, int width, int height, const EventParams& params = {});
EventStream simulate_events(const SceneModel& scene, const EventParams& params = {});

/// Signed event count per pixel, row-major.
std::vector<int> signed_event_counts(const EventStream& stream);

/// "NREV": magic, u8 version (1), u16 width, u16 height, f64 contrast,
/// u64 count, then (f64 t, u16 x, u16 y, i8 p) records.
void write_events(std::ostream& os, const EventStream& stream);
EventStream read_events(std::istream& is);
void save_events(const std::filesystem::path& path, const EventStream& stream);
EventStream load_events(const std::filesystem::path& path);

/// CSV with header `t,x,y,p`, t printed with 9 decimals.
std::string events_to_csv(const EventStream& stream);

}  // namespace nire::sim
