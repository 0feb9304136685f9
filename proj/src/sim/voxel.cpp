#include "nire/voxel.hpp"

#include <algorithm>
#include <cmath>

#include "nire/error.hpp"
#include "nire/ops.hpp"

namespace nire::sim {

std::vector<EventStream> split_segments(const EventStream& events, int segments) {
  if (segments < 1) throw ContractError("need at least one event segment");
  std::vector<EventStream> out(static_cast<std::size_t>(segments));
  for (auto& s : out) {
    s.width = events.width;
    s.height = events.height;
    s.contrast = events.contrast;
    s.log_floor = events.log_floor;
  }
  for (const auto& e : events.events) {
    const int m = std::clamp(static_cast<int>(std::ceil(e.t * segments)), 1, segments);
    out[static_cast<std::size_t>(m - 1)].events.push_back(e);
  }
  return out;
}

Tensor voxelize(const EventStream& events, int bins, int height, int width, double t_start, double t_end,
                DType dtype) {
  if (bins < 2) throw ContractError("voxel grids need at least two bins");
  if (!(t_end > t_start)) throw ContractError("voxel segment must have positive length");
  std::vector<double> grid(static_cast<std::size_t>(bins) * height * width, 0.0);
  const double scale = (bins - 1) / (t_end - t_start);
  const auto plane = static_cast<std::size_t>(height) * width;
  for (const auto& e : events.events) {
    if (e.x >= width || e.y >= height) throw IndexError("event outside voxel grid");
    const double ts = std::clamp((e.t - t_start) * scale, 0.0, static_cast<double>(bins - 1));
    const int lo = std::min(static_cast<int>(std::floor(ts)), bins - 1);
    const double frac = ts - lo;
    const std::size_t px = static_cast<std::size_t>(e.y) * width + e.x;
    grid[static_cast<std::size_t>(lo) * plane + px] += e.p * (1.0 - frac);
    if (frac > 0.0) grid[static_cast<std::size_t>(lo + 1) * plane + px] += e.p * frac;
  }
  return Tensor::from_values({bins, height, width}, grid, dtype);
}

Tensor VoxelGridSequence::stacked() const {
  std::vector<Tensor> parts;
  parts.reserve(grids.size());
  for (const auto& g : grids) parts.push_back(reshape(g, {1, g.dim(0), g.dim(1), g.dim(2)}));
  return concat(parts, 0);
}

VoxelGridSequence voxel_sequence(const EventStream& events, int segments, int bins, DType dtype) {
  VoxelGridSequence seq;
  seq.segments = segments;
  seq.bins = bins;
  const auto parts = split_segments(events, segments);
  for (int m = 0; m < segments; ++m) {
    const double a = static_cast<double>(m) / segments;
    const double b = static_cast<double>(m + 1) / segments;
    seq.bounds.emplace_back(a, b);
    seq.grids.push_back(voxelize(parts[static_cast<std::size_t>(m)], bins, events.height, events.width, a, b, dtype));
  }
  return seq;
}

}  // namespace nire::sim
