#pragma once

#include <utility>
#include <vector>

#include "nire/events.hpp"
#include "nire/tensor.hpp"

namespace nire::sim {

/// Event t goes to segment ceil(t * M) (1-based, clamped to [1, M]); an event
/// exactly on a boundary joins the earlier segment. Order is preserved.
std::vector<EventStream> split_segments(const EventStream& events, int segments);

/// Deposits each polarity into the two temporal bins adjacent to
/// t* = (B - 1)(t - t_start) / (t_end - t_start). Returns [B, H, W].
Tensor voxelize(const EventStream& events, int bins, int height, int width, double t_start, double t_end,
                DType dtype = DType::f64);

struct VoxelGridSequence {
  int segments = 0;
  int bins = 0;
  std::vector<Tensor> grids;                       // segments x [B, H, W]
  std::vector<std::pair<double, double>> bounds;  // (start, end) per segment

  /// All grids stacked to [M, B, H, W].
  Tensor stacked() const;
};

VoxelGridSequence voxel_sequence(const EventStream& events, int segments, int bins, DType dtype = DType::f64);

}  // namespace nire::sim
