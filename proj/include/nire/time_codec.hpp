#pragma once

#include <vector>

#include "nire/shutter.hpp"
#include "nire/tensor.hpp"

namespace nire {

/// sin(pi x) and cos(pi x) with exact argument reduction; multiples of 1/2
/// give exact results.
double sin_pi(double x);
double cos_pi(double x);

/// (sin(2^0 pi t), cos(2^0 pi t), ..., sin(2^(F-1) pi t), cos(2^(F-1) pi t)).
/// Throws DomainError for t outside [0, 1].
std::vector<double> gamma(double t, int frequencies);

/// gamma(t_a) followed by gamma(t_b). Throws ContractError when t_a > t_b.
std::vector<double> range_encoding(double t_a, double t_b, int frequencies);

/// Full-resolution pixel-index coordinate of the center of cell i at a level
/// downsampled by 2^level: (i + 0.5) 2^level - 0.5.
double cell_center(int i, int level);

/// [H_l, W_l, 4F] range encodings of a shutter at pyramid level `level`
/// (0 = full resolution). Analytic shutters are evaluated at cell centers;
/// per-pixel maps use the mean window of each cell's block.
Tensor shutter_encoding_map(const sim::ShutterSpec& shutter, int height, int width, int level, int frequencies,
                            DType dtype = DType::f64);

/// Range encodings for every token group of one forward pass.
struct TokenTimes {
  /// Per event segment, the encoding of ((m-1)/M, m/M).
  std::vector<std::vector<double>> segments;
  /// frames[n][l]: [H_l, W_l, 4F] map of input frame n at level l.
  std::vector<std::vector<Tensor>> frames;
  /// film[l]: [H_l, W_l, 4F] map of the desired shutter.
  std::vector<Tensor> film;
};

TokenTimes token_time_metadata(const std::vector<sim::ShutterSpec>& input_shutters,
                               const sim::ShutterSpec& target_shutter, int height, int width, int segments,
                               int levels, int frequencies, DType dtype = DType::f64);

}  // namespace nire
