#pragma once

#include <string>
#include <vector>

#include "nire/shutter.hpp"
#include "nire/tensor.hpp"

namespace nire::sim {

/// Exposed image with values in [0, 1], stored planar (channel, row, column).
struct Frame {
  int width = 0;
  int height = 0;
  int channels = 1;
  std::vector<double> pixels;
  ShutterSpec shutter;

  Frame() = default;
  Frame(int w, int h, int c, ShutterSpec s = {})
      : width(w), height(h), channels(c), pixels(static_cast<std::size_t>(w) * h * c, 0.0), shutter(std::move(s)) {}

  std::size_t index(int c, int y, int x) const {
    return (static_cast<std::size_t>(c) * height + static_cast<std::size_t>(y)) * width + static_cast<std::size_t>(x);
  }
  double& at(int c, int y, int x) { return pixels[index(c, y, x)]; }
  double at(int c, int y, int x) const { return pixels[index(c, y, x)]; }

  bool operator==(const Frame&) const = default;
};

/// [C, H, W] tensor view of a frame.
Tensor frame_to_tensor(const Frame& frame, DType dtype = DType::f32);
/// Accepts [C, H, W] or [1, C, H, W]; values are clamped to [0, 1].
Frame tensor_to_frame(const Tensor& t, ShutterSpec shutter = {});

/// Binary PGM (1 channel) or PPM (3 channels), 8 or 16 bits per sample.
void write_pnm(const std::string& path, const Frame& frame, int bits = 8);
std::string encode_pnm(const Frame& frame, int bits = 8);
Frame read_pnm(const std::string& path);
Frame decode_pnm(const std::string& bytes);

}  // namespace nire::sim
