#include "nire/frame.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <sstream>

#include "nire/error.hpp"
#include "nire/serialize.hpp"

namespace nire::sim {

Tensor frame_to_tensor(const Frame& frame, DType dtype) {
  return Tensor::from_values({frame.channels, frame.height, frame.width}, frame.pixels, dtype);
}

Frame tensor_to_frame(const Tensor& t, ShutterSpec shutter) {
  Shape s = t.shape();
  if (s.size() == 4 && s[0] == 1) s.erase(s.begin());
  if (s.size() != 3) throw ShapeError("tensor_to_frame expects [C, H, W], got " + to_string(t.shape()));
  Frame f(static_cast<int>(s[2]), static_cast<int>(s[1]), static_cast<int>(s[0]), std::move(shutter));
  f.pixels = t.to_vector();
  for (auto& v : f.pixels) v = std::clamp(v, 0.0, 1.0);
  return f;
}

std::string encode_pnm(const Frame& frame, int bits) {
  if (bits != 8 && bits != 16) throw ConfigError("PNM bit depth must be 8 or 16");
  if (frame.channels != 1 && frame.channels != 3) throw ShapeError("PNM export needs 1 or 3 channels");
  const int maxval = bits == 8 ? 255 : 65535;
  std::ostringstream os;
  os << (frame.channels == 1 ? "P5" : "P6") << '\n' << frame.width << ' ' << frame.height << '\n' << maxval << '\n';
  for (int y = 0; y < frame.height; ++y) {
    for (int x = 0; x < frame.width; ++x) {
      for (int c = 0; c < frame.channels; ++c) {
        const auto q = static_cast<unsigned>(std::lround(std::clamp(frame.at(c, y, x), 0.0, 1.0) * maxval));
        if (bits == 16) os.put(static_cast<char>(q >> 8));  // PNM samples are big-endian
        os.put(static_cast<char>(q & 0xFF));
      }
    }
  }
  return os.str();
}

void write_pnm(const std::string& path, const Frame& frame, int bits) {
  const std::string bytes = encode_pnm(frame, bits);
  io::write_file(path, std::vector<std::uint8_t>(bytes.begin(), bytes.end()));
}

Frame decode_pnm(const std::string& bytes) {
  std::size_t pos = 0;
  auto next_token = [&]() {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(static_cast<unsigned char>(bytes[pos]))) {
        ++pos;
      } else {
        break;
      }
    }
    const std::size_t start = pos;
    while (pos < bytes.size() && !std::isspace(static_cast<unsigned char>(bytes[pos]))) ++pos;
    if (start == pos) throw FormatError("truncated PNM header");
    return bytes.substr(start, pos - start);
  };
  const std::string magic = next_token();
  if (magic != "P5" && magic != "P6") throw FormatError("unsupported PNM magic '" + magic + "'");
  int w = 0, h = 0, maxval = 0;
  try {
    w = std::stoi(next_token());
    h = std::stoi(next_token());
    maxval = std::stoi(next_token());
  } catch (const std::logic_error&) {
    throw FormatError("malformed PNM header");
  }
  if (w <= 0 || h <= 0 || maxval <= 0 || maxval > 65535) throw FormatError("invalid PNM header values");
  ++pos;  // single whitespace byte before the raster
  const int channels = magic == "P5" ? 1 : 3;
  const int bps = maxval > 255 ? 2 : 1;
  const std::size_t need = static_cast<std::size_t>(w) * h * channels * bps;
  if (bytes.size() < pos + need) throw FormatError("truncated PNM raster");
  Frame f(w, h, channels);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < channels; ++c) {
        unsigned q = static_cast<unsigned char>(bytes[pos++]);
        if (bps == 2) q = (q << 8) | static_cast<unsigned char>(bytes[pos++]);
        f.at(c, y, x) = static_cast<double>(q) / maxval;
      }
    }
  }
  return f;
}

Frame read_pnm(const std::string& path) {
  const auto bytes = io::read_file(path);
  return decode_pnm(std::string(bytes.begin(), bytes.end()));
}

}  // namespace nire::sim
