#include "nire/serialize.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <iterator>
#include <ostream>

namespace nire {

namespace io {

namespace {

static_assert(std::endian::native == std::endian::little, "little-endian host assumed");

template <class T>
void put(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw FormatError("unexpected end of stream");
  return v;
}

}  // namespace

void write_u8(std::ostream& os, std::uint8_t v) { put(os, v); }
void write_u16(std::ostream& os, std::uint16_t v) { put(os, v); }
void write_u32(std::ostream& os, std::uint32_t v) { put(os, v); }
void write_u64(std::ostream& os, std::uint64_t v) { put(os, v); }
void write_i8(std::ostream& os, std::int8_t v) { put(os, v); }
void write_f32(std::ostream& os, float v) { put(os, v); }
void write_f64(std::ostream& os, double v) { put(os, v); }

std::uint8_t read_u8(std::istream& is) { return get<std::uint8_t>(is); }
std::uint16_t read_u16(std::istream& is) { return get<std::uint16_t>(is); }
std::uint32_t read_u32(std::istream& is) { return get<std::uint32_t>(is); }
std::uint64_t read_u64(std::istream& is) { return get<std::uint64_t>(is); }
std::int8_t read_i8(std::istream& is) { return get<std::int8_t>(is); }
float read_f32(std::istream& is) { return get<float>(is); }
double read_f64(std::istream& is) { return get<double>(is); }

void expect_magic(std::istream& is, const char (&magic)[5], const char* what) {
  char got[4] = {};
  is.read(got, 4);
  if (!is || std::memcmp(got, magic, 4) != 0) {
    throw FormatError(std::string("not a ") + what + " stream (bad magic)");
  }
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace io

namespace {

constexpr std::uint8_t kTensorVersion = 1;
constexpr std::uint8_t kCheckpointVersion = 1;

}  // namespace

void write_tensor(std::ostream& os, const Tensor& t) {
  if (t.rank() > 0xFFFF) throw FormatError("tensor rank too large for NRXT");
  os.write("NRXT", 4);
  io::write_u8(os, kTensorVersion);
  io::write_u8(os, static_cast<std::uint8_t>(t.dtype()));
  io::write_u16(os, static_cast<std::uint16_t>(t.rank()));
  for (auto d : t.shape()) io::write_u64(os, static_cast<std::uint64_t>(d));
  dispatch(t.dtype(), [&]<class T>() {
    auto d = t.data<T>();
    os.write(reinterpret_cast<const char*>(d.data()), static_cast<std::streamsize>(d.size_bytes()));
  });
  if (!os) throw FormatError("failed writing NRXT payload");
}

Tensor read_tensor(std::istream& is) {
  io::expect_magic(is, "NRXT", "NRXT tensor");
  const auto version = io::read_u8(is);
  if (version != kTensorVersion) throw FormatError("unsupported NRXT version " + std::to_string(version));
  const auto code = io::read_u8(is);
  if (code > 1) throw FormatError("unknown NRXT dtype code " + std::to_string(code));
  const auto dtype = static_cast<DType>(code);
  const auto rank = io::read_u16(is);
  Shape shape(rank);
  for (auto& d : shape) {
    const auto v = io::read_u64(is);
    if (v > (std::uint64_t{1} << 40)) throw FormatError("implausible NRXT extent");
    d = static_cast<std::int64_t>(v);
  }
  Tensor t = Tensor::zeros(shape, dtype);
  dispatch(dtype, [&]<class T>() {
    auto d = t.mutable_data<T>();
    is.read(reinterpret_cast<char*>(d.data()), static_cast<std::streamsize>(d.size_bytes()));
  });
  if (!is) throw FormatError("truncated NRXT payload");
  return t;
}

void save_tensor(const std::filesystem::path& path, const Tensor& t) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write " + path.string());
  write_tensor(out, t);
}

Tensor load_tensor(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  return read_tensor(in);
}

void write_checkpoint(std::ostream& os, const NamedTensors& entries) {
  os.write("NRCK", 4);
  io::write_u8(os, kCheckpointVersion);
  io::write_u32(os, static_cast<std::uint32_t>(entries.size()));
  for (const auto& [name, tensor] : entries) {
    if (name.size() > 0xFFFF) throw FormatError("checkpoint entry name too long");
    io::write_u16(os, static_cast<std::uint16_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_tensor(os, tensor);
  }
  if (!os) throw FormatError("failed writing NRCK stream");
}

NamedTensors read_checkpoint(std::istream& is) {
  io::expect_magic(is, "NRCK", "NRCK checkpoint");
  const auto version = io::read_u8(is);
  if (version != kCheckpointVersion) throw FormatError("unsupported NRCK version " + std::to_string(version));
  const auto count = io::read_u32(is);
  NamedTensors entries;
  entries.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto len = io::read_u16(is);
    std::string name(len, '\0');
    is.read(name.data(), len);
    if (!is) throw FormatError("truncated NRCK entry name");
    entries.emplace_back(std::move(name), read_tensor(is));
  }
  return entries;
}

void save_checkpoint(const std::filesystem::path& path, const NamedTensors& entries) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write " + path.string());
  write_checkpoint(out, entries);
}

NamedTensors load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  return read_checkpoint(in);
}

}  // namespace nire
