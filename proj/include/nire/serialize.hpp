#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "nire/tensor.hpp"

namespace nire {

// Little-endian primitives shared by every binary format in the project.
namespace io {

void write_u8(std::ostream& os, std::uint8_t v);
void write_u16(std::ostream& os, std::uint16_t v);
void write_u32(std::ostream& os, std::uint32_t v);
void write_u64(std::ostream& os, std::uint64_t v);
void write_i8(std::ostream& os, std::int8_t v);
void write_f32(std::ostream& os, float v);
void write_f64(std::ostream& os, double v);

std::uint8_t read_u8(std::istream& is);
std::uint16_t read_u16(std::istream& is);
std::uint32_t read_u32(std::istream& is);
std::uint64_t read_u64(std::istream& is);
std::int8_t read_i8(std::istream& is);
float read_f32(std::istream& is);
double read_f64(std::istream& is);

void expect_magic(std::istream& is, const char (&magic)[5], const char* what);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes);

}  // namespace io

/// "NRXT" tensor blob: magic, u8 version (1), u8 dtype (0 = f32, 1 = f64),
/// u16 rank, rank x u64 dims, row-major payload.
void write_tensor(std::ostream& os, const Tensor& t);
Tensor read_tensor(std::istream& is);
void save_tensor(const std::filesystem::path& path, const Tensor& t);
Tensor load_tensor(const std::filesystem::path& path);

using NamedTensors = std::vector<std::pair<std::string, Tensor>>;

/// "NRCK" checkpoint: magic, u8 version (1), u32 count, then per entry
/// u16 name length, UTF-8 name, NRXT blob.
void write_checkpoint(std::ostream& os, const NamedTensors& entries);
NamedTensors read_checkpoint(std::istream& is);
void save_checkpoint(const std::filesystem::path& path, const NamedTensors& entries);
NamedTensors load_checkpoint(const std::filesystem::path& path);

}  // namespace nire
