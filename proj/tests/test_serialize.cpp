#include <random>
#include <sstream>

#include "doctest.h"
#include "nire/serialize.hpp"

using namespace nire;

namespace {

std::string bytes_of(const Tensor& t) {
  std::ostringstream os;
  write_tensor(os, t);
  return os.str();
}

}  // namespace

TEST_CASE("NRXT header layout") {
  auto t = Tensor::from_values({2, 3}, {1, 2, 3, 4, 5, 6}, DType::f32);
  const std::string b = bytes_of(t);
  REQUIRE(b.size() == 4 + 1 + 1 + 2 + 2 * 8 + 6 * 4);
  CHECK(b.substr(0, 4) == "NRXT");
  CHECK(static_cast<unsigned char>(b[4]) == 1);
  CHECK(static_cast<unsigned char>(b[5]) == 0);
  CHECK(static_cast<unsigned char>(b[6]) == 2);
  CHECK(static_cast<unsigned char>(b[7]) == 0);
  CHECK(static_cast<unsigned char>(b[8]) == 2);
  CHECK(static_cast<unsigned char>(b[16]) == 3);
}

TEST_CASE("NRXT round trip is byte identical") {
  std::mt19937_64 rng(1);
  for (DType dt : {DType::f32, DType::f64}) {
    for (const Shape& shape : {Shape{}, Shape{7}, Shape{2, 3, 4}, Shape{1, 0, 3}}) {
      auto t = Tensor::randn(shape, rng, 1.0, dt);
      const auto first = bytes_of(t);
      std::istringstream is(first);
      auto back = read_tensor(is);
      CHECK(bit_equal(back, t));
      CHECK(bytes_of(back) == first);
    }
  }
}

TEST_CASE("NRXT rejects malformed input") {
  std::istringstream bad_magic("NRXZ\x01\x00\x00\x00");
  CHECK_THROWS_AS(read_tensor(bad_magic), FormatError);
  auto full = bytes_of(Tensor::ones({4}, DType::f64));
  std::istringstream truncated(full.substr(0, full.size() - 3));
  CHECK_THROWS_AS(read_tensor(truncated), FormatError);
  std::string wrong_version = full;
  wrong_version[4] = 9;
  std::istringstream wv(wrong_version);
  CHECK_THROWS_AS(read_tensor(wv), FormatError);
}

TEST_CASE("NRCK round trip is byte identical") {
  std::mt19937_64 rng(2);
  NamedTensors entries = {{"encoder.conv1.weight", Tensor::randn({4, 1, 3, 3}, rng)},
                          {"film.level1.base", Tensor::randn({4}, rng, 1.0, DType::f64)},
                          {"meta.config", Tensor::from_values({3}, {1, 2, 3}, DType::f64)}};
  std::ostringstream os;
  write_checkpoint(os, entries);
  const std::string first = os.str();
  CHECK(first.substr(0, 4) == "NRCK");
  std::istringstream is(first);
  auto back = read_checkpoint(is);
  REQUIRE(back.size() == entries.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    CHECK(back[i].first == entries[i].first);
    CHECK(bit_equal(back[i].second, entries[i].second));
  }
  std::ostringstream again;
  write_checkpoint(again, back);
  CHECK(again.str() == first);
}
