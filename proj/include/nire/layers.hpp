#pragma once

#include <cstdint>
#include <random>
#include <string>

#include "nire/serialize.hpp"
#include "nire/tensor.hpp"

namespace nire {

/// Ordered, named collection of trainable leaves.
class ParamSet {
 public:
  /// Registers `t` under `name` and marks it as requiring grad.
  Tensor add(const std::string& name, Tensor t);
  const NamedTensors& entries() const { return entries_; }
  Tensor find(const std::string& name) const;
  std::int64_t count() const;
  void zero_grad();

 private:
  NamedTensors entries_;
};

struct Conv {
  Tensor weight;  // [out, in, k, k]
  Tensor bias;    // [out], may be undefined
  int padding = 0;
  Tensor operator()(const Tensor& x) const;
};

struct Linear {
  Tensor weight;  // [in, out]
  Tensor bias;    // [out]
  Tensor operator()(const Tensor& x) const;
};

struct Norm {
  Tensor gamma;
  Tensor beta;
  Tensor operator()(const Tensor& x) const;
};

/// Fills layers with seeded random weights and records them in a ParamSet.
class ParamFactory {
 public:
  ParamFactory(ParamSet& params, std::uint64_t seed, DType dtype) : params_(params), rng_(seed), dtype_(dtype) {}

  /// He-normal conv with zero bias. kernel must be odd; padding keeps size.
  Conv conv(const std::string& name, int in, int out, int kernel, bool bias = true, double gain = 2.0);
  /// Delta kernel plus small noise: close to the identity map at init.
  Conv identity_conv(const std::string& name, int channels, int kernel, double noise);
  Linear linear(const std::string& name, int in, int out, double gain = 1.0);
  Norm norm(const std::string& name, int features);
  Tensor normal(const std::string& name, const Shape& shape, double stddev);
  Tensor constant(const std::string& name, const Shape& shape, double value);

  DType dtype() const { return dtype_; }
  std::mt19937_64& rng() { return rng_; }

 private:
  ParamSet& params_;
  std::mt19937_64 rng_;
  DType dtype_;
};

}  // namespace nire
