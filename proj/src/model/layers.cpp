#include "nire/layers.hpp"

#include <cmath>

#include "nire/error.hpp"
#include "nire/ops.hpp"

namespace nire {

Tensor ParamSet::add(const std::string& name, Tensor t) {
  for (const auto& [n, _] : entries_) {
    if (n == name) throw ContractError("duplicate parameter name " + name);
  }
  t.set_requires_grad(true);
  entries_.emplace_back(name, t);
  return t;
}

Tensor ParamSet::find(const std::string& name) const {
  for (const auto& [n, t] : entries_) {
    if (n == name) return t;
  }
  throw IndexError("no parameter named " + name);
}

std::int64_t ParamSet::count() const {
  std::int64_t n = 0;
  for (const auto& [_, t] : entries_) n += t.numel();
  return n;
}

void ParamSet::zero_grad() {
  for (auto& [_, t] : entries_) t.zero_grad();
}

Tensor Conv::operator()(const Tensor& x) const {
  return conv2d(x, weight, 1, padding, bias.defined() ? std::optional<Tensor>(bias) : std::nullopt);
}

Tensor Linear::operator()(const Tensor& x) const { return add(matmul(x, weight), bias); }

Tensor Norm::operator()(const Tensor& x) const { return layernorm(x, -1, 1e-5, gamma, beta); }

Conv ParamFactory::conv(const std::string& name, int in, int out, int kernel, bool bias, double gain) {
  Conv c;
  c.padding = kernel / 2;
  const double stddev = std::sqrt(gain / (in * kernel * kernel));
  c.weight = normal(name + ".weight", {out, in, kernel, kernel}, stddev);
  if (bias) c.bias = constant(name + ".bias", {out}, 0.0);
  return c;
}

Conv ParamFactory::identity_conv(const std::string& name, int channels, int kernel, double noise) {
  std::normal_distribution<double> dist(0.0, noise);
  std::vector<double> w(static_cast<std::size_t>(channels) * channels * kernel * kernel);
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = dist(rng_);
  const int mid = kernel / 2;
  for (int c = 0; c < channels; ++c) w[((static_cast<std::size_t>(c) * channels + c) * kernel + mid) * kernel + mid] += 1.0;
  Conv out;
  out.padding = mid;
  out.weight = params_.add(name + ".weight", Tensor::from_values({channels, channels, kernel, kernel}, w, dtype_));
  out.bias = constant(name + ".bias", {channels}, 0.0);
  return out;
}

Linear ParamFactory::linear(const std::string& name, int in, int out, double gain) {
  Linear l;
  l.weight = normal(name + ".weight", {in, out}, std::sqrt(gain / in));
  l.bias = constant(name + ".bias", {out}, 0.0);
  return l;
}

Norm ParamFactory::norm(const std::string& name, int features) {
  return {constant(name + ".gamma", {features}, 1.0), constant(name + ".beta", {features}, 0.0)};
}

Tensor ParamFactory::normal(const std::string& name, const Shape& shape, double stddev) {
  return params_.add(name, Tensor::randn(shape, rng_, stddev, dtype_));
}

Tensor ParamFactory::constant(const std::string& name, const Shape& shape, double value) {
  return params_.add(name, Tensor::full(shape, value, dtype_));
}

}  // namespace nire
