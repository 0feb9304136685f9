#pragma once

// Internal helpers shared by the op implementations.

#include <algorithm>
#include <span>
#include <vector>

#include "nire/tensor.hpp"

namespace nire::detail {

template <class T>
std::vector<T>& vec(Buffer& b) {
  return std::get<std::vector<T>>(b);
}

template <class T>
const std::vector<T>& vec(const Buffer& b) {
  return std::get<std::vector<T>>(b);
}

template <class T>
const std::vector<T>& vec(const Tensor& t) {
  return std::get<std::vector<T>>(t.impl().data);
}

template <class T>
const std::vector<T>& vec(const TensorImpl& t) {
  return std::get<std::vector<T>>(t.data);
}

inline void require_same_dtype(const Tensor& a, const Tensor& b, const char* op) {
  if (a.dtype() != b.dtype()) {
    throw ContractError(std::string(op) + ": mixed dtypes " + to_string(a.dtype()) + " and " +
                        to_string(b.dtype()));
  }
}

inline int normalize_axis(int axis, int rank, const char* op) {
  if (axis < 0) axis += rank;
  if (axis < 0 || axis >= rank) {
    throw IndexError(std::string(op) + ": axis out of range for rank " + std::to_string(rank));
  }
  return axis;
}

/// Wraps a freshly computed buffer as the op result and records the backward
/// rule when any input participates in autodiff.
inline Tensor make_result(const char* name, Shape shape, Buffer data,
                          std::vector<Tensor> inputs, GradNode::BackwardFn backward) {
  Tensor out = Tensor::from_buffer(shape, std::move(data));
  if (!grad_enabled()) return out;
  bool any = false;
  for (const auto& in : inputs) any = any || in.requires_grad();
  if (!any) return out;
  auto node = std::make_shared<GradNode>();
  node->name = name;
  node->inputs.reserve(inputs.size());
  for (auto& in : inputs) node->inputs.push_back(in.impl_ptr());
  node->backward = std::move(backward);
  out.impl().requires_grad = true;
  out.impl().node = std::move(node);
  return out;
}

/// Splits a shape around `axis` into (outer, extent, inner) for strided loops.
struct AxisSplit {
  std::int64_t outer = 1;
  std::int64_t extent = 1;
  std::int64_t inner = 1;
};

inline AxisSplit split_axis(const Shape& shape, int axis) {
  AxisSplit s;
  for (int i = 0; i < axis; ++i) s.outer *= shape[static_cast<std::size_t>(i)];
  s.extent = shape[static_cast<std::size_t>(axis)];
  for (std::size_t i = static_cast<std::size_t>(axis) + 1; i < shape.size(); ++i) s.inner *= shape[i];
  return s;
}

}  // namespace nire::detail
