#pragma once

#include <optional>
#include <vector>

#include "nire/tensor.hpp"

namespace nire {

// Broadcasting follows trailing-dimension alignment.
Shape broadcast_shapes(const Shape& a, const Shape& b);

enum class Binary { add, sub, mul, div };
enum class Unary { neg, sqrt, exp, log, tanh, sigmoid, relu, sin, cos };

Tensor elementwise(Binary kind, const Tensor& a, const Tensor& b);
Tensor elementwise(Unary kind, const Tensor& a);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);
Tensor neg(const Tensor& a);
Tensor sqrt(const Tensor& a);
Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);
Tensor tanh(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor relu(const Tensor& a);
Tensor sin(const Tensor& a);
Tensor cos(const Tensor& a);
Tensor square(const Tensor& a);
Tensor add_scalar(const Tensor& a, double s);
Tensor mul_scalar(const Tensor& a, double s);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator/(const Tensor& a, const Tensor& b) { return div(a, b); }
inline Tensor operator-(const Tensor& a) { return neg(a); }
inline Tensor operator+(const Tensor& a, double s) { return add_scalar(a, s); }
inline Tensor operator*(const Tensor& a, double s) { return mul_scalar(a, s); }
inline Tensor operator*(double s, const Tensor& a) { return mul_scalar(a, s); }

/// [..., m, k] @ [..., k, n] with broadcast batch dims.
Tensor matmul(const Tensor& a, const Tensor& b);

Tensor softmax(const Tensor& x, int axis = -1);

/// x: [N, C, H, W], w: [O, C, kh, kw], optional bias [O]. Zero padding.
Tensor conv2d(const Tensor& x, const Tensor& w, int stride = 1, int padding = 0,
              const std::optional<Tensor>& bias = std::nullopt);

/// Normalizes along `axis`; gamma/beta have shape [dim(axis)] when given.
Tensor layernorm(const Tensor& x, int axis = -1, double eps = 1e-5,
                 const std::optional<Tensor>& gamma = std::nullopt,
                 const std::optional<Tensor>& beta = std::nullopt);

// Structural ops.
Tensor reshape(const Tensor& x, Shape shape);
Tensor permute(const Tensor& x, const std::vector<int>& perm);
Tensor transpose(const Tensor& x, int axis0, int axis1);
Tensor concat(const std::vector<Tensor>& parts, int axis);
Tensor slice(const Tensor& x, int axis, std::int64_t start, std::int64_t end);
Tensor sum(const Tensor& x);
Tensor sum(const Tensor& x, int axis, bool keepdim = false);
Tensor mean(const Tensor& x);
Tensor mean(const Tensor& x, int axis, bool keepdim = false);
Tensor broadcast_to(const Tensor& x, const Shape& shape);
/// Doubles the two trailing dims, half-pixel centers (align_corners = false).
Tensor upsample_bilinear2x(const Tensor& x);
/// 2x2 mean pooling over the two trailing dims.
Tensor avg_pool2x(const Tensor& x);
/// Zero padding of the two trailing dims.
Tensor pad2d(const Tensor& x, int top, int bottom, int left, int right);
/// out.flat[i] = x.flat[index[i]], reshaped to `shape`.
Tensor gather(const Tensor& x, std::vector<std::int64_t> index, Shape shape);

}  // namespace nire
