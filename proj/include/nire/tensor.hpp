#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "nire/error.hpp"

namespace nire {

enum class DType : std::uint8_t { f32 = 0, f64 = 1 };

using Shape = std::vector<std::int64_t>;
using Buffer = std::variant<std::vector<float>, std::vector<double>>;

std::int64_t numel(const Shape& shape);
std::string to_string(const Shape& shape);
const char* to_string(DType dtype);

template <class T>
constexpr DType dtype_of() {
  if constexpr (std::is_same_v<T, float>) {
    return DType::f32;
  } else {
    static_assert(std::is_same_v<T, double>, "only float and double tensors");
    return DType::f64;
  }
}

/// Calls `fn.template operator()<T>()` with T matching the runtime dtype.
template <class Fn>
decltype(auto) dispatch(DType dtype, Fn&& fn) {
  if (dtype == DType::f32) return fn.template operator()<float>();
  return fn.template operator()<double>();
}

Buffer make_buffer(DType dtype, std::size_t n, double fill = 0.0);

struct TensorImpl;

/// One recorded operation. `backward` adds the vector-Jacobian product of the
/// op into `grads[i]` for every input whose slot is non-null.
struct GradNode {
  using BackwardFn = std::function<void(const TensorImpl& out, const Buffer& grad_out,
                                        std::span<Buffer* const> grads)>;
  const char* name = "";
  std::vector<std::shared_ptr<TensorImpl>> inputs;
  BackwardFn backward;
};

struct TensorImpl {
  Shape shape;
  DType dtype = DType::f32;
  Buffer data;
  bool requires_grad = false;
  std::optional<Buffer> grad;
  std::shared_ptr<GradNode> node;
};

/// Shared handle to a dense row-major array. Copies of a Tensor alias the same
/// storage; ops always produce fresh storage.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::shared_ptr<TensorImpl> impl) : impl_(std::move(impl)) {}

  static Tensor zeros(const Shape& shape, DType dtype = DType::f32);
  static Tensor ones(const Shape& shape, DType dtype = DType::f32);
  static Tensor full(const Shape& shape, double value, DType dtype = DType::f32);
  static Tensor scalar(double value, DType dtype = DType::f32);
  static Tensor from_values(const Shape& shape, std::span<const double> values,
                            DType dtype = DType::f32);
  static Tensor from_values(const Shape& shape, std::initializer_list<double> values,
                            DType dtype = DType::f32);
  static Tensor from_buffer(const Shape& shape, Buffer data);
  static Tensor randn(const Shape& shape, std::mt19937_64& rng, double stddev = 1.0,
                      DType dtype = DType::f32);
  static Tensor uniform(const Shape& shape, std::mt19937_64& rng, double lo, double hi,
                        DType dtype = DType::f32);

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const { return impl().shape; }
  std::int64_t dim(int axis) const;
  int rank() const { return static_cast<int>(impl().shape.size()); }
  std::int64_t numel() const { return nire::numel(impl().shape); }
  DType dtype() const { return impl().dtype; }

  bool requires_grad() const { return impl().requires_grad; }
  /// Only leaves may toggle gradient tracking.
  Tensor& set_requires_grad(bool flag);
  bool is_leaf() const { return impl().node == nullptr; }

  template <class T>
  std::span<const T> data() const {
    return std::get<std::vector<T>>(impl().data);
  }
  /// Raw write access. Callers must not mutate tensors referenced by a live graph.
  template <class T>
  std::span<T> mutable_data() {
    return std::get<std::vector<T>>(impl().data);
  }
  const Buffer& buffer() const { return impl().data; }

  bool has_grad() const { return impl().grad.has_value(); }
  /// Gradient as a fresh non-tracking tensor; zeros when none accumulated yet.
  Tensor grad() const;
  template <class T>
  std::span<T> mutable_grad() {
    auto& g = impl().grad;
    if (!g) g = make_buffer(dtype(), static_cast<std::size_t>(numel()));
    return std::get<std::vector<T>>(*g);
  }
  void zero_grad();

  double item() const;
  double at(std::int64_t flat_index) const;
  std::vector<double> to_vector() const;
  Tensor astype(DType dtype) const;
  Tensor detach() const;
  Tensor clone() const;

  void backward() const;

  TensorImpl& impl() const;
  const std::shared_ptr<TensorImpl>& impl_ptr() const { return impl_; }

 private:
  std::shared_ptr<TensorImpl> impl_;
};

/// Reverse-mode sweep from a scalar loss; gradients accumulate into leaves.
void backward(const Tensor& loss);

bool grad_enabled();

/// Disables graph recording on this thread for the guard's lifetime.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool bit_equal(const Tensor& a, const Tensor& b);
double max_abs_diff(const Tensor& a, const Tensor& b);

}  // namespace nire
