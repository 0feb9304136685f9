#include <cmath>

#include "nire/ops.hpp"
#include "op_support.hpp"

namespace nire {

using detail::make_result;
using detail::vec;

Shape broadcast_shapes(const Shape& a, const Shape& b) {
  const std::size_t r = std::max(a.size(), b.size());
  Shape out(r);
  for (std::size_t i = 0; i < r; ++i) {
    const std::int64_t da = i < r - a.size() ? 1 : a[i - (r - a.size())];
    const std::int64_t db = i < r - b.size() ? 1 : b[i - (r - b.size())];
    if (da != db && da != 1 && db != 1) {
      throw BroadcastError("cannot broadcast " + to_string(a) + " with " + to_string(b));
    }
    out[i] = da == 1 ? db : da;
  }
  return out;
}

namespace {

/// Element strides of `in` laid out against `out` (0 on broadcast axes).
std::vector<std::int64_t> broadcast_strides(const Shape& in, const Shape& out) {
  std::vector<std::int64_t> strides(out.size(), 0);
  std::int64_t s = 1;
  for (std::size_t k = 0; k < in.size(); ++k) {
    const std::size_t i = in.size() - 1 - k;
    const std::size_t o = out.size() - 1 - k;
    strides[o] = in[i] == 1 ? 0 : s;
    s *= in[i];
  }
  return strides;
}

/// Visits (out, a, b) flat offsets for every output element.
template <class Fn>
void for_each_broadcast(const Shape& out, const Shape& sa, const Shape& sb, Fn&& fn) {
  const std::int64_t total = numel(out);
  if (total == 0) return;
  if (sa == out && sb == out) {
    for (std::int64_t i = 0; i < total; ++i) fn(i, i, i);
    return;
  }
  const auto st_a = broadcast_strides(sa, out);
  const auto st_b = broadcast_strides(sb, out);
  const std::size_t r = out.size();
  if (r == 0) {
    fn(0, 0, 0);
    return;
  }
  const std::int64_t last = out[r - 1];
  const std::int64_t la = st_a[r - 1];
  const std::int64_t lb = st_b[r - 1];
  std::vector<std::int64_t> idx(r, 0);
  std::int64_t oa = 0;
  std::int64_t ob = 0;
  for (std::int64_t row = 0; row < total / last; ++row) {
    const std::int64_t base = row * last;
    for (std::int64_t j = 0; j < last; ++j) fn(base + j, oa + j * la, ob + j * lb);
    // advance the multi-index over all but the last axis
    for (int k = static_cast<int>(r) - 2; k >= 0; --k) {
      const auto uk = static_cast<std::size_t>(k);
      ++idx[uk];
      oa += st_a[uk];
      ob += st_b[uk];
      if (idx[uk] < out[uk]) break;
      oa -= st_a[uk] * out[uk];
      ob -= st_b[uk] * out[uk];
      idx[uk] = 0;
    }
  }
}

const char* binary_name(Binary kind) {
  switch (kind) {
    case Binary::add: return "add";
    case Binary::sub: return "sub";
    case Binary::mul: return "mul";
    case Binary::div: return "div";
  }
  return "?";
}

}  // namespace

Tensor elementwise(Binary kind, const Tensor& a, const Tensor& b) {
  detail::require_same_dtype(a, b, binary_name(kind));
  const Shape out_shape = broadcast_shapes(a.shape(), b.shape());
  const Shape sa = a.shape();
  const Shape sb = b.shape();
  return dispatch(a.dtype(), [&]<class T>() {
    const auto& x = vec<T>(a);
    const auto& y = vec<T>(b);
    if (kind == Binary::div) {
      for (T v : y) {
        if (v == T(0)) throw DomainError("div: division by zero");
      }
    }
    std::vector<T> out(static_cast<std::size_t>(numel(out_shape)));
    switch (kind) {
      case Binary::add:
        for_each_broadcast(out_shape, sa, sb, [&](auto o, auto i, auto j) { out[o] = x[i] + y[j]; });
        break;
      case Binary::sub:
        for_each_broadcast(out_shape, sa, sb, [&](auto o, auto i, auto j) { out[o] = x[i] - y[j]; });
        break;
      case Binary::mul:
        for_each_broadcast(out_shape, sa, sb, [&](auto o, auto i, auto j) { out[o] = x[i] * y[j]; });
        break;
      case Binary::div:
        for_each_broadcast(out_shape, sa, sb, [&](auto o, auto i, auto j) { out[o] = x[i] / y[j]; });
        break;
    }
    auto backward = [kind, out_shape, sa, sb, a, b](const TensorImpl&, const Buffer& gbuf,
                                                    std::span<Buffer* const> grads) {
      const auto& g = vec<T>(gbuf);
      const auto& xv = vec<T>(a);
      const auto& yv = vec<T>(b);
      T* ga = grads[0] ? vec<T>(*grads[0]).data() : nullptr;
      T* gb = grads[1] ? vec<T>(*grads[1]).data() : nullptr;
      for_each_broadcast(out_shape, sa, sb, [&](auto o, auto i, auto j) {
        const T go = g[o];
        switch (kind) {
          case Binary::add:
            if (ga) ga[i] += go;
            if (gb) gb[j] += go;
            break;
          case Binary::sub:
            if (ga) ga[i] += go;
            if (gb) gb[j] -= go;
            break;
          case Binary::mul:
            if (ga) ga[i] += go * yv[j];
            if (gb) gb[j] += go * xv[i];
            break;
          case Binary::div:
            if (ga) ga[i] += go / yv[j];
            if (gb) gb[j] -= go * xv[i] / (yv[j] * yv[j]);
            break;
        }
      });
    };
    return make_result(binary_name(kind), out_shape, std::move(out), {a, b}, backward);
  });
}

Tensor elementwise(Unary kind, const Tensor& a) {
  return dispatch(a.dtype(), [&]<class T>() {
    const auto& x = vec<T>(a);
    std::vector<T> y(x.size());
    const char* name = "unary";
    switch (kind) {
      case Unary::neg:
        name = "neg";
        for (std::size_t i = 0; i < x.size(); ++i) y[i] = -x[i];
        break;
      case Unary::sqrt:
        name = "sqrt";
        for (std::size_t i = 0; i < x.size(); ++i) {
          if (x[i] < T(0)) throw DomainError("sqrt of a negative value");
          y[i] = std::sqrt(x[i]);
        }
        break;
      case Unary::exp:
        name = "exp";
        for (std::size_t i = 0; i < x.size(); ++i) y[i] = std::exp(x[i]);
        break;
      case Unary::log:
        name = "log";
        for (std::size_t i = 0; i < x.size(); ++i) {
          if (!(x[i] > T(0))) throw DomainError("log of a non-positive value");
          y[i] = std::log(x[i]);
        }
        break;
      case Unary::tanh:
        name = "tanh";
        for (std::size_t i = 0; i < x.size(); ++i) y[i] = std::tanh(x[i]);
        break;
      case Unary::sigmoid:
        name = "sigmoid";
        for (std::size_t i = 0; i < x.size(); ++i) {
          // stable for large |x|
          y[i] = x[i] >= T(0) ? T(1) / (T(1) + std::exp(-x[i]))
                              : std::exp(x[i]) / (T(1) + std::exp(x[i]));
        }
        break;
      case Unary::relu:
        name = "relu";
        for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] > T(0) ? x[i] : T(0);
        break;
      case Unary::sin:
        name = "sin";
        for (std::size_t i = 0; i < x.size(); ++i) y[i] = std::sin(x[i]);
        break;
      case Unary::cos:
        name = "cos";
        for (std::size_t i = 0; i < x.size(); ++i) y[i] = std::cos(x[i]);
        break;
    }
    auto backward = [kind, a](const TensorImpl& out, const Buffer& gbuf,
                              std::span<Buffer* const> grads) {
      auto& ga = vec<T>(*grads[0]);
      const auto& g = vec<T>(gbuf);
      const auto& xv = vec<T>(a);
      const auto& yv = vec<T>(out);
      const std::size_t n = g.size();
      switch (kind) {
        case Unary::neg:
          for (std::size_t i = 0; i < n; ++i) ga[i] -= g[i];
          break;
        case Unary::sqrt:
          for (std::size_t i = 0; i < n; ++i) ga[i] += g[i] * T(0.5) / yv[i];
          break;
        case Unary::exp:
          for (std::size_t i = 0; i < n; ++i) ga[i] += g[i] * yv[i];
          break;
        case Unary::log:
          for (std::size_t i = 0; i < n; ++i) ga[i] += g[i] / xv[i];
          break;
        case Unary::tanh:
          for (std::size_t i = 0; i < n; ++i) ga[i] += g[i] * (T(1) - yv[i] * yv[i]);
          break;
        case Unary::sigmoid:
          for (std::size_t i = 0; i < n; ++i) ga[i] += g[i] * yv[i] * (T(1) - yv[i]);
          break;
        case Unary::relu:
          for (std::size_t i = 0; i < n; ++i) {
            if (xv[i] > T(0)) ga[i] += g[i];
          }
          break;
        case Unary::sin:
          for (std::size_t i = 0; i < n; ++i) ga[i] += g[i] * std::cos(xv[i]);
          break;
        case Unary::cos:
          for (std::size_t i = 0; i < n; ++i) ga[i] -= g[i] * std::sin(xv[i]);
          break;
      }
    };
    return make_result(name, a.shape(), std::move(y), {a}, backward);
  });
}

Tensor add(const Tensor& a, const Tensor& b) { return elementwise(Binary::add, a, b); }
Tensor sub(const Tensor& a, const Tensor& b) { return elementwise(Binary::sub, a, b); }
Tensor mul(const Tensor& a, const Tensor& b) { return elementwise(Binary::mul, a, b); }
Tensor div(const Tensor& a, const Tensor& b) { return elementwise(Binary::div, a, b); }
Tensor neg(const Tensor& a) { return elementwise(Unary::neg, a); }
Tensor sqrt(const Tensor& a) { return elementwise(Unary::sqrt, a); }
Tensor exp(const Tensor& a) { return elementwise(Unary::exp, a); }
Tensor log(const Tensor& a) { return elementwise(Unary::log, a); }
Tensor tanh(const Tensor& a) { return elementwise(Unary::tanh, a); }
Tensor sigmoid(const Tensor& a) { return elementwise(Unary::sigmoid, a); }
Tensor relu(const Tensor& a) { return elementwise(Unary::relu, a); }
Tensor sin(const Tensor& a) { return elementwise(Unary::sin, a); }
Tensor cos(const Tensor& a) { return elementwise(Unary::cos, a); }

Tensor square(const Tensor& a) {
  return dispatch(a.dtype(), [&]<class T>() {
    const auto& x = vec<T>(a);
    std::vector<T> y(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] * x[i];
    auto backward = [a](const TensorImpl&, const Buffer& gbuf, std::span<Buffer* const> grads) {
      auto& ga = vec<T>(*grads[0]);
      const auto& g = vec<T>(gbuf);
      const auto& xv = vec<T>(a);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += T(2) * xv[i] * g[i];
    };
    return make_result("square", a.shape(), std::move(y), {a}, backward);
  });
}

Tensor add_scalar(const Tensor& a, double s) {
  return dispatch(a.dtype(), [&]<class T>() {
    const auto& x = vec<T>(a);
    const T c = static_cast<T>(s);
    std::vector<T> y(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] + c;
    auto backward = [](const TensorImpl&, const Buffer& gbuf, std::span<Buffer* const> grads) {
      auto& ga = vec<T>(*grads[0]);
      const auto& g = vec<T>(gbuf);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    };
    return make_result("add_scalar", a.shape(), std::move(y), {a}, backward);
  });
}

Tensor mul_scalar(const Tensor& a, double s) {
  return dispatch(a.dtype(), [&]<class T>() {
    const auto& x = vec<T>(a);
    const T c = static_cast<T>(s);
    std::vector<T> y(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] * c;
    auto backward = [c](const TensorImpl&, const Buffer& gbuf, std::span<Buffer* const> grads) {
      auto& ga = vec<T>(*grads[0]);
      const auto& g = vec<T>(gbuf);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * c;
    };
    return make_result("mul_scalar", a.shape(), std::move(y), {a}, backward);
  });
}

}  // namespace nire
