#include <Eigen/Core>
#include <cmath>
#include <memory>

#include "nire/ops.hpp"
#include "op_support.hpp"

namespace nire {

using detail::make_result;
using detail::vec;

namespace {

template <class T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class T>
using MapC = Eigen::Map<const RowMat<T>>;
template <class T>
using MapM = Eigen::Map<RowMat<T>>;

struct BatchPlan {
  Shape batch;
  std::vector<std::int64_t> a_offset;
  std::vector<std::int64_t> b_offset;
};

BatchPlan plan_batches(const Shape& a_batch, const Shape& b_batch, std::int64_t a_block,
                       std::int64_t b_block) {
  BatchPlan plan;
  plan.batch = broadcast_shapes(a_batch, b_batch);
  const std::int64_t count = numel(plan.batch);
  plan.a_offset.resize(static_cast<std::size_t>(count));
  plan.b_offset.resize(static_cast<std::size_t>(count));
  const std::size_t r = plan.batch.size();
  for (std::int64_t flat = 0; flat < count; ++flat) {
    std::int64_t rem = flat;
    std::int64_t ia = 0, ib = 0, sa = 1, sb = 1;
    for (std::size_t k = 0; k < r; ++k) {
      const std::size_t axis = r - 1 - k;
      const std::int64_t idx = rem % plan.batch[axis];
      rem /= plan.batch[axis];
      if (k < a_batch.size()) {
        const std::int64_t da = a_batch[a_batch.size() - 1 - k];
        if (da != 1) ia += idx * sa;
        sa *= da;
      }
      if (k < b_batch.size()) {
        const std::int64_t db = b_batch[b_batch.size() - 1 - k];
        if (db != 1) ib += idx * sb;
        sb *= db;
      }
    }
    plan.a_offset[static_cast<std::size_t>(flat)] = ia * a_block;
    plan.b_offset[static_cast<std::size_t>(flat)] = ib * b_block;
  }
  return plan;
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  detail::require_same_dtype(a, b, "matmul");
  if (a.rank() < 2 || b.rank() < 2) throw ShapeError("matmul needs rank >= 2 operands");
  const std::int64_t m = a.dim(-2), k = a.dim(-1), k2 = b.dim(-2), n = b.dim(-1);
  if (k != k2) {
    throw ShapeError("matmul inner dims differ: " + to_string(a.shape()) + " @ " +
                     to_string(b.shape()));
  }

  // A plain 2-D right operand folds all batch rows of `a` into one product.
  if (b.rank() == 2) {
    const std::int64_t rows = a.numel() / k;
    Shape out_shape = a.shape();
    out_shape.back() = n;
    return dispatch(a.dtype(), [&]<class T>() {
      std::vector<T> out(static_cast<std::size_t>(rows * n));
      MapM<T>(out.data(), rows, n).noalias() =
          MapC<T>(vec<T>(a).data(), rows, k) * MapC<T>(vec<T>(b).data(), k, n);
      auto backward = [a, b, rows, k, n](const TensorImpl&, const Buffer& gbuf,
                                         std::span<Buffer* const> grads) {
        MapC<T> G(vec<T>(gbuf).data(), rows, n);
        if (grads[0]) {
          MapM<T>(vec<T>(*grads[0]).data(), rows, k).noalias() +=
              G * MapC<T>(vec<T>(b).data(), k, n).transpose();
        }
        if (grads[1]) {
          MapM<T>(vec<T>(*grads[1]).data(), k, n).noalias() +=
              MapC<T>(vec<T>(a).data(), rows, k).transpose() * G;
        }
      };
      return make_result("matmul", out_shape, std::move(out), {a, b}, backward);
    });
  }

  const Shape a_batch(a.shape().begin(), a.shape().end() - 2);
  const Shape b_batch(b.shape().begin(), b.shape().end() - 2);
  auto plan = std::make_shared<BatchPlan>(plan_batches(a_batch, b_batch, m * k, k * n));
  Shape out_shape = plan->batch;
  out_shape.push_back(m);
  out_shape.push_back(n);
  return dispatch(a.dtype(), [&]<class T>() {
    const std::size_t count = plan->a_offset.size();
    std::vector<T> out(static_cast<std::size_t>(numel(out_shape)));
    const T* pa = vec<T>(a).data();
    const T* pb = vec<T>(b).data();
    for (std::size_t i = 0; i < count; ++i) {
      MapM<T>(out.data() + static_cast<std::int64_t>(i) * m * n, m, n).noalias() =
          MapC<T>(pa + plan->a_offset[i], m, k) * MapC<T>(pb + plan->b_offset[i], k, n);
    }
    auto backward = [a, b, plan, m, k, n](const TensorImpl&, const Buffer& gbuf,
                                          std::span<Buffer* const> grads) {
      const T* g = vec<T>(gbuf).data();
      const T* xa = vec<T>(a).data();
      const T* xb = vec<T>(b).data();
      for (std::size_t i = 0; i < plan->a_offset.size(); ++i) {
        MapC<T> G(g + static_cast<std::int64_t>(i) * m * n, m, n);
        if (grads[0]) {
          MapM<T>(vec<T>(*grads[0]).data() + plan->a_offset[i], m, k).noalias() +=
              G * MapC<T>(xb + plan->b_offset[i], k, n).transpose();
        }
        if (grads[1]) {
          MapM<T>(vec<T>(*grads[1]).data() + plan->b_offset[i], k, n).noalias() +=
              MapC<T>(xa + plan->a_offset[i], m, k).transpose() * G;
        }
      }
    };
    return make_result("matmul", out_shape, std::move(out), {a, b}, backward);
  });
}

Tensor softmax(const Tensor& x, int axis) {
  axis = detail::normalize_axis(axis, x.rank(), "softmax");
  const auto s = detail::split_axis(x.shape(), axis);
  return dispatch(x.dtype(), [&]<class T>() {
    const auto& in = vec<T>(x);
    std::vector<T> y(in.size());
    for (std::int64_t o = 0; o < s.outer; ++o) {
      for (std::int64_t i = 0; i < s.inner; ++i) {
        const std::int64_t base = o * s.extent * s.inner + i;
        T mx = in[static_cast<std::size_t>(base)];
        for (std::int64_t j = 1; j < s.extent; ++j) mx = std::max(mx, in[static_cast<std::size_t>(base + j * s.inner)]);
        T total = 0;
        for (std::int64_t j = 0; j < s.extent; ++j) {
          const auto p = static_cast<std::size_t>(base + j * s.inner);
          y[p] = std::exp(in[p] - mx);
          total += y[p];
        }
        for (std::int64_t j = 0; j < s.extent; ++j) y[static_cast<std::size_t>(base + j * s.inner)] /= total;
      }
    }
    auto backward = [s](const TensorImpl& out, const Buffer& gbuf, std::span<Buffer* const> grads) {
      const auto& g = vec<T>(gbuf);
      const auto& yv = vec<T>(out);
      auto& gx = vec<T>(*grads[0]);
      for (std::int64_t o = 0; o < s.outer; ++o) {
        for (std::int64_t i = 0; i < s.inner; ++i) {
          const std::int64_t base = o * s.extent * s.inner + i;
          T dot = 0;
          for (std::int64_t j = 0; j < s.extent; ++j) {
            const auto p = static_cast<std::size_t>(base + j * s.inner);
            dot += g[p] * yv[p];
          }
          for (std::int64_t j = 0; j < s.extent; ++j) {
            const auto p = static_cast<std::size_t>(base + j * s.inner);
            gx[p] += yv[p] * (g[p] - dot);
          }
        }
      }
    };
    return make_result("softmax", x.shape(), std::move(y), {x}, backward);
  });
}

namespace {

struct ConvGeometry {
  std::int64_t n, c, h, w, o, kh, kw, ho, wo;
  int stride, pad;
  std::int64_t col_rows() const { return c * kh * kw; }
  std::int64_t col_cols() const { return ho * wo; }
};

template <class T>
void im2col(const T* img, const ConvGeometry& g, T* cols) {
  const std::int64_t ncols = g.col_cols();
  for (std::int64_t ch = 0; ch < g.c; ++ch) {
    for (std::int64_t ki = 0; ki < g.kh; ++ki) {
      for (std::int64_t kj = 0; kj < g.kw; ++kj) {
        T* row = cols + ((ch * g.kh + ki) * g.kw + kj) * ncols;
        for (std::int64_t oy = 0; oy < g.ho; ++oy) {
          const std::int64_t iy = oy * g.stride - g.pad + ki;
          T* dst = row + oy * g.wo;
          if (iy < 0 || iy >= g.h) {
            std::fill(dst, dst + g.wo, T(0));
            continue;
          }
          const T* src = img + (ch * g.h + iy) * g.w;
          for (std::int64_t ox = 0; ox < g.wo; ++ox) {
            const std::int64_t ix = ox * g.stride - g.pad + kj;
            dst[ox] = (ix < 0 || ix >= g.w) ? T(0) : src[ix];
          }
        }
      }
    }
  }
}

template <class T>
void col2im_add(const T* cols, const ConvGeometry& g, T* img) {
  const std::int64_t ncols = g.col_cols();
  for (std::int64_t ch = 0; ch < g.c; ++ch) {
    for (std::int64_t ki = 0; ki < g.kh; ++ki) {
      for (std::int64_t kj = 0; kj < g.kw; ++kj) {
        const T* row = cols + ((ch * g.kh + ki) * g.kw + kj) * ncols;
        for (std::int64_t oy = 0; oy < g.ho; ++oy) {
          const std::int64_t iy = oy * g.stride - g.pad + ki;
          if (iy < 0 || iy >= g.h) continue;
          T* dst = img + (ch * g.h + iy) * g.w;
          const T* src = row + oy * g.wo;
          for (std::int64_t ox = 0; ox < g.wo; ++ox) {
            const std::int64_t ix = ox * g.stride - g.pad + kj;
            if (ix >= 0 && ix < g.w) dst[ix] += src[ox];
          }
        }
      }
    }
  }
}

}  // namespace

Tensor conv2d(const Tensor& x, const Tensor& w, int stride, int padding,
              const std::optional<Tensor>& bias) {
  detail::require_same_dtype(x, w, "conv2d");
  if (x.rank() != 4 || w.rank() != 4) throw ShapeError("conv2d expects [N,C,H,W] and [O,C,kh,kw]");
  if (stride < 1 || padding < 0) throw ShapeError("conv2d: invalid stride/padding");
  ConvGeometry g{x.dim(0), x.dim(1), x.dim(2), x.dim(3), w.dim(0), w.dim(2), w.dim(3), 0, 0,
                 stride, padding};
  if (w.dim(1) != g.c) throw ShapeError("conv2d: channel mismatch " + to_string(x.shape()) + " vs " + to_string(w.shape()));
  if (g.kh % 2 == 0 || g.kw % 2 == 0) throw ShapeError("conv2d: kernel extents must be odd");
  const std::int64_t span_h = g.h + 2 * padding - g.kh;
  const std::int64_t span_w = g.w + 2 * padding - g.kw;
  if (span_h < 0 || span_w < 0 || span_h % stride != 0 || span_w % stride != 0) {
    throw ShapeError("conv2d: output size not integral for input " + to_string(x.shape()) +
                     ", kernel " + to_string(w.shape()) + ", stride " + std::to_string(stride));
  }
  g.ho = span_h / stride + 1;
  g.wo = span_w / stride + 1;
  if (bias) {
    detail::require_same_dtype(x, *bias, "conv2d");
    if (bias->numel() != g.o) throw ShapeError("conv2d: bias must have O entries");
  }

  return dispatch(x.dtype(), [&]<class T>() {
    const std::int64_t rows = g.col_rows(), cols_n = g.col_cols();
    const bool keep_cols = grad_enabled() && (x.requires_grad() || w.requires_grad() ||
                                              (bias && bias->requires_grad()));
    auto cols = std::make_shared<std::vector<T>>(static_cast<std::size_t>(
        (keep_cols ? g.n : 1) * rows * cols_n));
    std::vector<T> out(static_cast<std::size_t>(g.n * g.o * cols_n));
    const T* px = vec<T>(x).data();
    MapC<T> W(vec<T>(w).data(), g.o, rows);
    for (std::int64_t b = 0; b < g.n; ++b) {
      T* col = cols->data() + (keep_cols ? b * rows * cols_n : 0);
      im2col(px + b * g.c * g.h * g.w, g, col);
      MapM<T> Y(out.data() + b * g.o * cols_n, g.o, cols_n);
      Y.noalias() = W * MapC<T>(col, rows, cols_n);
      if (bias) {
        const auto& bv = vec<T>(*bias);
        for (std::int64_t oc = 0; oc < g.o; ++oc) Y.row(oc).array() += bv[static_cast<std::size_t>(oc)];
      }
    }
    std::vector<Tensor> inputs{x, w};
    if (bias) inputs.push_back(*bias);
    if (!keep_cols) cols.reset();
    auto backward = [x, w, g, cols](const TensorImpl&, const Buffer& gbuf,
                                    std::span<Buffer* const> grads) {
      const std::int64_t rows = g.col_rows(), cols_n = g.col_cols();
      const T* gy = vec<T>(gbuf).data();
      MapC<T> W(vec<T>(w).data(), g.o, rows);
      std::vector<T> gcol;
      if (grads[0]) gcol.resize(static_cast<std::size_t>(rows * cols_n));
      for (std::int64_t b = 0; b < g.n; ++b) {
        MapC<T> G(gy + b * g.o * cols_n, g.o, cols_n);
        MapC<T> C(cols->data() + b * rows * cols_n, rows, cols_n);
        if (grads[1]) MapM<T>(vec<T>(*grads[1]).data(), g.o, rows).noalias() += G * C.transpose();
        if (grads[0]) {
          MapM<T>(gcol.data(), rows, cols_n).noalias() = W.transpose() * G;
          col2im_add(gcol.data(), g, vec<T>(*grads[0]).data() + b * g.c * g.h * g.w);
        }
        if (grads.size() > 2 && grads[2]) {
          auto& gb = vec<T>(*grads[2]);
          // Plain loop: Eigen's vectorized sum regroups terms by buffer alignment.
          for (std::int64_t oc = 0; oc < g.o; ++oc) {
            const T* row = gy + b * g.o * cols_n + oc * cols_n;
            T acc = 0;
            for (std::int64_t i = 0; i < cols_n; ++i) acc += row[i];
            gb[static_cast<std::size_t>(oc)] += acc;
          }
        }
      }
    };
    return make_result("conv2d", {g.n, g.o, g.ho, g.wo}, std::move(out), std::move(inputs),
                       backward);
  });
}

Tensor layernorm(const Tensor& x, int axis, double eps, const std::optional<Tensor>& gamma,
                 const std::optional<Tensor>& beta) {
  if (!(eps > 0)) throw ContractError("layernorm: eps must be positive");
  axis = detail::normalize_axis(axis, x.rank(), "layernorm");
  const auto s = detail::split_axis(x.shape(), axis);
  if (gamma && (gamma->numel() != s.extent || gamma->dtype() != x.dtype())) {
    throw ShapeError("layernorm: gamma must have shape [" + std::to_string(s.extent) + "]");
  }
  if (beta && (beta->numel() != s.extent || beta->dtype() != x.dtype())) {
    throw ShapeError("layernorm: beta must have shape [" + std::to_string(s.extent) + "]");
  }
  return dispatch(x.dtype(), [&]<class T>() {
    const auto& in = vec<T>(x);
    const std::size_t n = in.size();
    auto xhat = std::make_shared<std::vector<T>>(n);
    auto inv_std = std::make_shared<std::vector<T>>(static_cast<std::size_t>(s.outer * s.inner));
    std::vector<T> y(n);
    const T* gm = gamma ? vec<T>(*gamma).data() : nullptr;
    const T* bt = beta ? vec<T>(*beta).data() : nullptr;
    for (std::int64_t o = 0; o < s.outer; ++o) {
      for (std::int64_t i = 0; i < s.inner; ++i) {
        const std::int64_t base = o * s.extent * s.inner + i;
        T mu = 0;
        for (std::int64_t j = 0; j < s.extent; ++j) mu += in[static_cast<std::size_t>(base + j * s.inner)];
        mu /= static_cast<T>(s.extent);
        T var = 0;
        for (std::int64_t j = 0; j < s.extent; ++j) {
          const T d = in[static_cast<std::size_t>(base + j * s.inner)] - mu;
          var += d * d;
        }
        var /= static_cast<T>(s.extent);
        const T is = T(1) / std::sqrt(var + static_cast<T>(eps));
        (*inv_std)[static_cast<std::size_t>(o * s.inner + i)] = is;
        for (std::int64_t j = 0; j < s.extent; ++j) {
          const auto p = static_cast<std::size_t>(base + j * s.inner);
          const T xh = (in[p] - mu) * is;
          (*xhat)[p] = xh;
          y[p] = xh * (gm ? gm[j] : T(1)) + (bt ? bt[j] : T(0));
        }
      }
    }
    std::vector<Tensor> inputs{x};
    int gi = -1, bi = -1;
    if (gamma) {
      gi = static_cast<int>(inputs.size());
      inputs.push_back(*gamma);
    }
    if (beta) {
      bi = static_cast<int>(inputs.size());
      inputs.push_back(*beta);
    }
    std::optional<Tensor> gamma_copy = gamma;
    auto backward = [s, xhat, inv_std, gamma_copy, gi, bi](
                        const TensorImpl&, const Buffer& gbuf, std::span<Buffer* const> grads) {
      const auto& g = vec<T>(gbuf);
      const T* gm = gamma_copy ? vec<T>(*gamma_copy).data() : nullptr;
      T* gx = grads[0] ? vec<T>(*grads[0]).data() : nullptr;
      T* gg = gi >= 0 && grads[static_cast<std::size_t>(gi)] ? vec<T>(*grads[static_cast<std::size_t>(gi)]).data() : nullptr;
      T* gb = bi >= 0 && grads[static_cast<std::size_t>(bi)] ? vec<T>(*grads[static_cast<std::size_t>(bi)]).data() : nullptr;
      const T inv_n = T(1) / static_cast<T>(s.extent);
      for (std::int64_t o = 0; o < s.outer; ++o) {
        for (std::int64_t i = 0; i < s.inner; ++i) {
          const std::int64_t base = o * s.extent * s.inner + i;
          T mean_g = 0, mean_gx = 0;
          for (std::int64_t j = 0; j < s.extent; ++j) {
            const auto p = static_cast<std::size_t>(base + j * s.inner);
            const T gh = g[p] * (gm ? gm[j] : T(1));
            mean_g += gh;
            mean_gx += gh * (*xhat)[p];
            if (gg) gg[j] += g[p] * (*xhat)[p];
            if (gb) gb[j] += g[p];
          }
          if (!gx) continue;
          mean_g *= inv_n;
          mean_gx *= inv_n;
          const T is = (*inv_std)[static_cast<std::size_t>(o * s.inner + i)];
          for (std::int64_t j = 0; j < s.extent; ++j) {
            const auto p = static_cast<std::size_t>(base + j * s.inner);
            const T gh = g[p] * (gm ? gm[j] : T(1));
            gx[p] += is * (gh - mean_g - (*xhat)[p] * mean_gx);
          }
        }
      }
    };
    return make_result("layernorm", x.shape(), std::move(y), std::move(inputs), backward);
  });
}

}  // namespace nire
