#include <cmath>
#include <numeric>

#include "nire/ops.hpp"
#include "op_support.hpp"

namespace nire {

using detail::make_result;
using detail::vec;

Tensor reshape(const Tensor& x, Shape shape) {
  std::int64_t known = 1;
  int infer = -1;
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (shape[i] == -1) {
      if (infer >= 0) throw ShapeError("reshape: more than one -1 extent");
      infer = static_cast<int>(i);
    } else {
      known *= shape[i];
    }
  }
  if (infer >= 0) {
    if (known == 0 || x.numel() % known != 0) throw ShapeError("reshape: cannot infer extent");
    shape[static_cast<std::size_t>(infer)] = x.numel() / known;
  }
  if (numel(shape) != x.numel()) {
    throw ShapeError("reshape: " + to_string(x.shape()) + " -> " + to_string(shape));
  }
  return dispatch(x.dtype(), [&]<class T>() {
    std::vector<T> out = vec<T>(x);
    auto backward = [](const TensorImpl&, const Buffer& gbuf, std::span<Buffer* const> grads) {
      auto& gx = vec<T>(*grads[0]);
      const auto& g = vec<T>(gbuf);
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
    };
    return make_result("reshape", shape, std::move(out), {x}, backward);
  });
}

namespace {

std::vector<std::int64_t> row_major_strides(const Shape& s) {
  std::vector<std::int64_t> st(s.size(), 1);
  for (int i = static_cast<int>(s.size()) - 2; i >= 0; --i) {
    st[static_cast<std::size_t>(i)] = st[static_cast<std::size_t>(i) + 1] * s[static_cast<std::size_t>(i) + 1];
  }
  return st;
}

/// For every output element of a permutation, the flat source offset.
std::vector<std::int64_t> permutation_sources(const Shape& in, const std::vector<int>& perm) {
  const std::size_t r = in.size();
  const auto in_st = row_major_strides(in);
  Shape out(r);
  std::vector<std::int64_t> src_st(r);
  for (std::size_t i = 0; i < r; ++i) {
    out[i] = in[static_cast<std::size_t>(perm[i])];
    src_st[i] = in_st[static_cast<std::size_t>(perm[i])];
  }
  const std::int64_t total = numel(out);
  std::vector<std::int64_t> src(static_cast<std::size_t>(total));
  std::vector<std::int64_t> idx(r, 0);
  std::int64_t off = 0;
  for (std::int64_t k = 0; k < total; ++k) {
    src[static_cast<std::size_t>(k)] = off;
    for (int a = static_cast<int>(r) - 1; a >= 0; --a) {
      const auto ua = static_cast<std::size_t>(a);
      ++idx[ua];
      off += src_st[ua];
      if (idx[ua] < out[ua]) break;
      off -= src_st[ua] * out[ua];
      idx[ua] = 0;
    }
  }
  return src;
}

}  // namespace

Tensor permute(const Tensor& x, const std::vector<int>& perm) {
  const int r = x.rank();
  if (static_cast<int>(perm.size()) != r) throw ShapeError("permute: wrong number of axes");
  std::vector<int> seen(static_cast<std::size_t>(r), 0);
  for (int p : perm) {
    if (p < 0 || p >= r || seen[static_cast<std::size_t>(p)]++) throw IndexError("permute: invalid permutation");
  }
  Shape out_shape(static_cast<std::size_t>(r));
  for (int i = 0; i < r; ++i) out_shape[static_cast<std::size_t>(i)] = x.dim(perm[static_cast<std::size_t>(i)]);
  auto src = std::make_shared<std::vector<std::int64_t>>(permutation_sources(x.shape(), perm));
  return dispatch(x.dtype(), [&]<class T>() {
    const auto& in = vec<T>(x);
    std::vector<T> out(in.size());
    for (std::size_t k = 0; k < out.size(); ++k) out[k] = in[static_cast<std::size_t>((*src)[k])];
    auto backward = [src](const TensorImpl&, const Buffer& gbuf, std::span<Buffer* const> grads) {
      auto& gx = vec<T>(*grads[0]);
      const auto& g = vec<T>(gbuf);
      for (std::size_t k = 0; k < g.size(); ++k) gx[static_cast<std::size_t>((*src)[k])] += g[k];
    };
    return make_result("permute", out_shape, std::move(out), {x}, backward);
  });
}

Tensor transpose(const Tensor& x, int axis0, int axis1) {
  axis0 = detail::normalize_axis(axis0, x.rank(), "transpose");
  axis1 = detail::normalize_axis(axis1, x.rank(), "transpose");
  std::vector<int> perm(static_cast<std::size_t>(x.rank()));
  std::iota(perm.begin(), perm.end(), 0);
  std::swap(perm[static_cast<std::size_t>(axis0)], perm[static_cast<std::size_t>(axis1)]);
  return permute(x, perm);
}

Tensor concat(const std::vector<Tensor>& parts, int axis) {
  if (parts.empty()) throw ShapeError("concat of zero tensors");
  if (parts.size() == 1) return parts.front();
  const Tensor& first = parts.front();
  axis = detail::normalize_axis(axis, first.rank(), "concat");
  Shape out_shape = first.shape();
  out_shape[static_cast<std::size_t>(axis)] = 0;
  for (const auto& p : parts) {
    detail::require_same_dtype(first, p, "concat");
    if (p.rank() != first.rank()) throw ShapeError("concat: rank mismatch");
    for (int i = 0; i < first.rank(); ++i) {
      if (i != axis && p.dim(i) != first.dim(i)) {
        throw ShapeError("concat: " + to_string(p.shape()) + " vs " + to_string(first.shape()));
      }
    }
    out_shape[static_cast<std::size_t>(axis)] += p.dim(axis);
  }
  const auto s = detail::split_axis(out_shape, axis);
  std::vector<std::int64_t> extents;
  for (const auto& p : parts) extents.push_back(p.dim(axis));
  return dispatch(first.dtype(), [&]<class T>() {
    std::vector<T> out(static_cast<std::size_t>(numel(out_shape)));
    std::int64_t offset = 0;
    for (std::size_t k = 0; k < parts.size(); ++k) {
      const auto& in = vec<T>(parts[k]);
      const std::int64_t chunk = extents[k] * s.inner;
      for (std::int64_t o = 0; o < s.outer; ++o) {
        std::copy_n(in.begin() + o * chunk, chunk, out.begin() + o * s.extent * s.inner + offset);
      }
      offset += chunk;
    }
    auto backward = [s, extents](const TensorImpl&, const Buffer& gbuf, std::span<Buffer* const> grads) {
      const auto& g = vec<T>(gbuf);
      std::int64_t offset = 0;
      for (std::size_t k = 0; k < extents.size(); ++k) {
        const std::int64_t chunk = extents[k] * s.inner;
        if (grads[k]) {
          auto& gk = vec<T>(*grads[k]);
          for (std::int64_t o = 0; o < s.outer; ++o) {
            const auto src = g.begin() + o * s.extent * s.inner + offset;
            auto dst = gk.begin() + o * chunk;
            for (std::int64_t i = 0; i < chunk; ++i) dst[i] += src[i];
          }
        }
        offset += chunk;
      }
    };
    return make_result("concat", out_shape, std::move(out), parts, backward);
  });
}

Tensor slice(const Tensor& x, int axis, std::int64_t start, std::int64_t end) {
  axis = detail::normalize_axis(axis, x.rank(), "slice");
  const std::int64_t extent = x.dim(axis);
  if (start < 0 || end > extent || start > end) {
    throw IndexError("slice [" + std::to_string(start) + ", " + std::to_string(end) +
                     ") out of range for extent " + std::to_string(extent));
  }
  const auto s = detail::split_axis(x.shape(), axis);
  Shape out_shape = x.shape();
  out_shape[static_cast<std::size_t>(axis)] = end - start;
  const std::int64_t chunk = (end - start) * s.inner;
  return dispatch(x.dtype(), [&]<class T>() {
    const auto& in = vec<T>(x);
    std::vector<T> out(static_cast<std::size_t>(s.outer * chunk));
    for (std::int64_t o = 0; o < s.outer; ++o) {
      std::copy_n(in.begin() + (o * s.extent + start) * s.inner, chunk, out.begin() + o * chunk);
    }
    auto backward = [s, start, chunk](const TensorImpl&, const Buffer& gbuf, std::span<Buffer* const> grads) {
      const auto& g = vec<T>(gbuf);
      auto& gx = vec<T>(*grads[0]);
      for (std::int64_t o = 0; o < s.outer; ++o) {
        auto dst = gx.begin() + (o * s.extent + start) * s.inner;
        auto src = g.begin() + o * chunk;
        for (std::int64_t i = 0; i < chunk; ++i) dst[i] += src[i];
      }
    };
    return make_result("slice", out_shape, std::move(out), {x}, backward);
  });
}

Tensor sum(const Tensor& x) {
  return dispatch(x.dtype(), [&]<class T>() {
    const auto& in = vec<T>(x);
    T total = 0;
    for (T v : in) total += v;
    auto backward = [](const TensorImpl&, const Buffer& gbuf, std::span<Buffer* const> grads) {
      const T g = vec<T>(gbuf)[0];
      for (auto& v : vec<T>(*grads[0])) v += g;
    };
    return make_result("sum", {}, std::vector<T>{total}, {x}, backward);
  });
}

Tensor sum(const Tensor& x, int axis, bool keepdim) {
  axis = detail::normalize_axis(axis, x.rank(), "sum");
  const auto s = detail::split_axis(x.shape(), axis);
  Shape out_shape = x.shape();
  if (keepdim) {
    out_shape[static_cast<std::size_t>(axis)] = 1;
  } else {
    out_shape.erase(out_shape.begin() + axis);
  }
  return dispatch(x.dtype(), [&]<class T>() {
    const auto& in = vec<T>(x);
    std::vector<T> out(static_cast<std::size_t>(s.outer * s.inner), T(0));
    for (std::int64_t o = 0; o < s.outer; ++o) {
      for (std::int64_t j = 0; j < s.extent; ++j) {
        const T* src = in.data() + (o * s.extent + j) * s.inner;
        T* dst = out.data() + o * s.inner;
        for (std::int64_t i = 0; i < s.inner; ++i) dst[i] += src[i];
      }
    }
    auto backward = [s](const TensorImpl&, const Buffer& gbuf, std::span<Buffer* const> grads) {
      const auto& g = vec<T>(gbuf);
      auto& gx = vec<T>(*grads[0]);
      for (std::int64_t o = 0; o < s.outer; ++o) {
        for (std::int64_t j = 0; j < s.extent; ++j) {
          T* dst = gx.data() + (o * s.extent + j) * s.inner;
          const T* src = g.data() + o * s.inner;
          for (std::int64_t i = 0; i < s.inner; ++i) dst[i] += src[i];
        }
      }
    };
    return make_result("sum_axis", out_shape, std::move(out), {x}, backward);
  });
}

Tensor mean(const Tensor& x) {
  if (x.numel() == 0) throw ShapeError("mean of an empty tensor");
  return mul_scalar(sum(x), 1.0 / static_cast<double>(x.numel()));
}

Tensor mean(const Tensor& x, int axis, bool keepdim) {
  const std::int64_t n = x.dim(axis);
  if (n == 0) throw ShapeError("mean over an empty axis");
  return mul_scalar(sum(x, axis, keepdim), 1.0 / static_cast<double>(n));
}

Tensor broadcast_to(const Tensor& x, const Shape& shape) {
  if (broadcast_shapes(x.shape(), shape) != shape) {
    throw BroadcastError("cannot broadcast " + to_string(x.shape()) + " to " + to_string(shape));
  }
  return add(x, Tensor::zeros(shape, x.dtype()));
}

namespace {

struct Planes {
  std::int64_t count, h, w;
};

Planes trailing_planes(const Tensor& x, const char* op) {
  if (x.rank() < 2) throw ShapeError(std::string(op) + " needs at least two dims");
  return {x.numel() / (x.dim(-1) * x.dim(-2)), x.dim(-2), x.dim(-1)};
}

/// Source taps for one output coordinate of a 2x bilinear upsample.
struct Tap {
  std::int64_t i0, i1;
  double w1;
};

std::vector<Tap> upsample_taps(std::int64_t in_extent) {
  std::vector<Tap> taps(static_cast<std::size_t>(2 * in_extent));
  for (std::int64_t o = 0; o < 2 * in_extent; ++o) {
    double src = (static_cast<double>(o) + 0.5) / 2.0 - 0.5;
    src = std::max(src, 0.0);
    auto i0 = static_cast<std::int64_t>(std::floor(src));
    i0 = std::min(i0, in_extent - 1);
    const std::int64_t i1 = std::min(i0 + 1, in_extent - 1);
    taps[static_cast<std::size_t>(o)] = {i0, i1, src - static_cast<double>(i0)};
  }
  return taps;
}

}  // namespace

Tensor upsample_bilinear2x(const Tensor& x) {
  const auto p = trailing_planes(x, "upsample_bilinear2x");
  Shape out_shape = x.shape();
  out_shape[out_shape.size() - 2] *= 2;
  out_shape.back() *= 2;
  const auto ty = upsample_taps(p.h);
  const auto tx = upsample_taps(p.w);
  return dispatch(x.dtype(), [&]<class T>() {
    const auto& in = vec<T>(x);
    const std::int64_t ho = 2 * p.h, wo = 2 * p.w;
    std::vector<T> out(static_cast<std::size_t>(p.count * ho * wo));
    for (std::int64_t c = 0; c < p.count; ++c) {
      const T* src = in.data() + c * p.h * p.w;
      T* dst = out.data() + c * ho * wo;
      for (std::int64_t oy = 0; oy < ho; ++oy) {
        const auto& a = ty[static_cast<std::size_t>(oy)];
        const T wy1 = static_cast<T>(a.w1), wy0 = T(1) - wy1;
        for (std::int64_t ox = 0; ox < wo; ++ox) {
          const auto& b = tx[static_cast<std::size_t>(ox)];
          const T wx1 = static_cast<T>(b.w1), wx0 = T(1) - wx1;
          dst[oy * wo + ox] = wy0 * (wx0 * src[a.i0 * p.w + b.i0] + wx1 * src[a.i0 * p.w + b.i1]) +
                              wy1 * (wx0 * src[a.i1 * p.w + b.i0] + wx1 * src[a.i1 * p.w + b.i1]);
        }
      }
    }
    auto backward = [p, ty, tx](const TensorImpl&, const Buffer& gbuf, std::span<Buffer* const> grads) {
      const auto& g = vec<T>(gbuf);
      auto& gx = vec<T>(*grads[0]);
      const std::int64_t ho = 2 * p.h, wo = 2 * p.w;
      for (std::int64_t c = 0; c < p.count; ++c) {
        const T* src = g.data() + c * ho * wo;
        T* dst = gx.data() + c * p.h * p.w;
        for (std::int64_t oy = 0; oy < ho; ++oy) {
          const auto& a = ty[static_cast<std::size_t>(oy)];
          const T wy1 = static_cast<T>(a.w1), wy0 = T(1) - wy1;
          for (std::int64_t ox = 0; ox < wo; ++ox) {
            const auto& b = tx[static_cast<std::size_t>(ox)];
            const T wx1 = static_cast<T>(b.w1), wx0 = T(1) - wx1;
            const T v = src[oy * wo + ox];
            dst[a.i0 * p.w + b.i0] += v * wy0 * wx0;
            dst[a.i0 * p.w + b.i1] += v * wy0 * wx1;
            dst[a.i1 * p.w + b.i0] += v * wy1 * wx0;
            dst[a.i1 * p.w + b.i1] += v * wy1 * wx1;
          }
        }
      }
    };
    return make_result("upsample_bilinear2x", out_shape, std::move(out), {x}, backward);
  });
}

Tensor avg_pool2x(const Tensor& x) {
  const auto p = trailing_planes(x, "avg_pool2x");
  if (p.h % 2 || p.w % 2) throw ShapeError("avg_pool2x needs even spatial dims, got " + to_string(x.shape()));
  Shape out_shape = x.shape();
  out_shape[out_shape.size() - 2] /= 2;
  out_shape.back() /= 2;
  return dispatch(x.dtype(), [&]<class T>() {
    const auto& in = vec<T>(x);
    const std::int64_t ho = p.h / 2, wo = p.w / 2;
    std::vector<T> out(static_cast<std::size_t>(p.count * ho * wo));
    for (std::int64_t c = 0; c < p.count; ++c) {
      const T* src = in.data() + c * p.h * p.w;
      T* dst = out.data() + c * ho * wo;
      for (std::int64_t oy = 0; oy < ho; ++oy) {
        for (std::int64_t ox = 0; ox < wo; ++ox) {
          const T* s0 = src + 2 * oy * p.w + 2 * ox;
          dst[oy * wo + ox] = T(0.25) * (s0[0] + s0[1] + s0[p.w] + s0[p.w + 1]);
        }
      }
    }
    auto backward = [p](const TensorImpl&, const Buffer& gbuf, std::span<Buffer* const> grads) {
      const auto& g = vec<T>(gbuf);
      auto& gx = vec<T>(*grads[0]);
      const std::int64_t ho = p.h / 2, wo = p.w / 2;
      for (std::int64_t c = 0; c < p.count; ++c) {
        const T* src = g.data() + c * ho * wo;
        T* dst = gx.data() + c * p.h * p.w;
        for (std::int64_t oy = 0; oy < ho; ++oy) {
          for (std::int64_t ox = 0; ox < wo; ++ox) {
            const T v = T(0.25) * src[oy * wo + ox];
            T* d0 = dst + 2 * oy * p.w + 2 * ox;
            d0[0] += v;
            d0[1] += v;
            d0[p.w] += v;
            d0[p.w + 1] += v;
          }
        }
      }
    };
    return make_result("avg_pool2x", out_shape, std::move(out), {x}, backward);
  });
}

Tensor pad2d(const Tensor& x, int top, int bottom, int left, int right) {
  if (top < 0 || bottom < 0 || left < 0 || right < 0) throw ShapeError("pad2d: negative padding");
  const auto p = trailing_planes(x, "pad2d");
  const std::int64_t ho = p.h + top + bottom, wo = p.w + left + right;
  Shape out_shape = x.shape();
  out_shape[out_shape.size() - 2] = ho;
  out_shape.back() = wo;
  return dispatch(x.dtype(), [&]<class T>() {
    const auto& in = vec<T>(x);
    std::vector<T> out(static_cast<std::size_t>(p.count * ho * wo), T(0));
    for (std::int64_t c = 0; c < p.count; ++c) {
      for (std::int64_t y = 0; y < p.h; ++y) {
        std::copy_n(in.begin() + (c * p.h + y) * p.w, p.w,
                    out.begin() + (c * ho + y + top) * wo + left);
      }
    }
    auto backward = [p, ho, wo, top, left](const TensorImpl&, const Buffer& gbuf,
                                           std::span<Buffer* const> grads) {
      const auto& g = vec<T>(gbuf);
      auto& gx = vec<T>(*grads[0]);
      for (std::int64_t c = 0; c < p.count; ++c) {
        for (std::int64_t y = 0; y < p.h; ++y) {
          const T* src = g.data() + (c * ho + y + top) * wo + left;
          T* dst = gx.data() + (c * p.h + y) * p.w;
          for (std::int64_t i = 0; i < p.w; ++i) dst[i] += src[i];
        }
      }
    };
    return make_result("pad2d", out_shape, std::move(out), {x}, backward);
  });
}

Tensor gather(const Tensor& x, std::vector<std::int64_t> index, Shape shape) {
  if (numel(shape) != static_cast<std::int64_t>(index.size())) {
    throw ShapeError("gather: index count does not match output shape");
  }
  const std::int64_t n = x.numel();
  for (auto i : index) {
    if (i < 0 || i >= n) throw IndexError("gather: index out of range");
  }
  auto idx = std::make_shared<std::vector<std::int64_t>>(std::move(index));
  return dispatch(x.dtype(), [&]<class T>() {
    const auto& in = vec<T>(x);
    std::vector<T> out(idx->size());
    for (std::size_t k = 0; k < out.size(); ++k) out[k] = in[static_cast<std::size_t>((*idx)[k])];
    auto backward = [idx](const TensorImpl&, const Buffer& gbuf, std::span<Buffer* const> grads) {
      const auto& g = vec<T>(gbuf);
      auto& gx = vec<T>(*grads[0]);
      for (std::size_t k = 0; k < g.size(); ++k) gx[static_cast<std::size_t>((*idx)[k])] += g[k];
    };
    return make_result("gather", shape, std::move(out), {x}, backward);
  });
}

}  // namespace nire
