#pragma once

// Differentiable primitives over Tape. Tensors use a channels-last layout:
// sequences are [B, L, C], weights of a 1D convolution are [K, Cin, Cout].
// Broadcasting is limited to a leading batch dimension (bias over rows, one
// vector per batch item over a sequence).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "gazediff/core/gemm.hpp"
#include "gazediff/core/tape.hpp"

namespace gazediff::ops {

namespace detail {

template <class T>
T* grad_or_null(Tape<T>& tape, const Var<T>& v) {
  return v.requires_grad() ? tape.grad(v.id()).data() : nullptr;
}

inline void require_rank(const Shape& s, std::size_t rank, const char* op) {
  if (s.size() != rank)
    throw DimensionError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got " + to_string(s));
}

inline std::size_t rows_of(const Shape& s) {
  std::size_t r = 1;
  for (std::size_t i = 0; i + 1 < s.size(); ++i) r *= s[i];
  return r;
}

}  // namespace detail

template <class T>
Var<T> add(Var<T> a, Var<T> b) {
  require_shape(a.shape(), b.shape(), "add");
  Tensor<T> out = a.value();
  const auto& bv = b.value().data;
  for (std::size_t i = 0; i < out.size(); ++i) out.data[i] += bv[i];
  return a.tape().record(std::move(out), {a, b}, [a, b](Tape<T>& tape, std::size_t self) {
    const auto& g = tape.grad(self);
    for (const Var<T>& in : {a, b})
      if (T* gi = detail::grad_or_null(tape, in))
        for (std::size_t i = 0; i < g.size(); ++i) gi[i] += g[i];
  });
}

template <class T>
Var<T> sub(Var<T> a, Var<T> b) {
  require_shape(a.shape(), b.shape(), "sub");
  Tensor<T> out = a.value();
  const auto& bv = b.value().data;
  for (std::size_t i = 0; i < out.size(); ++i) out.data[i] -= bv[i];
  return a.tape().record(std::move(out), {a, b}, [a, b](Tape<T>& tape, std::size_t self) {
    const auto& g = tape.grad(self);
    if (T* ga = detail::grad_or_null(tape, a))
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    if (T* gb = detail::grad_or_null(tape, b))
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
  });
}

template <class T>
Var<T> mul(Var<T> a, Var<T> b) {
  require_shape(a.shape(), b.shape(), "mul");
  Tensor<T> out = a.value();
  const auto& bv = b.value().data;
  for (std::size_t i = 0; i < out.size(); ++i) out.data[i] *= bv[i];
  return a.tape().record(std::move(out), {a, b}, [a, b](Tape<T>& tape, std::size_t self) {
    const auto& g = tape.grad(self);
    const auto& av = a.value().data;
    const auto& bv = b.value().data;
    if (T* ga = detail::grad_or_null(tape, a))
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bv[i];
    if (T* gb = detail::grad_or_null(tape, b))
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * av[i];
  });
}

template <class T>
Var<T> scale(Var<T> a, T s) {
  Tensor<T> out = a.value();
  for (auto& v : out.data) v *= s;
  return a.tape().record(std::move(out), {a}, [a, s](Tape<T>& tape, std::size_t self) {
    const auto& g = tape.grad(self);
    if (T* ga = detail::grad_or_null(tape, a))
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += s * g[i];
  });
}

/// x[..., C] + b[C]
template <class T>
Var<T> add_bias(Var<T> x, Var<T> b) {
  const Shape& xs = x.shape();
  if (xs.empty() || b.shape() != Shape{xs.back()})
    throw DimensionError("add_bias: shape " + to_string(xs) + " vs bias " + to_string(b.shape()));
  const std::size_t c = xs.back(), rows = detail::rows_of(xs);
  Tensor<T> out = x.value();
  const auto& bv = b.value().data;
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t j = 0; j < c; ++j) out.data[r * c + j] += bv[j];
  return x.tape().record(std::move(out), {x, b}, [x, b, rows, c](Tape<T>& tape, std::size_t self) {
    const auto& g = tape.grad(self);
    if (T* gx = detail::grad_or_null(tape, x))
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
    if (T* gb = detail::grad_or_null(tape, b))
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t j = 0; j < c; ++j) gb[j] += g[r * c + j];
  });
}

/// x[B, L, C] + v[B, C], the per-item vector added at every sequence position.
template <class T>
Var<T> add_rows(Var<T> x, Var<T> v) {
  const Shape& xs = x.shape();
  detail::require_rank(xs, 3, "add_rows");
  if (v.shape() != Shape{xs[0], xs[2]})
    throw DimensionError("add_rows: shape " + to_string(xs) + " vs " + to_string(v.shape()));
  const std::size_t bsz = xs[0], len = xs[1], c = xs[2];
  Tensor<T> out = x.value();
  const auto& vv = v.value().data;
  for (std::size_t b = 0; b < bsz; ++b)
    for (std::size_t l = 0; l < len; ++l)
      for (std::size_t j = 0; j < c; ++j) out.data[(b * len + l) * c + j] += vv[b * c + j];
  return x.tape().record(std::move(out), {x, v}, [x, v, bsz, len, c](Tape<T>& tape, std::size_t self) {
    const auto& g = tape.grad(self);
    if (T* gx = detail::grad_or_null(tape, x))
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
    if (T* gv = detail::grad_or_null(tape, v))
      for (std::size_t b = 0; b < bsz; ++b)
        for (std::size_t l = 0; l < len; ++l)
          for (std::size_t j = 0; j < c; ++j) gv[b * c + j] += g[(b * len + l) * c + j];
  });
}

/// x[..., K] @ w[K, N] (+ bias[N]); leading dims of x are flattened into rows.
template <class T>
Var<T> linear(Var<T> x, Var<T> w, Var<T> bias = {}) {
  const Shape& xs = x.shape();
  detail::require_rank(w.shape(), 2, "linear weight");
  if (xs.empty() || xs.back() != w.shape()[0])
    throw DimensionError("linear: input " + to_string(xs) + " vs weight " + to_string(w.shape()));
  const std::size_t rows = detail::rows_of(xs), k = w.shape()[0], n = w.shape()[1];
  Shape os = xs;
  os.back() = n;
  Tensor<T> out(os);
  kernels::gemm_nn(rows, n, k, x.value().data.data(), w.value().data.data(), out.data.data());
  Var<T> y = x.tape().record(std::move(out), {x, w}, [x, w, rows, k, n](Tape<T>& tape, std::size_t self) {
    const T* g = tape.grad(self).data();
    if (T* gx = detail::grad_or_null(tape, x)) kernels::gemm_nt(rows, k, n, g, w.value().data.data(), gx);
    if (T* gw = detail::grad_or_null(tape, w)) kernels::gemm_tn(k, n, rows, x.value().data.data(), g, gw);
  });
  return bias.valid() ? add_bias(y, bias) : y;
}

/// Batched matmul a[B, M, K] @ b[B, K, N], or @ b[B, N, K]^T when `transpose_b`.
template <class T>
Var<T> bmm(Var<T> a, Var<T> b, bool transpose_b = false) {
  const Shape& as = a.shape();
  const Shape& bs = b.shape();
  detail::require_rank(as, 3, "bmm");
  detail::require_rank(bs, 3, "bmm");
  const std::size_t bsz = as[0], m = as[1], k = as[2];
  const std::size_t n = transpose_b ? bs[1] : bs[2];
  const std::size_t bk = transpose_b ? bs[2] : bs[1];
  if (bs[0] != bsz || bk != k)
    throw DimensionError("bmm: shape " + to_string(as) + " vs " + to_string(bs));
  Tensor<T> out({bsz, m, n});
  const T* av = a.value().data.data();
  const T* bv = b.value().data.data();
  for (std::size_t p = 0; p < bsz; ++p) {
    if (transpose_b) kernels::gemm_nt(m, n, k, av + p * m * k, bv + p * k * n, out.data.data() + p * m * n);
    else kernels::gemm_nn(m, n, k, av + p * m * k, bv + p * k * n, out.data.data() + p * m * n);
  }
  return a.tape().record(std::move(out), {a, b}, [a, b, bsz, m, k, n, transpose_b](Tape<T>& tape, std::size_t self) {
    const T* g = tape.grad(self).data();
    const T* av = a.value().data.data();
    const T* bv = b.value().data.data();
    T* ga = detail::grad_or_null(tape, a);
    T* gb = detail::grad_or_null(tape, b);
    for (std::size_t p = 0; p < bsz; ++p) {
      const T* ap = av + p * m * k;
      const T* bp = bv + p * k * n;
      const T* gp = g + p * m * n;
      if (transpose_b) {
        if (ga) kernels::gemm_nn(m, k, n, gp, bp, ga + p * m * k);
        if (gb) kernels::gemm_tn(n, k, m, gp, ap, gb + p * k * n);
      } else {
        if (ga) kernels::gemm_nt(m, k, n, gp, bp, ga + p * m * k);
        if (gb) kernels::gemm_tn(k, n, m, ap, gp, gb + p * k * n);
      }
    }
  });
}

/// Softmax over the last dimension.
template <class T>
Var<T> softmax(Var<T> x) {
  const Shape& xs = x.shape();
  if (xs.empty()) throw DimensionError("softmax: scalar input");
  const std::size_t c = xs.back(), rows = detail::rows_of(xs);
  Tensor<T> out(xs);
  const auto& xv = x.value().data;
  for (std::size_t r = 0; r < rows; ++r) {
    const T* in = xv.data() + r * c;
    T* o = out.data.data() + r * c;
    const T mx = *std::max_element(in, in + c);
    T total = 0;
    for (std::size_t j = 0; j < c; ++j) total += (o[j] = std::exp(in[j] - mx));
    for (std::size_t j = 0; j < c; ++j) o[j] /= total;
  }
  return x.tape().record(std::move(out), {x}, [x, rows, c](Tape<T>& tape, std::size_t self) {
    T* gx = detail::grad_or_null(tape, x);
    if (!gx) return;
    const T* g = tape.grad(self).data();
    const T* y = tape.value(self).data.data();
    for (std::size_t r = 0; r < rows; ++r) {
      T dot = 0;
      for (std::size_t j = 0; j < c; ++j) dot += g[r * c + j] * y[r * c + j];
      for (std::size_t j = 0; j < c; ++j) gx[r * c + j] += y[r * c + j] * (g[r * c + j] - dot);
    }
  });
}

/// x * sigmoid(x)
template <class T>
Var<T> silu(Var<T> x) {
  Tensor<T> out = x.value();
  for (auto& v : out.data) v = v / (T{1} + std::exp(-v));
  return x.tape().record(std::move(out), {x}, [x](Tape<T>& tape, std::size_t self) {
    T* gx = detail::grad_or_null(tape, x);
    if (!gx) return;
    const auto& g = tape.grad(self);
    const auto& xv = x.value().data;
    for (std::size_t i = 0; i < g.size(); ++i) {
      const T s = T{1} / (T{1} + std::exp(-xv[i]));
      gx[i] += g[i] * s * (T{1} + xv[i] * (T{1} - s));
    }
  });
}

/// Layer normalization over the last dimension with learned gain and shift.
template <class T>
Var<T> layer_norm(Var<T> x, Var<T> gamma, Var<T> beta, T eps = T(1e-5)) {
  const Shape& xs = x.shape();
  if (xs.empty() || gamma.shape() != Shape{xs.back()} || beta.shape() != Shape{xs.back()})
    throw DimensionError("layer_norm: shape " + to_string(xs) + " vs gain " + to_string(gamma.shape()));
  const std::size_t c = xs.back(), rows = detail::rows_of(xs);
  Tensor<T> out(xs);
  std::vector<T> xhat(x.size()), inv_std(rows);
  const auto& xv = x.value().data;
  const auto& gv = gamma.value().data;
  const auto& bv = beta.value().data;
  for (std::size_t r = 0; r < rows; ++r) {
    const T* in = xv.data() + r * c;
    T mean = 0;
    for (std::size_t j = 0; j < c; ++j) mean += in[j];
    mean /= T(c);
    T var = 0;
    for (std::size_t j = 0; j < c; ++j) var += (in[j] - mean) * (in[j] - mean);
    var /= T(c);
    inv_std[r] = T{1} / std::sqrt(var + eps);
    for (std::size_t j = 0; j < c; ++j) {
      const std::size_t i = r * c + j;
      xhat[i] = (in[j] - mean) * inv_std[r];
      out.data[i] = xhat[i] * gv[j] + bv[j];
    }
  }
  return x.tape().record(
      std::move(out), {x, gamma, beta},
      [x, gamma, beta, rows, c, xhat = std::move(xhat), inv_std = std::move(inv_std)](Tape<T>& tape, std::size_t self) {
        const T* g = tape.grad(self).data();
        const auto& gv = gamma.value().data;
        if (T* gg = detail::grad_or_null(tape, gamma))
          for (std::size_t i = 0; i < rows * c; ++i) gg[i % c] += g[i] * xhat[i];
        if (T* gb = detail::grad_or_null(tape, beta))
          for (std::size_t i = 0; i < rows * c; ++i) gb[i % c] += g[i];
        if (T* gx = detail::grad_or_null(tape, x))
          for (std::size_t r = 0; r < rows; ++r) {
            T sum_dy = 0, sum_dy_xhat = 0;
            for (std::size_t j = 0; j < c; ++j) {
              const T dy = g[r * c + j] * gv[j];
              sum_dy += dy;
              sum_dy_xhat += dy * xhat[r * c + j];
            }
            for (std::size_t j = 0; j < c; ++j) {
              const T dy = g[r * c + j] * gv[j];
              gx[r * c + j] += inv_std[r] * (dy - sum_dy / T(c) - xhat[r * c + j] * sum_dy_xhat / T(c));
            }
          }
      });
}

/// 1D convolution, x[B, L, Cin] with w[K, Cin, Cout], zero padding `pad` on both ends.
/// Lowered to one GEMM over an unfolded [B*Lout, K*Cin] input.
template <class T>
Var<T> conv1d(Var<T> x, Var<T> w, Var<T> bias = {}, std::size_t stride = 1, std::size_t pad = 0) {
  const Shape& xs = x.shape();
  const Shape& ws = w.shape();
  detail::require_rank(xs, 3, "conv1d input");
  detail::require_rank(ws, 3, "conv1d weight");
  if (ws[1] != xs[2]) throw DimensionError("conv1d: input " + to_string(xs) + " vs weight " + to_string(ws));
  if (stride == 0) throw DimensionError("conv1d: stride must be positive");
  const std::size_t bsz = xs[0], len = xs[1], cin = xs[2], ksz = ws[0], cout = ws[2];
  if (len + 2 * pad < ksz) throw DimensionError("conv1d: kernel longer than padded input " + to_string(xs));
  const std::size_t lout = (len + 2 * pad - ksz) / stride + 1;
  const std::size_t rows = bsz * lout, width = ksz * cin;
  const bool pointwise = ksz == 1 && stride == 1 && pad == 0;

  std::vector<T> cols;
  if (!pointwise) {
    cols.assign(rows * width, T{0});
    const T* xv = x.value().data.data();
    for (std::size_t b = 0; b < bsz; ++b)
      for (std::size_t o = 0; o < lout; ++o)
        for (std::size_t k = 0; k < ksz; ++k) {
          const std::ptrdiff_t src = std::ptrdiff_t(o * stride + k) - std::ptrdiff_t(pad);
          if (src < 0 || src >= std::ptrdiff_t(len)) continue;
          std::copy_n(xv + (b * len + std::size_t(src)) * cin, cin, cols.data() + (b * lout + o) * width + k * cin);
        }
  }
  Tensor<T> out({bsz, lout, cout});
  kernels::gemm_nn(rows, cout, width, pointwise ? x.value().data.data() : cols.data(), w.value().data.data(), out.data.data());

  Var<T> y = x.tape().record(
      std::move(out), {x, w},
      [x, w, bsz, len, cin, ksz, cout, lout, stride, pad, rows, width, pointwise, cols = std::move(cols)](Tape<T>& tape,
                                                                                                          std::size_t self) {
        const T* g = tape.grad(self).data();
        const T* unfolded = pointwise ? x.value().data.data() : cols.data();
        if (T* gw = detail::grad_or_null(tape, w)) kernels::gemm_tn(width, cout, rows, unfolded, g, gw);
        T* gx = detail::grad_or_null(tape, x);
        if (!gx) return;
        if (pointwise) {
          kernels::gemm_nt(rows, width, cout, g, w.value().data.data(), gx);
          return;
        }
        std::vector<T> gcols(rows * width, T{0});
        kernels::gemm_nt(rows, width, cout, g, w.value().data.data(), gcols.data());
        for (std::size_t b = 0; b < bsz; ++b)
          for (std::size_t o = 0; o < lout; ++o)
            for (std::size_t k = 0; k < ksz; ++k) {
              const std::ptrdiff_t src = std::ptrdiff_t(o * stride + k) - std::ptrdiff_t(pad);
              if (src < 0 || src >= std::ptrdiff_t(len)) continue;
              T* dst = gx + (b * len + std::size_t(src)) * cin;
              const T* from = gcols.data() + (b * lout + o) * width + k * cin;
              for (std::size_t ci = 0; ci < cin; ++ci) dst[ci] += from[ci];
            }
      });
  return bias.valid() ? add_bias(y, bias) : y;
}

/// Repeats each sequence position `factor` times: [B, L, C] -> [B, L*factor, C].
template <class T>
Var<T> upsample_nearest(Var<T> x, std::size_t factor) {
  const Shape& xs = x.shape();
  detail::require_rank(xs, 3, "upsample_nearest");
  const std::size_t bsz = xs[0], len = xs[1], c = xs[2];
  Tensor<T> out({bsz, len * factor, c});
  const auto& xv = x.value().data;
  for (std::size_t b = 0; b < bsz; ++b)
    for (std::size_t l = 0; l < len * factor; ++l)
      std::copy_n(xv.data() + (b * len + l / factor) * c, c, out.data.data() + (b * len * factor + l) * c);
  return x.tape().record(std::move(out), {x}, [x, bsz, len, c, factor](Tape<T>& tape, std::size_t self) {
    T* gx = detail::grad_or_null(tape, x);
    if (!gx) return;
    const T* g = tape.grad(self).data();
    for (std::size_t b = 0; b < bsz; ++b)
      for (std::size_t l = 0; l < len * factor; ++l)
        for (std::size_t j = 0; j < c; ++j) gx[(b * len + l / factor) * c + j] += g[(b * len * factor + l) * c + j];
  });
}

/// Concatenates along the last (channel) dimension.
template <class T>
Var<T> concat_channels(Var<T> a, Var<T> b) {
  const Shape& as = a.shape();
  const Shape& bs = b.shape();
  if (as.empty() || as.size() != bs.size() || !std::equal(as.begin(), as.end() - 1, bs.begin()))
    throw DimensionError("concat_channels: shape " + to_string(as) + " vs " + to_string(bs));
  const std::size_t rows = detail::rows_of(as), ca = as.back(), cb = bs.back();
  Shape os = as;
  os.back() = ca + cb;
  Tensor<T> out(os);
  for (std::size_t r = 0; r < rows; ++r) {
    std::copy_n(a.value().data.data() + r * ca, ca, out.data.data() + r * (ca + cb));
    std::copy_n(b.value().data.data() + r * cb, cb, out.data.data() + r * (ca + cb) + ca);
  }
  return a.tape().record(std::move(out), {a, b}, [a, b, rows, ca, cb](Tape<T>& tape, std::size_t self) {
    const T* g = tape.grad(self).data();
    T* ga = detail::grad_or_null(tape, a);
    T* gb = detail::grad_or_null(tape, b);
    for (std::size_t r = 0; r < rows; ++r) {
      if (ga)
        for (std::size_t j = 0; j < ca; ++j) ga[r * ca + j] += g[r * (ca + cb) + j];
      if (gb)
        for (std::size_t j = 0; j < cb; ++j) gb[r * cb + j] += g[r * (ca + cb) + ca + j];
    }
  });
}

/// Concatenates along the sequence dimension: [B, La, C] ++ [B, Lb, C] -> [B, La+Lb, C].
template <class T>
Var<T> concat_sequence(Var<T> a, Var<T> b) {
  const Shape& as = a.shape();
  const Shape& bs = b.shape();
  detail::require_rank(as, 3, "concat_sequence");
  detail::require_rank(bs, 3, "concat_sequence");
  if (as[0] != bs[0] || as[2] != bs[2])
    throw DimensionError("concat_sequence: shape " + to_string(as) + " vs " + to_string(bs));
  const std::size_t bsz = as[0], la = as[1], lb = bs[1], c = as[2];
  Tensor<T> out({bsz, la + lb, c});
  for (std::size_t bi = 0; bi < bsz; ++bi) {
    std::copy_n(a.value().data.data() + bi * la * c, la * c, out.data.data() + bi * (la + lb) * c);
    std::copy_n(b.value().data.data() + bi * lb * c, lb * c, out.data.data() + (bi * (la + lb) + la) * c);
  }
  return a.tape().record(std::move(out), {a, b}, [a, b, bsz, la, lb, c](Tape<T>& tape, std::size_t self) {
    const T* g = tape.grad(self).data();
    if (T* ga = detail::grad_or_null(tape, a))
      for (std::size_t bi = 0; bi < bsz; ++bi)
        for (std::size_t i = 0; i < la * c; ++i) ga[bi * la * c + i] += g[bi * (la + lb) * c + i];
    if (T* gb = detail::grad_or_null(tape, b))
      for (std::size_t bi = 0; bi < bsz; ++bi)
        for (std::size_t i = 0; i < lb * c; ++i) gb[bi * lb * c + i] += g[(bi * (la + lb) + la) * c + i];
  });
}

/// [B, L, H*d] -> [B*H, L, d]
template <class T>
Var<T> split_heads(Var<T> x, std::size_t heads) {
  const Shape& xs = x.shape();
  detail::require_rank(xs, 3, "split_heads");
  if (heads == 0 || xs[2] % heads != 0)
    throw DimensionError("split_heads: " + std::to_string(xs[2]) + " channels over " + std::to_string(heads) + " heads");
  const std::size_t bsz = xs[0], len = xs[1], d = xs[2] / heads;
  Tensor<T> out({bsz * heads, len, d});
  const auto& xv = x.value().data;
  for (std::size_t b = 0; b < bsz; ++b)
    for (std::size_t l = 0; l < len; ++l)
      for (std::size_t h = 0; h < heads; ++h)
        std::copy_n(xv.data() + (b * len + l) * heads * d + h * d, d, out.data.data() + ((b * heads + h) * len + l) * d);
  return x.tape().record(std::move(out), {x}, [x, bsz, len, heads, d](Tape<T>& tape, std::size_t self) {
    T* gx = detail::grad_or_null(tape, x);
    if (!gx) return;
    const T* g = tape.grad(self).data();
    for (std::size_t b = 0; b < bsz; ++b)
      for (std::size_t l = 0; l < len; ++l)
        for (std::size_t h = 0; h < heads; ++h)
          for (std::size_t j = 0; j < d; ++j)
            gx[(b * len + l) * heads * d + h * d + j] += g[((b * heads + h) * len + l) * d + j];
  });
}

/// [B*H, L, d] -> [B, L, H*d]
template <class T>
Var<T> merge_heads(Var<T> x, std::size_t heads) {
  const Shape& xs = x.shape();
  detail::require_rank(xs, 3, "merge_heads");
  if (heads == 0 || xs[0] % heads != 0)
    throw DimensionError("merge_heads: batch " + std::to_string(xs[0]) + " over " + std::to_string(heads) + " heads");
  const std::size_t bsz = xs[0] / heads, len = xs[1], d = xs[2];
  Tensor<T> out({bsz, len, heads * d});
  const auto& xv = x.value().data;
  for (std::size_t b = 0; b < bsz; ++b)
    for (std::size_t h = 0; h < heads; ++h)
      for (std::size_t l = 0; l < len; ++l)
        std::copy_n(xv.data() + ((b * heads + h) * len + l) * d, d, out.data.data() + (b * len + l) * heads * d + h * d);
  return x.tape().record(std::move(out), {x}, [x, bsz, len, heads, d](Tape<T>& tape, std::size_t self) {
    T* gx = detail::grad_or_null(tape, x);
    if (!gx) return;
    const T* g = tape.grad(self).data();
    for (std::size_t b = 0; b < bsz; ++b)
      for (std::size_t h = 0; h < heads; ++h)
        for (std::size_t l = 0; l < len; ++l)
          for (std::size_t j = 0; j < d; ++j)
            gx[((b * heads + h) * len + l) * d + j] += g[(b * len + l) * heads * d + h * d + j];
  });
}

/// Rows of table[N, D] selected by `index`, giving [M, D].
template <class T>
Var<T> gather_rows(Var<T> table, std::vector<std::size_t> index) {
  const Shape& ts = table.shape();
  detail::require_rank(ts, 2, "gather_rows");
  const std::size_t n = ts[0], d = ts[1];
  Tensor<T> out({index.size(), d});
  for (std::size_t m = 0; m < index.size(); ++m) {
    if (index[m] >= n)
      throw DimensionError("gather_rows: index " + std::to_string(index[m]) + " out of " + to_string(ts));
    std::copy_n(table.value().data.data() + index[m] * d, d, out.data.data() + m * d);
  }
  return table.tape().record(std::move(out), {table}, [table, d, index = std::move(index)](Tape<T>& tape, std::size_t self) {
    T* gt = detail::grad_or_null(tape, table);
    if (!gt) return;
    const T* g = tape.grad(self).data();
    for (std::size_t m = 0; m < index.size(); ++m)
      for (std::size_t j = 0; j < d; ++j) gt[index[m] * d + j] += g[m * d + j];
  });
}

template <class T>
Var<T> sum(Var<T> x) {
  T total = 0;
  for (const T v : x.value().data) total += v;
  return x.tape().record(Tensor<T>({1}, std::vector<T>{total}), {x}, [x](Tape<T>& tape, std::size_t self) {
    T* gx = detail::grad_or_null(tape, x);
    if (!gx) return;
    const T g = tape.grad(self)[0];
    for (std::size_t i = 0; i < x.size(); ++i) gx[i] += g;
  });
}

template <class T>
Var<T> mean(Var<T> x) {
  return scale(sum(x), T{1} / T(x.size()));
}

/// Mean squared difference, a scalar.
template <class T>
Var<T> mse(Var<T> a, Var<T> b) {
  Var<T> d = sub(a, b);
  return mean(mul(d, d));
}

}  // namespace gazediff::ops
