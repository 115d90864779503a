// Copyright 2026 The ndst Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Differentiable operations over Var<T>. Layouts: dense [N, D] for vectors,
// [N, C, H, W] for images.

#include "ndst/nn/tensor.hpp"

namespace ndst::nn {

namespace detail {

inline void RequireShape(bool ok, const std::string& what) {
  if (!ok) throw Error(ErrorCode::kShapeMismatch, what);
}

template <typename T, typename Fwd, typename Bwd>
Var<T> Unary(const Var<T>& a, Fwd fwd, Bwd dfdx) {
  Tensor<T> out(a->value.shape);
  const T* x = a->value.ptr();
  for (std::size_t i = 0; i < out.size(); ++i) out.data[i] = fwd(x[i]);
  return MakeNode<T>(std::move(out), {a}, [a, dfdx](Node<T>& self) {
    T* ga = a->GradPtr();
    const T* x = a->value.ptr();
    const T* y = self.value.ptr();
    const T* g = self.grad.ptr();
    for (std::size_t i = 0; i < self.value.size(); ++i) ga[i] += g[i] * dfdx(x[i], y[i]);
  });
}

// Output extent of a strided convolution along one axis.
inline int ConvOutExtent(int n, int kernel, int stride, int pad) {
  return (n + 2 * pad - kernel) / stride + 1;
}

// Index range [lo, hi] of outputs o for which o*stride - pad + k lies in
// [0, n). Empty when lo > hi.
inline std::pair<int, int> ValidRange(int k, int n, int out_n, int stride, int pad) {
  int lo = pad - k > 0 ? (pad - k + stride - 1) / stride : 0;
  int hi = (n - 1 + pad - k);
  hi = hi < 0 ? -1 : hi / stride;
  return {lo, std::min(hi, out_n - 1)};
}

// Core of strided 2-D correlation shared by conv and transposed conv.
// "Gather" form: small[o] += w * big[o*stride - pad + k].
template <typename T>
void CorrelateGather(const T* big, int H, int W, const T* w, int K, T* small,
                     int OH, int OW, int stride, int pad) {
  for (int kh = 0; kh < K; ++kh) {
    auto [oh_lo, oh_hi] = ValidRange(kh, H, OH, stride, pad);
    for (int kw = 0; kw < K; ++kw) {
      const T wv = w[kh * K + kw];
      if (wv == T(0)) continue;
      auto [ow_lo, ow_hi] = ValidRange(kw, W, OW, stride, pad);
      for (int oh = oh_lo; oh <= oh_hi; ++oh) {
        const T* row = big + static_cast<std::size_t>(oh * stride - pad + kh) * W;
        T* orow = small + static_cast<std::size_t>(oh) * OW;
        for (int ow = ow_lo; ow <= ow_hi; ++ow) orow[ow] += wv * row[ow * stride - pad + kw];
      }
    }
  }
}

// "Scatter" form, the adjoint: big[o*stride - pad + k] += w * small[o].
template <typename T>
void CorrelateScatter(T* big, int H, int W, const T* w, int K, const T* small,
                      int OH, int OW, int stride, int pad) {
  for (int kh = 0; kh < K; ++kh) {
    auto [oh_lo, oh_hi] = ValidRange(kh, H, OH, stride, pad);
    for (int kw = 0; kw < K; ++kw) {
      const T wv = w[kh * K + kw];
      if (wv == T(0)) continue;
      auto [ow_lo, ow_hi] = ValidRange(kw, W, OW, stride, pad);
      for (int oh = oh_lo; oh <= oh_hi; ++oh) {
        T* row = big + static_cast<std::size_t>(oh * stride - pad + kh) * W;
        const T* srow = small + static_cast<std::size_t>(oh) * OW;
        for (int ow = ow_lo; ow <= ow_hi; ++ow) row[ow * stride - pad + kw] += wv * srow[ow];
      }
    }
  }
}

// Weight gradient: gw[k] += sum_o small[o] * big[o*stride - pad + k].
template <typename T>
void CorrelateWeightGrad(const T* big, int H, int W, const T* small, int OH, int OW,
                         T* gw, int K, int stride, int pad) {
  for (int kh = 0; kh < K; ++kh) {
    auto [oh_lo, oh_hi] = ValidRange(kh, H, OH, stride, pad);
    for (int kw = 0; kw < K; ++kw) {
      auto [ow_lo, ow_hi] = ValidRange(kw, W, OW, stride, pad);
      T acc = T(0);
      for (int oh = oh_lo; oh <= oh_hi; ++oh) {
        const T* row = big + static_cast<std::size_t>(oh * stride - pad + kh) * W;
        const T* srow = small + static_cast<std::size_t>(oh) * OW;
        for (int ow = ow_lo; ow <= ow_hi; ++ow) acc += srow[ow] * row[ow * stride - pad + kw];
      }
      gw[kh * K + kw] += acc;
    }
  }
}

}  // namespace detail

// ---- element-wise

template <typename T>
Var<T> Add(const Var<T>& a, const Var<T>& b) {
  detail::RequireShape(a->value.shape == b->value.shape, "Add shape mismatch");
  Tensor<T> out(a->value.shape);
  for (std::size_t i = 0; i < out.size(); ++i) out.data[i] = a->value.data[i] + b->value.data[i];
  return MakeNode<T>(std::move(out), {a, b}, [a, b](Node<T>& self) {
    for (const auto& p : {a, b}) {
      if (!p->requires_grad) continue;
      T* g = p->GradPtr();
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad.data[i];
    }
  });
}

template <typename T>
Var<T> Sub(const Var<T>& a, const Var<T>& b) {
  detail::RequireShape(a->value.shape == b->value.shape, "Sub shape mismatch");
  Tensor<T> out(a->value.shape);
  for (std::size_t i = 0; i < out.size(); ++i) out.data[i] = a->value.data[i] - b->value.data[i];
  return MakeNode<T>(std::move(out), {a, b}, [a, b](Node<T>& self) {
    if (a->requires_grad) {
      T* g = a->GradPtr();
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad.data[i];
    }
    if (b->requires_grad) {
      T* g = b->GradPtr();
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] -= self.grad.data[i];
    }
  });
}

template <typename T>
Var<T> Mul(const Var<T>& a, const Var<T>& b) {
  detail::RequireShape(a->value.shape == b->value.shape, "Mul shape mismatch");
  Tensor<T> out(a->value.shape);
  for (std::size_t i = 0; i < out.size(); ++i) out.data[i] = a->value.data[i] * b->value.data[i];
  return MakeNode<T>(std::move(out), {a, b}, [a, b](Node<T>& self) {
    if (a->requires_grad) {
      T* g = a->GradPtr();
      for (std::size_t i = 0; i < self.grad.size(); ++i)
        g[i] += self.grad.data[i] * b->value.data[i];
    }
    if (b->requires_grad) {
      T* g = b->GradPtr();
      for (std::size_t i = 0; i < self.grad.size(); ++i)
        g[i] += self.grad.data[i] * a->value.data[i];
    }
  });
}

template <typename T>
Var<T> Scale(const Var<T>& a, T s) {
  return detail::Unary(a, [s](T x) { return s * x; }, [s](T, T) { return s; });
}

template <typename T>
Var<T> AddScalar(const Var<T>& a, T s) {
  return detail::Unary(a, [s](T x) { return x + s; }, [](T, T) { return T(1); });
}

template <typename T>
Var<T> Exp(const Var<T>& a) {
  return detail::Unary(a, [](T x) { return std::exp(x); }, [](T, T y) { return y; });
}

template <typename T>
Var<T> Square(const Var<T>& a) {
  return detail::Unary(a, [](T x) { return x * x; }, [](T x, T) { return T(2) * x; });
}

template <typename T>
Var<T> Relu(const Var<T>& a) {
  return detail::Unary(a, [](T x) { return x > T(0) ? x : T(0); },
                       [](T x, T) { return x > T(0) ? T(1) : T(0); });
}

template <typename T>
Var<T> LeakyRelu(const Var<T>& a, T slope) {
  return detail::Unary(a, [slope](T x) { return x > T(0) ? x : slope * x; },
                       [slope](T x, T) { return x > T(0) ? T(1) : slope; });
}

template <typename T>
Var<T> Sigmoid(const Var<T>& a) {
  return detail::Unary(
      a,
      [](T x) {
        // Split by sign so exp never overflows.
        if (x >= T(0)) return T(1) / (T(1) + std::exp(-x));
        const T e = std::exp(x);
        return e / (T(1) + e);
      },
      [](T, T y) { return y * (T(1) - y); });
}

// ---- reductions and shape

template <typename T>
Var<T> Sum(const Var<T>& a) {
  T acc = T(0);
  for (T v : a->value.data) acc += v;
  return MakeNode<T>(Tensor<T>({1}, acc), {a}, [a](Node<T>& self) {
    T* g = a->GradPtr();
    const T s = self.grad.data[0];
    for (std::size_t i = 0; i < a->value.size(); ++i) g[i] += s;
  });
}

template <typename T>
Var<T> Mean(const Var<T>& a) {
  return Scale(Sum(a), T(1) / static_cast<T>(a->value.size()));
}

template <typename T>
Var<T> Reshape(const Var<T>& a, Shape shape) {
  detail::RequireShape(NumElements(shape) == a->value.size(),
                       "cannot reshape " + ShapeString(a->value.shape) + " to " +
                           ShapeString(shape));
  Tensor<T> out(std::move(shape), a->value.data);
  return MakeNode<T>(std::move(out), {a}, [a](Node<T>& self) {
    T* g = a->GradPtr();
    for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad.data[i];
  });
}

// Concatenates [N, Da] and [N, Db] into [N, Da + Db].
template <typename T>
Var<T> ConcatColumns(const Var<T>& a, const Var<T>& b) {
  const auto& sa = a->value.shape;
  const auto& sb = b->value.shape;
  detail::RequireShape(sa.size() == 2 && sb.size() == 2 && sa[0] == sb[0],
                       "ConcatColumns expects [N, D] inputs with equal N");
  const int n = sa[0], da = sa[1], db = sb[1];
  Tensor<T> out({n, da + db});
  for (int r = 0; r < n; ++r) {
    std::copy_n(a->value.ptr() + r * da, da, out.ptr() + r * (da + db));
    std::copy_n(b->value.ptr() + r * db, db, out.ptr() + r * (da + db) + da);
  }
  return MakeNode<T>(std::move(out), {a, b}, [a, b, n, da, db](Node<T>& self) {
    const T* g = self.grad.ptr();
    if (a->requires_grad) {
      T* ga = a->GradPtr();
      for (int r = 0; r < n; ++r)
        for (int c = 0; c < da; ++c) ga[r * da + c] += g[r * (da + db) + c];
    }
    if (b->requires_grad) {
      T* gb = b->GradPtr();
      for (int r = 0; r < n; ++r)
        for (int c = 0; c < db; ++c) gb[r * db + c] += g[r * (da + db) + da + c];
    }
  });
}

// ---- dense layers

// x [N, in], weight [out, in], bias [out] -> [N, out].
template <typename T>
Var<T> LinearOp(const Var<T>& x, const Var<T>& weight, const Var<T>& bias) {
  const auto& sx = x->value.shape;
  const auto& sw = weight->value.shape;
  detail::RequireShape(sx.size() == 2 && sw.size() == 2 && sx[1] == sw[1] &&
                           bias->value.size() == static_cast<std::size_t>(sw[0]),
                       "linear: input " + ShapeString(sx) + " vs weight " + ShapeString(sw));
  const int n = sx[0], in = sx[1], outd = sw[0];
  Tensor<T> out({n, outd});
  for (int r = 0; r < n; ++r) {
    const T* xr = x->value.ptr() + static_cast<std::size_t>(r) * in;
    for (int o = 0; o < outd; ++o) {
      const T* wr = weight->value.ptr() + static_cast<std::size_t>(o) * in;
      T acc = bias->value.data[o];
      for (int i = 0; i < in; ++i) acc += wr[i] * xr[i];
      out.data[static_cast<std::size_t>(r) * outd + o] = acc;
    }
  }
  return MakeNode<T>(std::move(out), {x, weight, bias},
                     [x, weight, bias, n, in, outd](Node<T>& self) {
    const T* g = self.grad.ptr();
    if (x->requires_grad) {
      T* gx = x->GradPtr();
      for (int r = 0; r < n; ++r)
        for (int o = 0; o < outd; ++o) {
          const T go = g[static_cast<std::size_t>(r) * outd + o];
          if (go == T(0)) continue;
          const T* wr = weight->value.ptr() + static_cast<std::size_t>(o) * in;
          T* gxr = gx + static_cast<std::size_t>(r) * in;
          for (int i = 0; i < in; ++i) gxr[i] += go * wr[i];
        }
    }
    if (weight->requires_grad) {
      T* gw = weight->GradPtr();
      for (int o = 0; o < outd; ++o)
        for (int r = 0; r < n; ++r) {
          const T go = g[static_cast<std::size_t>(r) * outd + o];
          if (go == T(0)) continue;
          const T* xr = x->value.ptr() + static_cast<std::size_t>(r) * in;
          T* gwr = gw + static_cast<std::size_t>(o) * in;
          for (int i = 0; i < in; ++i) gwr[i] += go * xr[i];
        }
    }
    if (bias->requires_grad) {
      T* gb = bias->GradPtr();
      for (int r = 0; r < n; ++r)
        for (int o = 0; o < outd; ++o) gb[o] += g[static_cast<std::size_t>(r) * outd + o];
    }
  });
}

// Normalizes each row of [N, D] to zero mean / unit variance, then applies
// per-feature scale and shift.
template <typename T>
Var<T> LayerNormOp(const Var<T>& x, const Var<T>& gamma, const Var<T>& beta,
                   T eps = T(1e-5)) {
  const auto& sx = x->value.shape;
  detail::RequireShape(sx.size() == 2 && gamma->value.size() == static_cast<std::size_t>(sx[1]) &&
                           beta->value.size() == static_cast<std::size_t>(sx[1]),
                       "layernorm shape mismatch " + ShapeString(sx));
  const int n = sx[0], d = sx[1];
  Tensor<T> out(sx);
  auto xhat = std::make_shared<std::vector<T>>(x->value.size());
  auto inv_std = std::make_shared<std::vector<T>>(n);
  for (int r = 0; r < n; ++r) {
    const T* xr = x->value.ptr() + static_cast<std::size_t>(r) * d;
    T mean = T(0);
    for (int i = 0; i < d; ++i) mean += xr[i];
    mean /= d;
    T var = T(0);
    for (int i = 0; i < d; ++i) var += (xr[i] - mean) * (xr[i] - mean);
    var /= d;
    const T is = T(1) / std::sqrt(var + eps);
    (*inv_std)[r] = is;
    for (int i = 0; i < d; ++i) {
      const std::size_t k = static_cast<std::size_t>(r) * d + i;
      (*xhat)[k] = (xr[i] - mean) * is;
      out.data[k] = (*xhat)[k] * gamma->value.data[i] + beta->value.data[i];
    }
  }
  return MakeNode<T>(std::move(out), {x, gamma, beta},
                     [x, gamma, beta, xhat, inv_std, n, d](Node<T>& self) {
    const T* g = self.grad.ptr();
    if (gamma->requires_grad || beta->requires_grad) {
      T* gg = gamma->requires_grad ? gamma->GradPtr() : nullptr;
      T* gb = beta->requires_grad ? beta->GradPtr() : nullptr;
      for (int r = 0; r < n; ++r)
        for (int i = 0; i < d; ++i) {
          const std::size_t k = static_cast<std::size_t>(r) * d + i;
          if (gg) gg[i] += g[k] * (*xhat)[k];
          if (gb) gb[i] += g[k];
        }
    }
    if (x->requires_grad) {
      T* gx = x->GradPtr();
      for (int r = 0; r < n; ++r) {
        T sum_dy = T(0), sum_dy_xhat = T(0);
        for (int i = 0; i < d; ++i) {
          const std::size_t k = static_cast<std::size_t>(r) * d + i;
          const T dy = g[k] * gamma->value.data[i];
          sum_dy += dy;
          sum_dy_xhat += dy * (*xhat)[k];
        }
        for (int i = 0; i < d; ++i) {
          const std::size_t k = static_cast<std::size_t>(r) * d + i;
          const T dy = g[k] * gamma->value.data[i];
          gx[k] += (*inv_std)[r] / d * (d * dy - sum_dy - (*xhat)[k] * sum_dy_xhat);
        }
      }
    }
  });
}

// ---- convolution

struct ConvGeometry {
  int kernel = 3;
  int stride = 2;
  int padding = 1;
};

// x [N, Ci, H, W], weight [Co, Ci, K, K], bias [Co] -> [N, Co, OH, OW] with
// OH = floor((H + 2p - K) / s) + 1.
template <typename T>
Var<T> Conv2dOp(const Var<T>& x, const Var<T>& weight, const Var<T>& bias,
                ConvGeometry geo = {}) {
  const auto& sx = x->value.shape;
  const auto& sw = weight->value.shape;
  detail::RequireShape(sx.size() == 4 && sw.size() == 4 && sx[1] == sw[1] &&
                           sw[2] == geo.kernel && sw[3] == geo.kernel &&
                           bias->value.size() == static_cast<std::size_t>(sw[0]),
                       "conv2d: input " + ShapeString(sx) + " vs weight " + ShapeString(sw));
  detail::RequireShape(sx[2] >= 1 && sx[3] >= 1, "conv2d: empty spatial extent");
  const int N = sx[0], Ci = sx[1], H = sx[2], W = sx[3], Co = sw[0], K = geo.kernel;
  const int OH = detail::ConvOutExtent(H, K, geo.stride, geo.padding);
  const int OW = detail::ConvOutExtent(W, K, geo.stride, geo.padding);
  detail::RequireShape(OH >= 1 && OW >= 1, "conv2d: output would be empty");
  const std::size_t in_plane = static_cast<std::size_t>(H) * W;
  const std::size_t out_plane = static_cast<std::size_t>(OH) * OW;
  Tensor<T> out({N, Co, OH, OW});
  for (int n = 0; n < N; ++n)
    for (int co = 0; co < Co; ++co) {
      T* o = out.ptr() + (static_cast<std::size_t>(n) * Co + co) * out_plane;
      std::fill_n(o, out_plane, bias->value.data[co]);
      for (int ci = 0; ci < Ci; ++ci)
        detail::CorrelateGather(x->value.ptr() + (static_cast<std::size_t>(n) * Ci + ci) * in_plane,
                                H, W,
                                weight->value.ptr() + (static_cast<std::size_t>(co) * Ci + ci) * K * K,
                                K, o, OH, OW, geo.stride, geo.padding);
    }
  return MakeNode<T>(std::move(out), {x, weight, bias}, [=](Node<T>& self) {
    const T* g = self.grad.ptr();
    T* gx = x->requires_grad ? x->GradPtr() : nullptr;
    T* gw = weight->requires_grad ? weight->GradPtr() : nullptr;
    for (int n = 0; n < N; ++n)
      for (int co = 0; co < Co; ++co) {
        const T* go = g + (static_cast<std::size_t>(n) * Co + co) * out_plane;
        for (int ci = 0; ci < Ci; ++ci) {
          const std::size_t xi = (static_cast<std::size_t>(n) * Ci + ci) * in_plane;
          const std::size_t wi = (static_cast<std::size_t>(co) * Ci + ci) * K * K;
          if (gx)
            detail::CorrelateScatter(gx + xi, H, W, weight->value.ptr() + wi, K, go, OH, OW,
                                     geo.stride, geo.padding);
          if (gw)
            detail::CorrelateWeightGrad(x->value.ptr() + xi, H, W, go, OH, OW, gw + wi, K,
                                        geo.stride, geo.padding);
        }
      }
    if (bias->requires_grad) {
      T* gb = bias->GradPtr();
      for (int n = 0; n < N; ++n)
        for (int co = 0; co < Co; ++co) {
          const T* go = g + (static_cast<std::size_t>(n) * Co + co) * out_plane;
          T acc = T(0);
          for (std::size_t i = 0; i < out_plane; ++i) acc += go[i];
          gb[co] += acc;
        }
    }
  });
}

// Natural (uncropped) output extent of a transposed convolution.
inline int ConvTransposeExtent(int n, const ConvGeometry& geo) {
  return (n - 1) * geo.stride - 2 * geo.padding + geo.kernel;
}

// Adjoint of Conv2dOp. x [N, Ci, H, W], weight [Ci, Co, K, K], bias [Co].
// The output is produced directly at (out_h, out_w): rows/columns past the
// natural extent are zero (before bias), rows/columns beyond the target are
// cropped. Targets must lie within one sample of the natural extent.
template <typename T>
Var<T> ConvTranspose2dOp(const Var<T>& x, const Var<T>& weight, const Var<T>& bias,
                         int out_h, int out_w, ConvGeometry geo = {}) {
  const auto& sx = x->value.shape;
  const auto& sw = weight->value.shape;
  detail::RequireShape(sx.size() == 4 && sw.size() == 4 && sx[1] == sw[0] &&
                           sw[2] == geo.kernel && sw[3] == geo.kernel &&
                           bias->value.size() == static_cast<std::size_t>(sw[1]),
                       "conv_transpose2d: input " + ShapeString(sx) + " vs weight " +
                           ShapeString(sw));
  const int N = sx[0], Ci = sx[1], H = sx[2], W = sx[3], Co = sw[1], K = geo.kernel;
  const int nat_h = ConvTransposeExtent(H, geo), nat_w = ConvTransposeExtent(W, geo);
  detail::RequireShape(std::abs(out_h - nat_h) <= 1 && std::abs(out_w - nat_w) <= 1 &&
                           detail::ConvOutExtent(out_h, K, geo.stride, geo.padding) == H &&
                           detail::ConvOutExtent(out_w, K, geo.stride, geo.padding) == W,
                       "conv_transpose2d: target " + std::to_string(out_h) + "x" +
                           std::to_string(out_w) + " incompatible with input " + ShapeString(sx));
  const std::size_t in_plane = static_cast<std::size_t>(H) * W;
  const std::size_t out_plane = static_cast<std::size_t>(out_h) * out_w;
  Tensor<T> out({N, Co, out_h, out_w});
  for (int n = 0; n < N; ++n)
    for (int co = 0; co < Co; ++co) {
      T* o = out.ptr() + (static_cast<std::size_t>(n) * Co + co) * out_plane;
      std::fill_n(o, out_plane, bias->value.data[co]);
      for (int ci = 0; ci < Ci; ++ci)
        detail::CorrelateScatter(o, out_h, out_w,
                                 weight->value.ptr() + (static_cast<std::size_t>(ci) * Co + co) * K * K,
                                 K, x->value.ptr() + (static_cast<std::size_t>(n) * Ci + ci) * in_plane,
                                 H, W, geo.stride, geo.padding);
    }
  return MakeNode<T>(std::move(out), {x, weight, bias}, [=](Node<T>& self) {
    const T* g = self.grad.ptr();
    T* gx = x->requires_grad ? x->GradPtr() : nullptr;
    T* gw = weight->requires_grad ? weight->GradPtr() : nullptr;
    for (int n = 0; n < N; ++n)
      for (int co = 0; co < Co; ++co) {
        const T* go = g + (static_cast<std::size_t>(n) * Co + co) * out_plane;
        for (int ci = 0; ci < Ci; ++ci) {
          const std::size_t xi = (static_cast<std::size_t>(n) * Ci + ci) * in_plane;
          const std::size_t wi = (static_cast<std::size_t>(ci) * Co + co) * K * K;
          if (gx)
            detail::CorrelateGather(go, out_h, out_w, weight->value.ptr() + wi, K, gx + xi, H, W,
                                    geo.stride, geo.padding);
          if (gw)
            detail::CorrelateWeightGrad(go, out_h, out_w, x->value.ptr() + xi, H, W, gw + wi, K,
                                        geo.stride, geo.padding);
        }
      }
    if (bias->requires_grad) {
      T* gb = bias->GradPtr();
      for (int n = 0; n < N; ++n)
        for (int co = 0; co < Co; ++co) {
          const T* go = g + (static_cast<std::size_t>(n) * Co + co) * out_plane;
          T acc = T(0);
          for (std::size_t i = 0; i < out_plane; ++i) acc += go[i];
          gb[co] += acc;
        }
    }
  });
}

// Per-channel batch normalization of [N, C, H, W]. In training mode the
// batch statistics normalize and the running buffers are updated in place
// (momentum-weighted, unbiased variance); in inference mode the running
// statistics are used and the op is a per-channel affine map.
template <typename T>
Var<T> BatchNorm2dOp(const Var<T>& x, const Var<T>& gamma, const Var<T>& beta,
                     Tensor<T>& running_mean, Tensor<T>& running_var, bool training,
                     T momentum = T(0.1), T eps = T(1e-5)) {
  const auto& sx = x->value.shape;
  detail::RequireShape(sx.size() == 4 && gamma->value.size() == static_cast<std::size_t>(sx[1]) &&
                           beta->value.size() == static_cast<std::size_t>(sx[1]) &&
                           running_mean.size() == static_cast<std::size_t>(sx[1]) &&
                           running_var.size() == static_cast<std::size_t>(sx[1]),
                       "batchnorm2d shape mismatch " + ShapeString(sx));
  const int N = sx[0], C = sx[1];
  const std::size_t plane = static_cast<std::size_t>(sx[2]) * sx[3];
  const std::size_t count = static_cast<std::size_t>(N) * plane;
  auto xhat = std::make_shared<std::vector<T>>(x->value.size());
  auto inv_std = std::make_shared<std::vector<T>>(C);
  Tensor<T> out(sx);
  for (int c = 0; c < C; ++c) {
    T mean, var;
    if (training) {
      mean = T(0);
      for (int n = 0; n < N; ++n) {
        const T* p = x->value.ptr() + (static_cast<std::size_t>(n) * C + c) * plane;
        for (std::size_t i = 0; i < plane; ++i) mean += p[i];
      }
      mean /= static_cast<T>(count);
      var = T(0);
      for (int n = 0; n < N; ++n) {
        const T* p = x->value.ptr() + (static_cast<std::size_t>(n) * C + c) * plane;
        for (std::size_t i = 0; i < plane; ++i) var += (p[i] - mean) * (p[i] - mean);
      }
      var /= static_cast<T>(count);
      const T unbiased = count > 1 ? var * static_cast<T>(count) / static_cast<T>(count - 1) : var;
      running_mean.data[c] = (T(1) - momentum) * running_mean.data[c] + momentum * mean;
      running_var.data[c] = (T(1) - momentum) * running_var.data[c] + momentum * unbiased;
    } else {
      mean = running_mean.data[c];
      var = running_var.data[c];
    }
    const T is = T(1) / std::sqrt(var + eps);
    (*inv_std)[c] = is;
    const T gm = gamma->value.data[c], bt = beta->value.data[c];
    for (int n = 0; n < N; ++n) {
      const std::size_t base = (static_cast<std::size_t>(n) * C + c) * plane;
      for (std::size_t i = 0; i < plane; ++i) {
        const T h = (x->value.data[base + i] - mean) * is;
        (*xhat)[base + i] = h;
        out.data[base + i] = gm * h + bt;
      }
    }
  }
  return MakeNode<T>(std::move(out), {x, gamma, beta}, [=](Node<T>& self) {
    const T* g = self.grad.ptr();
    T* gg = gamma->requires_grad ? gamma->GradPtr() : nullptr;
    T* gb = beta->requires_grad ? beta->GradPtr() : nullptr;
    T* gx = x->requires_grad ? x->GradPtr() : nullptr;
    for (int c = 0; c < C; ++c) {
      T sum_dy = T(0), sum_dy_xhat = T(0);
      for (int n = 0; n < N; ++n) {
        const std::size_t base = (static_cast<std::size_t>(n) * C + c) * plane;
        for (std::size_t i = 0; i < plane; ++i) {
          sum_dy += g[base + i];
          sum_dy_xhat += g[base + i] * (*xhat)[base + i];
        }
      }
      if (gg) gg[c] += sum_dy_xhat;
      if (gb) gb[c] += sum_dy;
      if (!gx) continue;
      const T gm = gamma->value.data[c];
      const T is = (*inv_std)[c];
      for (int n = 0; n < N; ++n) {
        const std::size_t base = (static_cast<std::size_t>(n) * C + c) * plane;
        for (std::size_t i = 0; i < plane; ++i) {
          if (training) {
            gx[base + i] += gm * is / static_cast<T>(count) *
                            (static_cast<T>(count) * g[base + i] - sum_dy -
                             (*xhat)[base + i] * sum_dy_xhat);
          } else {
            gx[base + i] += gm * is * g[base + i];
          }
        }
      }
    }
  });
}

}  // namespace ndst::nn
