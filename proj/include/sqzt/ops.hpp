#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <type_traits>
#include <string>
#include <vector>

#include "sqzt/kernels.hpp"
#include "sqzt/tensor.hpp"

// Forward and backward rules for every operator the network is assembled
// from. All functions are pure over their inputs; backward functions
// accumulate into caller-provided gradient tensors (pass nullptr to skip a
// gradient). Convolution follows the cross-correlation sign convention used
// throughout deep learning: out(x,y) = sum_m,i,j g(i,j,m) * h(x*s+i-p, y*s+j-p, m).
namespace sqzt::ops {

// ---------------------------------------------------------------------------
// shape helpers

struct ConvDims {
  int64_t n, ci, h, w, co, k, oh, ow;
  int stride, pad;
  bool batched;
};

template <typename T>
ConvDims conv_dims(const Tensor<T>& x, const Tensor<T>& kernel, int stride, int pad) {
  if (kernel.rank() != 4) {
    throw std::invalid_argument("conv2d: kernel must be rank 4 (c_out,c_in,k,k), got " +
                                kernel.shape_str());
  }
  if (kernel.extent(2) != kernel.extent(3)) {
    throw std::invalid_argument("conv2d: non-square kernel " + kernel.shape_str() + " rejected");
  }
  if (x.rank() != 3 && x.rank() != 4) {
    throw std::invalid_argument("conv2d: input must be (c,h,w) or (n,c,h,w), got " +
                                x.shape_str());
  }
  if (stride < 1) throw std::invalid_argument("conv2d: stride must be >= 1");
  if (pad < 0) throw std::invalid_argument("conv2d: padding must be >= 0");
  ConvDims d;
  d.batched = x.rank() == 4;
  d.n = d.batched ? x.extent(0) : 1;
  d.ci = x.extent(d.batched ? 1 : 0);
  d.h = x.extent(d.batched ? 2 : 1);
  d.w = x.extent(d.batched ? 3 : 2);
  d.co = kernel.extent(0);
  d.k = kernel.extent(2);
  d.stride = stride;
  d.pad = pad;
  if (d.ci != kernel.extent(1)) {
    throw std::invalid_argument("conv2d: input channel count " + std::to_string(d.ci) +
                                " != kernel c_in " + std::to_string(kernel.extent(1)));
  }
  if (d.h + 2 * pad < d.k || d.w + 2 * pad < d.k) {
    throw std::invalid_argument("conv2d: spatial extent " + std::to_string(d.h) + "x" +
                                std::to_string(d.w) + " with padding " + std::to_string(pad) +
                                " smaller than kernel " + std::to_string(d.k));
  }
  d.oh = (d.h + 2 * pad - d.k) / stride + 1;
  d.ow = (d.w + 2 * pad - d.k) / stride + 1;
  return d;
}

// Valid output range [o0, o1) such that o*s + kk - pad lands inside [0, extent).
inline void conv_valid_range(int64_t extent, int64_t out_extent, int64_t kk, int stride, int pad,
                             int64_t& o0, int64_t& o1) {
  const int64_t lo = pad - kk;  // need o*s >= lo
  o0 = lo <= 0 ? 0 : (lo + stride - 1) / stride;
  const int64_t hi = extent - 1 - kk + pad;  // need o*s <= hi
  o1 = hi < 0 ? o0 : std::min<int64_t>(out_extent, hi / stride + 1);
  if (o1 < o0) o1 = o0;
}

// ---------------------------------------------------------------------------
// conv2d

template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& kernel,
                 const Tensor<std::type_identity_t<T>>* bias, int stride, int pad) {
  const ConvDims d = conv_dims(x, kernel, stride, pad);
  if (bias != nullptr && bias->numel() != d.co) {
    throw std::invalid_argument("conv2d: bias length " + std::to_string(bias->numel()) +
                                " != c_out " + std::to_string(d.co));
  }
  Tensor<T> out(d.batched ? std::vector<int64_t>{d.n, d.co, d.oh, d.ow}
                          : std::vector<int64_t>{d.co, d.oh, d.ow});
  const int64_t in_plane = d.h * d.w, out_plane = d.oh * d.ow;
  for (int64_t nn = 0; nn < d.n; ++nn) {
    const T* xb = x.data() + nn * d.ci * in_plane;
    T* ob = out.data() + nn * d.co * out_plane;
    for (int64_t co = 0; co < d.co; ++co) {
      T* oplane = ob + co * out_plane;
      if (bias != nullptr) {
        std::fill(oplane, oplane + out_plane, (*bias)[co]);
      }
      for (int64_t ci = 0; ci < d.ci; ++ci) {
        const T* xplane = xb + ci * in_plane;
        const T* wbase = kernel.data() + (co * d.ci + ci) * d.k * d.k;
        for (int64_t ky = 0; ky < d.k; ++ky) {
          int64_t oy0, oy1;
          conv_valid_range(d.h, d.oh, ky, d.stride, d.pad, oy0, oy1);
          for (int64_t kx = 0; kx < d.k; ++kx) {
            const T wv = wbase[ky * d.k + kx];
            int64_t ox0, ox1;
            conv_valid_range(d.w, d.ow, kx, d.stride, d.pad, ox0, ox1);
            if (ox1 <= ox0) continue;
            for (int64_t oy = oy0; oy < oy1; ++oy) {
              const int64_t iy = oy * d.stride + ky - d.pad;
              const T* in_row = xplane + iy * d.w + (ox0 * d.stride + kx - d.pad);
              kern::axpy_s(wv, in_row, d.stride, oplane + oy * d.ow + ox0, 1,
                           static_cast<size_t>(ox1 - ox0));
            }
          }
        }
      }
    }
  }
  return out;
}

template <typename T>
void conv2d_bwd(const Tensor<T>& x, const Tensor<T>& kernel, const Tensor<T>& gout, int stride,
                int pad, Tensor<std::type_identity_t<T>>* gx,
                Tensor<std::type_identity_t<T>>* gkernel,
                Tensor<std::type_identity_t<T>>* gbias) {
  const ConvDims d = conv_dims(x, kernel, stride, pad);
  const int64_t in_plane = d.h * d.w, out_plane = d.oh * d.ow;
  if (gout.numel() != d.n * d.co * out_plane) {
    throw std::invalid_argument("conv2d_bwd: upstream gradient shape " + gout.shape_str() +
                                " does not match output");
  }
  for (int64_t nn = 0; nn < d.n; ++nn) {
    const T* xb = x.data() + nn * d.ci * in_plane;
    const T* gb = gout.data() + nn * d.co * out_plane;
    T* gxb = gx != nullptr ? gx->data() + nn * d.ci * in_plane : nullptr;
    for (int64_t co = 0; co < d.co; ++co) {
      const T* gplane = gb + co * out_plane;
      if (gbias != nullptr) {
        (*gbias)[co] += kern::sum(gplane, static_cast<size_t>(out_plane));
      }
      for (int64_t ci = 0; ci < d.ci; ++ci) {
        const T* xplane = xb + ci * in_plane;
        T* gxplane = gxb != nullptr ? gxb + ci * in_plane : nullptr;
        const int64_t woff = (co * d.ci + ci) * d.k * d.k;
        for (int64_t ky = 0; ky < d.k; ++ky) {
          int64_t oy0, oy1;
          conv_valid_range(d.h, d.oh, ky, d.stride, d.pad, oy0, oy1);
          for (int64_t kx = 0; kx < d.k; ++kx) {
            int64_t ox0, ox1;
            conv_valid_range(d.w, d.ow, kx, d.stride, d.pad, ox0, ox1);
            if (ox1 <= ox0) continue;
            const size_t len = static_cast<size_t>(ox1 - ox0);
            const T wv = kernel.data()[woff + ky * d.k + kx];
            T wgrad = 0;
            for (int64_t oy = oy0; oy < oy1; ++oy) {
              const int64_t iy = oy * d.stride + ky - d.pad;
              const int64_t ix0 = ox0 * d.stride + kx - d.pad;
              const T* grow = gplane + oy * d.ow + ox0;
              if (gkernel != nullptr) {
                wgrad += kern::dot_s(xplane + iy * d.w + ix0, d.stride, grow, 1, len);
              }
              if (gxplane != nullptr) {
                kern::axpy_s(wv, grow, 1, gxplane + iy * d.w + ix0, d.stride, len);
              }
            }
            if (gkernel != nullptr) gkernel->data()[woff + ky * d.k + kx] += wgrad;
          }
        }
      }
    }
  }
}

// ---------------------------------------------------------------------------
// channel scaling + temporal focus convolution

/// x (c,h,w) or (n,c,h,w) scaled per channel by weights (c) or per-sample (n,c).
template <typename T>
Tensor<T> scale_channels(const Tensor<T>& x, const Tensor<T>& weights) {
  const bool batched = x.rank() == 4;
  if (!batched && x.rank() != 3) {
    throw std::invalid_argument("scale_channels: input must be rank 3 or 4, got " + x.shape_str());
  }
  const int64_t n = batched ? x.extent(0) : 1;
  const int64_t c = x.extent(batched ? 1 : 0);
  const int64_t plane = x.extent(batched ? 2 : 1) * x.extent(batched ? 3 : 2);
  const bool per_sample = weights.rank() == 2;
  if ((per_sample && (weights.extent(0) != n || weights.extent(1) != c)) ||
      (!per_sample && weights.numel() != c)) {
    throw std::invalid_argument("scale_channels: weight length " + weights.shape_str() +
                                " does not match channel count " + std::to_string(c));
  }
  Tensor<T> out(x.shape());
  for (int64_t nn = 0; nn < n; ++nn) {
    for (int64_t ch = 0; ch < c; ++ch) {
      const T wv = per_sample ? weights[nn * c + ch] : weights[ch];
      const int64_t off = (nn * c + ch) * plane;
      kern::scale(x.data() + off, wv, out.data() + off, static_cast<size_t>(plane));
    }
  }
  return out;
}

/// Temporal focus convolution: conv2d with each input channel m scaled by
/// weights[m] before accumulation. Equivalent to conv2d(scale_channels(x,w), ...).
template <typename T>
Tensor<T> tfc2d(const Tensor<T>& x, const Tensor<T>& kernel, const Tensor<T>& channel_weights,
                const Tensor<std::type_identity_t<T>>* bias, int stride, int pad) {
  return conv2d(scale_channels(x, channel_weights), kernel, bias, stride, pad);
}

// ---------------------------------------------------------------------------
// linear

template <typename T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& weight,
                 const Tensor<std::type_identity_t<T>>* bias) {
  if (weight.rank() != 2) {
    throw std::invalid_argument("linear: weight must be rank 2, got " + weight.shape_str());
  }
  const bool batched = x.rank() == 2;
  if (!batched && x.rank() != 1) {
    throw std::invalid_argument("linear: input must be rank 1 or 2, got " + x.shape_str());
  }
  const int64_t n = batched ? x.extent(0) : 1;
  const int64_t din = x.extent(batched ? 1 : 0);
  const int64_t dout = weight.extent(0);
  if (din != weight.extent(1)) {
    throw std::invalid_argument("linear: input dim " + std::to_string(din) + " != weight d_in " +
                                std::to_string(weight.extent(1)));
  }
  if (bias != nullptr && bias->numel() != dout) {
    throw std::invalid_argument("linear: bias length " + std::to_string(bias->numel()) +
                                " != d_out " + std::to_string(dout));
  }
  Tensor<T> out(batched ? std::vector<int64_t>{n, dout} : std::vector<int64_t>{dout});
  for (int64_t nn = 0; nn < n; ++nn) {
    const T* xr = x.data() + nn * din;
    T* orow = out.data() + nn * dout;
    for (int64_t o = 0; o < dout; ++o) {
      T v = kern::dot(weight.data() + o * din, xr, static_cast<size_t>(din));
      if (bias != nullptr) v += (*bias)[o];
      orow[o] = v;
    }
  }
  return out;
}

template <typename T>
void linear_bwd(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& gout,
                Tensor<std::type_identity_t<T>>* gx, Tensor<std::type_identity_t<T>>* gweight,
                Tensor<std::type_identity_t<T>>* gbias) {
  const bool batched = x.rank() == 2;
  const int64_t n = batched ? x.extent(0) : 1;
  const int64_t din = x.extent(batched ? 1 : 0);
  const int64_t dout = weight.extent(0);
  for (int64_t nn = 0; nn < n; ++nn) {
    const T* xr = x.data() + nn * din;
    const T* gr = gout.data() + nn * dout;
    for (int64_t o = 0; o < dout; ++o) {
      const T g = gr[o];
      if (gx != nullptr) kern::axpy(g, weight.data() + o * din, gx->data() + nn * din,
                                    static_cast<size_t>(din));
      if (gweight != nullptr) kern::axpy(g, xr, gweight->data() + o * din,
                                         static_cast<size_t>(din));
      if (gbias != nullptr) (*gbias)[o] += g;
    }
  }
}

// ---------------------------------------------------------------------------
// global pooling

enum class PoolKind { global_max, global_avg };

template <typename T>
struct PoolLayout {
  int64_t n, c, plane;
  bool batched;
};

template <typename T>
PoolLayout<T> pool_layout(const Tensor<T>& x) {
  if (x.rank() != 3 && x.rank() != 4) {
    throw std::invalid_argument("pool: input must be (c,h,w) or (n,c,h,w), got " + x.shape_str());
  }
  const bool batched = x.rank() == 4;
  return {batched ? x.extent(0) : 1, x.extent(batched ? 1 : 0),
          x.extent(batched ? 2 : 1) * x.extent(batched ? 3 : 2), batched};
}

/// Per-channel global reduction; argmax (lowest linear index on ties) is
/// recorded for the max pool backward.
template <typename T>
Tensor<T> global_pool(const Tensor<T>& x, PoolKind kind,
                      std::vector<int64_t>* argmax = nullptr) {
  const auto L = pool_layout(x);
  Tensor<T> out(L.batched ? std::vector<int64_t>{L.n, L.c} : std::vector<int64_t>{L.c});
  if (argmax != nullptr) argmax->assign(static_cast<size_t>(L.n * L.c), 0);
  for (int64_t i = 0; i < L.n * L.c; ++i) {
    const T* plane = x.data() + i * L.plane;
    if (kind == PoolKind::global_avg) {
      out[i] = kern::sum(plane, static_cast<size_t>(L.plane)) / static_cast<T>(L.plane);
    } else {
      int64_t best = 0;
      for (int64_t j = 1; j < L.plane; ++j) {
        if (plane[j] > plane[best]) best = j;
      }
      out[i] = plane[best];
      if (argmax != nullptr) (*argmax)[static_cast<size_t>(i)] = best;
    }
  }
  return out;
}

template <typename T>
void global_pool_bwd(const Tensor<T>& x, PoolKind kind, const std::vector<int64_t>& argmax,
                     const Tensor<T>& gout, Tensor<T>& gx) {
  const auto L = pool_layout(x);
  for (int64_t i = 0; i < L.n * L.c; ++i) {
    T* gplane = gx.data() + i * L.plane;
    if (kind == PoolKind::global_avg) {
      const T g = gout[i] / static_cast<T>(L.plane);
      for (int64_t j = 0; j < L.plane; ++j) gplane[j] += g;
    } else {
      gplane[argmax[static_cast<size_t>(i)]] += gout[i];
    }
  }
}

/// 2x2 stride-2 average pool (window fully inside; trailing odd row/col dropped).
template <typename T>
Tensor<T> avgpool2x2(const Tensor<T>& x) {
  if (x.rank() != 4) throw std::invalid_argument("avgpool2x2: input must be (n,c,h,w)");
  const int64_t n = x.extent(0), c = x.extent(1), h = x.extent(2), w = x.extent(3);
  if (h < 2 || w < 2) {
    throw std::invalid_argument("avgpool2x2: spatial extent " + x.shape_str() + " below 2x2");
  }
  const int64_t oh = h / 2, ow = w / 2;
  Tensor<T> out({n, c, oh, ow});
  for (int64_t i = 0; i < n * c; ++i) {
    const T* p = x.data() + i * h * w;
    T* o = out.data() + i * oh * ow;
    for (int64_t y = 0; y < oh; ++y) {
      for (int64_t xx = 0; xx < ow; ++xx) {
        const T* r0 = p + (2 * y) * w + 2 * xx;
        const T* r1 = r0 + w;
        o[y * ow + xx] = (r0[0] + r0[1] + r1[0] + r1[1]) * T(0.25);
      }
    }
  }
  return out;
}

template <typename T>
void avgpool2x2_bwd(const Tensor<T>& x, const Tensor<T>& gout, Tensor<T>& gx) {
  const int64_t n = x.extent(0), c = x.extent(1), h = x.extent(2), w = x.extent(3);
  const int64_t oh = h / 2, ow = w / 2;
  for (int64_t i = 0; i < n * c; ++i) {
    const T* g = gout.data() + i * oh * ow;
    T* gp = gx.data() + i * h * w;
    for (int64_t y = 0; y < oh; ++y) {
      for (int64_t xx = 0; xx < ow; ++xx) {
        const T gv = g[y * ow + xx] * T(0.25);
        T* r0 = gp + (2 * y) * w + 2 * xx;
        T* r1 = r0 + w;
        r0[0] += gv;
        r0[1] += gv;
        r1[0] += gv;
        r1[1] += gv;
      }
    }
  }
}

// ---------------------------------------------------------------------------
// batch normalization

template <typename T>
struct BnCache {
  std::vector<T> mean, inv_std;
};

template <typename T>
void bn_check(const Tensor<T>& x, const Tensor<T>& gamma) {
  if (x.rank() != 4) {
    throw std::invalid_argument("batchnorm: input must be (n,c,h,w), got " + x.shape_str());
  }
  if (gamma.numel() != x.extent(1)) {
    throw std::invalid_argument("batchnorm: state channel count " +
                                std::to_string(gamma.numel()) + " != input channels " +
                                std::to_string(x.extent(1)));
  }
}

/// Train mode: normalize by batch statistics over (n,h,w), update running
/// stats by EMA (running = (1-momentum)*running + momentum*batch). Running
/// variance uses the unbiased estimate.
template <typename T>
Tensor<T> bn_train(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta,
                   Tensor<T>& running_mean, Tensor<T>& running_var, T eps, T momentum,
                   BnCache<T>& cache) {
  bn_check(x, gamma);
  const int64_t n = x.extent(0), c = x.extent(1), plane = x.extent(2) * x.extent(3);
  const int64_t m = n * plane;
  if (m < 2) {
    throw std::invalid_argument("batchnorm: train mode requires n*h*w >= 2, got " +
                                std::to_string(m) + " (variance undefined)");
  }
  cache.mean.assign(static_cast<size_t>(c), T(0));
  cache.inv_std.assign(static_cast<size_t>(c), T(0));
  Tensor<T> out(x.shape());
  for (int64_t ch = 0; ch < c; ++ch) {
    T s = 0;
    for (int64_t nn = 0; nn < n; ++nn) {
      s += kern::sum(x.data() + (nn * c + ch) * plane, static_cast<size_t>(plane));
    }
    const T mean = s / static_cast<T>(m);
    T sq = 0;
    for (int64_t nn = 0; nn < n; ++nn) {
      sq += kern::sqdiff_sum(x.data() + (nn * c + ch) * plane, mean, static_cast<size_t>(plane));
    }
    const T var = sq / static_cast<T>(m);
    const T inv = T(1) / std::sqrt(var + eps);
    cache.mean[static_cast<size_t>(ch)] = mean;
    cache.inv_std[static_cast<size_t>(ch)] = inv;
    running_mean[ch] = (T(1) - momentum) * running_mean[ch] + momentum * mean;
    const T var_unbiased = sq / static_cast<T>(m - 1);
    running_var[ch] = (T(1) - momentum) * running_var[ch] + momentum * var_unbiased;
    const T a = gamma[ch] * inv;
    for (int64_t nn = 0; nn < n; ++nn) {
      const int64_t off = (nn * c + ch) * plane;
      kern::norm_affine(x.data() + off, mean, a, beta[ch], out.data() + off,
                        static_cast<size_t>(plane));
    }
  }
  return out;
}

template <typename T>
Tensor<T> bn_infer(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta,
                   const Tensor<T>& running_mean, const Tensor<T>& running_var, T eps) {
  bn_check(x, gamma);
  const int64_t n = x.extent(0), c = x.extent(1), plane = x.extent(2) * x.extent(3);
  Tensor<T> out(x.shape());
  for (int64_t ch = 0; ch < c; ++ch) {
    const T a = gamma[ch] / std::sqrt(running_var[ch] + eps);
    for (int64_t nn = 0; nn < n; ++nn) {
      const int64_t off = (nn * c + ch) * plane;
      kern::norm_affine(x.data() + off, running_mean[ch], a, beta[ch], out.data() + off,
                        static_cast<size_t>(plane));
    }
  }
  return out;
}

/// Full batch-statistics chain rule.
template <typename T>
void bn_train_bwd(const Tensor<T>& x, const Tensor<T>& gamma, const BnCache<T>& cache,
                  const Tensor<T>& gout, Tensor<std::type_identity_t<T>>* gx,
                  Tensor<std::type_identity_t<T>>* ggamma, Tensor<std::type_identity_t<T>>* gbeta) {
  const int64_t n = x.extent(0), c = x.extent(1), plane = x.extent(2) * x.extent(3);
  const int64_t m = n * plane;
  for (int64_t ch = 0; ch < c; ++ch) {
    const T mean = cache.mean[static_cast<size_t>(ch)];
    const T inv = cache.inv_std[static_cast<size_t>(ch)];
    T gsum = 0, gxsum = 0;
    for (int64_t nn = 0; nn < n; ++nn) {
      const int64_t off = (nn * c + ch) * plane;
      gsum += kern::sum(gout.data() + off, static_cast<size_t>(plane));
      gxsum += kern::dot(gout.data() + off, x.data() + off, static_cast<size_t>(plane));
    }
    const T ggam = inv * (gxsum - mean * gsum);  // sum g * xhat
    if (ggamma != nullptr) (*ggamma)[ch] += ggam;
    if (gbeta != nullptr) (*gbeta)[ch] += gsum;
    if (gx != nullptr) {
      // gx = gamma*inv*(g - gsum/m - xhat*ggam/m) expanded to c1*g + c2*x + c3
      const T c1 = gamma[ch] * inv;
      const T c2 = -gamma[ch] * inv * inv * ggam / static_cast<T>(m);
      const T c3 = -c1 * gsum / static_cast<T>(m) - c2 * mean;
      for (int64_t nn = 0; nn < n; ++nn) {
        const int64_t off = (nn * c + ch) * plane;
        T* gp = gx->data() + off;
        kern::axpy(c1, gout.data() + off, gp, static_cast<size_t>(plane));
        kern::axpy(c2, x.data() + off, gp, static_cast<size_t>(plane));
        for (int64_t j = 0; j < plane; ++j) gp[j] += c3;
      }
    }
  }
}

template <typename T>
void bn_infer_bwd(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& running_mean,
                  const Tensor<T>& running_var, T eps, const Tensor<T>& gout,
                  Tensor<std::type_identity_t<T>>* gx, Tensor<std::type_identity_t<T>>* ggamma,
                  Tensor<std::type_identity_t<T>>* gbeta) {
  const int64_t n = x.extent(0), c = x.extent(1), plane = x.extent(2) * x.extent(3);
  for (int64_t ch = 0; ch < c; ++ch) {
    const T inv = T(1) / std::sqrt(running_var[ch] + eps);
    for (int64_t nn = 0; nn < n; ++nn) {
      const int64_t off = (nn * c + ch) * plane;
      if (gx != nullptr) {
        kern::axpy(gamma[ch] * inv, gout.data() + off, gx->data() + off,
                   static_cast<size_t>(plane));
      }
      if (ggamma != nullptr) {
        const T gsum = kern::sum(gout.data() + off, static_cast<size_t>(plane));
        const T gxdot = kern::dot(gout.data() + off, x.data() + off, static_cast<size_t>(plane));
        (*ggamma)[ch] += inv * (gxdot - running_mean[ch] * gsum);
        if (gbeta != nullptr) (*gbeta)[ch] += gsum;
      } else if (gbeta != nullptr) {
        (*gbeta)[ch] += kern::sum(gout.data() + off, static_cast<size_t>(plane));
      }
    }
  }
}

// ---------------------------------------------------------------------------
// pointwise

template <typename T>
Tensor<T> relu(const Tensor<T>& x) {
  Tensor<T> out(x.shape());
  kern::relu(x.data(), out.data(), static_cast<size_t>(x.numel()));
  return out;
}

/// gx += g * 1[y > 0]; y is the forward output.
template <typename T>
void relu_bwd(const Tensor<T>& y, const Tensor<T>& g, Tensor<T>& gx) {
  kern::relu_bwd(y.data(), g.data(), gx.data(), static_cast<size_t>(y.numel()));
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x) {
  Tensor<T> out(x.shape());
  for (int64_t i = 0; i < x.numel(); ++i) {
    const T v = x[i];
    if (v >= T(0)) {
      out[i] = T(1) / (T(1) + std::exp(-v));
    } else {
      const T e = std::exp(v);
      out[i] = e / (T(1) + e);
    }
  }
  return out;
}

template <typename T>
void sigmoid_bwd(const Tensor<T>& y, const Tensor<T>& g, Tensor<T>& gx) {
  for (int64_t i = 0; i < y.numel(); ++i) gx[i] += g[i] * y[i] * (T(1) - y[i]);
}

// ---------------------------------------------------------------------------
// broadcast add / mul (trailing-1 broadcasting, shapes right-aligned)

struct BcastPlan {
  std::vector<int64_t> out_shape;
  std::vector<int64_t> sa, sb;  // strides into a and b per out axis (0 = broadcast)
  int64_t rows, row_len;
  int rank;
};

inline BcastPlan bcast_plan(const std::vector<int64_t>& a, const std::vector<int64_t>& b) {
  const int ra = static_cast<int>(a.size()), rb = static_cast<int>(b.size());
  const int r = std::max(ra, rb);
  BcastPlan p;
  p.rank = r;
  p.out_shape.resize(static_cast<size_t>(r));
  std::vector<int64_t> ea(static_cast<size_t>(r), 1), eb(static_cast<size_t>(r), 1);
  for (int i = 0; i < ra; ++i) ea[static_cast<size_t>(r - ra + i)] = a[static_cast<size_t>(i)];
  for (int i = 0; i < rb; ++i) eb[static_cast<size_t>(r - rb + i)] = b[static_cast<size_t>(i)];
  for (int i = 0; i < r; ++i) {
    const int64_t xa = ea[static_cast<size_t>(i)], xb = eb[static_cast<size_t>(i)];
    if (xa != xb && xa != 1 && xb != 1) {
      std::string sa_s = "(", sb_s = "(";
      for (size_t j = 0; j < a.size(); ++j) sa_s += (j ? "," : "") + std::to_string(a[j]);
      for (size_t j = 0; j < b.size(); ++j) sb_s += (j ? "," : "") + std::to_string(b[j]);
      throw std::invalid_argument("broadcast: shapes " + sa_s + ") and " + sb_s +
                                  ") are not broadcastable on axis " + std::to_string(i));
    }
    p.out_shape[static_cast<size_t>(i)] = std::max(xa, xb);
  }
  // row-major strides of a/b, zeroed on broadcast axes
  p.sa.assign(static_cast<size_t>(r), 0);
  p.sb.assign(static_cast<size_t>(r), 0);
  int64_t st = 1;
  for (int i = r - 1; i >= 0; --i) {
    p.sa[static_cast<size_t>(i)] = ea[static_cast<size_t>(i)] == 1 ? 0 : st;
    st *= ea[static_cast<size_t>(i)];
  }
  st = 1;
  for (int i = r - 1; i >= 0; --i) {
    p.sb[static_cast<size_t>(i)] = eb[static_cast<size_t>(i)] == 1 ? 0 : st;
    st *= eb[static_cast<size_t>(i)];
  }
  p.row_len = p.out_shape.back();
  p.rows = 1;
  for (int i = 0; i < r - 1; ++i) p.rows *= p.out_shape[static_cast<size_t>(i)];
  return p;
}

inline void bcast_offsets(const BcastPlan& p, int64_t row, int64_t& offa, int64_t& offb) {
  offa = 0;
  offb = 0;
  int64_t rem = row;
  for (int i = p.rank - 2; i >= 0; --i) {
    const int64_t coord = rem % p.out_shape[static_cast<size_t>(i)];
    rem /= p.out_shape[static_cast<size_t>(i)];
    offa += coord * p.sa[static_cast<size_t>(i)];
    offb += coord * p.sb[static_cast<size_t>(i)];
  }
}

enum class BinKind { add, mul };

template <typename T>
Tensor<T> binary_bc(const Tensor<T>& a, const Tensor<T>& b, BinKind kind) {
  const BcastPlan p = bcast_plan(a.shape(), b.shape());
  Tensor<T> out(p.out_shape);
  const size_t len = static_cast<size_t>(p.row_len);
  for (int64_t row = 0; row < p.rows; ++row) {
    int64_t oa, ob;
    bcast_offsets(p, row, oa, ob);
    const T* pa = a.data() + oa;
    const T* pb = b.data() + ob;
    T* po = out.data() + row * p.row_len;
    const bool va = p.sa.back() != 0, vb = p.sb.back() != 0;
    if (kind == BinKind::add) {
      if (va && vb) {
        kern::add(pa, pb, po, len);
      } else if (va) {
        kern::scale_shift(pa, T(1), *pb, po, len);
      } else if (vb) {
        kern::scale_shift(pb, T(1), *pa, po, len);
      } else {
        std::fill(po, po + len, *pa + *pb);
      }
    } else {
      if (va && vb) {
        kern::mul(pa, pb, po, len);
      } else if (va) {
        kern::scale(pa, *pb, po, len);
      } else if (vb) {
        kern::scale(pb, *pa, po, len);
      } else {
        std::fill(po, po + len, *pa * *pb);
      }
    }
  }
  return out;
}

template <typename T>
Tensor<T> add_bc(const Tensor<T>& a, const Tensor<T>& b) {
  return binary_bc(a, b, BinKind::add);
}
template <typename T>
Tensor<T> mul_bc(const Tensor<T>& a, const Tensor<T>& b) {
  return binary_bc(a, b, BinKind::mul);
}

/// Accumulates gradients of add_bc/mul_bc; broadcast axes are sum-reduced.
template <typename T>
void binary_bc_bwd(const Tensor<T>& a, const Tensor<T>& b, const Tensor<T>& gout, BinKind kind,
                   Tensor<std::type_identity_t<T>>* ga, Tensor<std::type_identity_t<T>>* gb) {
  const BcastPlan p = bcast_plan(a.shape(), b.shape());
  const size_t len = static_cast<size_t>(p.row_len);
  for (int64_t row = 0; row < p.rows; ++row) {
    int64_t oa, ob;
    bcast_offsets(p, row, oa, ob);
    const T* pa = a.data() + oa;
    const T* pb = b.data() + ob;
    const T* pg = gout.data() + row * p.row_len;
    const bool va = p.sa.back() != 0, vb = p.sb.back() != 0;
    if (ga != nullptr) {
      T* pga = ga->data() + oa;
      if (kind == BinKind::add) {
        if (va) {
          kern::axpy(T(1), pg, pga, len);
        } else {
          *pga += kern::sum(pg, len);
        }
      } else {
        if (va && vb) {
          kern::mul_acc(pg, pb, pga, len);
        } else if (va) {
          kern::axpy(*pb, pg, pga, len);
        } else if (vb) {
          *pga += kern::dot(pg, pb, len);
        } else {
          *pga += kern::sum(pg, len) * *pb;
        }
      }
    }
    if (gb != nullptr) {
      T* pgb = gb->data() + ob;
      if (kind == BinKind::add) {
        if (vb) {
          kern::axpy(T(1), pg, pgb, len);
        } else {
          *pgb += kern::sum(pg, len);
        }
      } else {
        if (va && vb) {
          kern::mul_acc(pg, pa, pgb, len);
        } else if (vb) {
          kern::axpy(*pa, pg, pgb, len);
        } else if (va) {
          *pgb += kern::dot(pg, pa, len);
        } else {
          *pgb += kern::sum(pg, len) * *pa;
        }
      }
    }
  }
}

// ---------------------------------------------------------------------------
// softmax cross-entropy

template <typename T>
void softmax_row(const T* logits, T* probs, int64_t k) {
  T m = logits[0];
  for (int64_t j = 1; j < k; ++j) m = std::max(m, logits[j]);
  T z = 0;
  for (int64_t j = 0; j < k; ++j) {
    probs[j] = std::exp(logits[j] - m);
    z += probs[j];
  }
  for (int64_t j = 0; j < k; ++j) probs[j] /= z;
}

/// Mean softmax cross-entropy over the batch; probs cache is used by backward.
template <typename T>
T softmax_ce(const Tensor<T>& logits, const std::vector<int>& labels, Tensor<T>& probs) {
  if (logits.rank() != 2) {
    throw std::invalid_argument("softmax_ce: logits must be (n,classes), got " +
                                logits.shape_str());
  }
  const int64_t n = logits.extent(0), k = logits.extent(1);
  if (static_cast<int64_t>(labels.size()) != n) {
    throw std::invalid_argument("softmax_ce: label count " + std::to_string(labels.size()) +
                                " != batch size " + std::to_string(n));
  }
  probs = Tensor<T>({n, k});
  T loss = 0;
  for (int64_t i = 0; i < n; ++i) {
    const T* row = logits.data() + i * k;
    T m = row[0];
    for (int64_t j = 1; j < k; ++j) m = std::max(m, row[j]);
    T z = 0;
    for (int64_t j = 0; j < k; ++j) z += std::exp(row[j] - m);
    const T logz = std::log(z);
    const int y = labels[static_cast<size_t>(i)];
    if (y < 0 || y >= k) {
      throw std::invalid_argument("softmax_ce: label " + std::to_string(y) +
                                  " out of range for " + std::to_string(k) + " classes");
    }
    loss += logz - (row[y] - m);
    for (int64_t j = 0; j < k; ++j) probs[i * k + j] = std::exp(row[j] - m) / z;
  }
  return loss / static_cast<T>(n);
}

template <typename T>
void softmax_ce_bwd(const Tensor<T>& probs, const std::vector<int>& labels, T gloss,
                    Tensor<T>& glogits) {
  const int64_t n = probs.extent(0), k = probs.extent(1);
  const T scale = gloss / static_cast<T>(n);
  for (int64_t i = 0; i < n; ++i) {
    for (int64_t j = 0; j < k; ++j) {
      T v = probs[i * k + j];
      if (j == labels[static_cast<size_t>(i)]) v -= T(1);
      glogits[i * k + j] += v * scale;
    }
  }
}

}  // namespace sqzt::ops
