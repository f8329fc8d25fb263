// Copyright 2026 The mbnet Authors. All Rights Reserved.
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

// Reference forward ops. Every loop here is the direct definition of the
// operation; the fast paths in fast_conv.hpp are verified against these.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "mbnet/error.hpp"
#include "mbnet/tensor.hpp"

namespace mbnet {

enum class Padding { kSame, kValid };

struct ConvConfig {
  std::size_t stride = 1;
  Padding padding = Padding::kSame;
};

// Output size and zero padding along one spatial axis.
struct AxisGeometry {
  std::size_t out = 0;
  std::size_t pad_before = 0;
  std::size_t pad_after = 0;
};

// Same: out = ceil(in/stride), extra padding goes after (bottom/right).
inline AxisGeometry axis_geometry(std::size_t in, std::size_t k, const ConvConfig& cfg) {
  if (cfg.stride == 0) throw ValidationError("stride must be >= 1");
  AxisGeometry g;
  if (cfg.padding == Padding::kSame) {
    g.out = (in + cfg.stride - 1) / cfg.stride;
    std::size_t need = (g.out - 1) * cfg.stride + k;
    std::size_t total = need > in ? need - in : 0;
    g.pad_before = total / 2;
    g.pad_after = total - g.pad_before;
  } else {
    if (k > in) throw ShapeError("kernel larger than input under valid padding");
    g.out = (in - k) / cfg.stride + 1;
  }
  return g;
}

struct ConvGeometry {
  std::size_t batch, in_h, in_w, in_c;
  std::size_t k_h, k_w;
  std::size_t out_h, out_w, out_c;
  std::size_t stride;
  std::size_t pad_top, pad_left;
};

inline ConvGeometry conv_geometry(const Shape& in, std::size_t k_h, std::size_t k_w,
                                  std::size_t out_c, const ConvConfig& cfg) {
  if (in.rank() != 4) throw ShapeError("conv input must be rank 4 (N,H,W,C), got " + in.str());
  AxisGeometry gh = axis_geometry(in.height(), k_h, cfg);
  AxisGeometry gw = axis_geometry(in.width(), k_w, cfg);
  return ConvGeometry{in.batch(), in.height(), in.width(), in.channels(), k_h,   k_w,
                      gh.out,     gw.out,      out_c,      cfg.stride,    gh.pad_before, gw.pad_before};
}

#ifdef MBNET_COUNT_MACS
// Multiply-accumulates executed by the reference convolutions, padded taps
// included. Only compiled into instrumented builds.
inline thread_local std::uint64_t reference_mac_count = 0;
#define MBNET_COUNT_MAC(n) (::mbnet::reference_mac_count += (n))
#else
#define MBNET_COUNT_MAC(n) ((void)0)
#endif

namespace detail {

// Input value at a possibly-padded position, or zero.
template <typename T>
inline T padded_at(const BasicTensor<T>& x, const ConvGeometry& g, std::size_t n, long ih, long iw,
                   std::size_t c) {
  if (ih < 0 || iw < 0 || ih >= static_cast<long>(g.in_h) || iw >= static_cast<long>(g.in_w)) {
    return T(0);
  }
  return x[((n * g.in_h + static_cast<std::size_t>(ih)) * g.in_w + static_cast<std::size_t>(iw)) *
               g.in_c +
           c];
}

inline long tap_row(const ConvGeometry& g, std::size_t oh, std::size_t i) {
  return static_cast<long>(oh * g.stride + i) - static_cast<long>(g.pad_top);
}
inline long tap_col(const ConvGeometry& g, std::size_t ow, std::size_t j) {
  return static_cast<long>(ow * g.stride + j) - static_cast<long>(g.pad_left);
}

}  // namespace detail

// Standard convolution. kernel is (k_h, k_w, in_channels, out_channels).
template <typename T>
BasicTensor<T> conv2d_std_ref(const BasicTensor<T>& input, const BasicTensor<T>& kernel,
                              const ConvConfig& cfg) {
  const Shape& ks = kernel.shape();
  if (ks.rank() != 4) throw ShapeError("standard conv kernel must be rank 4, got " + ks.str());
  if (input.shape().rank() != 4 || input.shape().channels() != ks[2]) {
    throw ShapeError("conv channel mismatch: input " + input.shape().str() + ", kernel " + ks.str());
  }
  ConvGeometry g = conv_geometry(input.shape(), ks[0], ks[1], ks[3], cfg);
  BasicTensor<T> out(Shape{g.batch, g.out_h, g.out_w, g.out_c});
  std::vector<T> acc(g.out_c);
  for (std::size_t n = 0; n < g.batch; ++n) {
    for (std::size_t oh = 0; oh < g.out_h; ++oh) {
      for (std::size_t ow = 0; ow < g.out_w; ++ow) {
        std::fill(acc.begin(), acc.end(), T(0));
        for (std::size_t i = 0; i < g.k_h; ++i) {
          for (std::size_t j = 0; j < g.k_w; ++j) {
            long ih = detail::tap_row(g, oh, i);
            long iw = detail::tap_col(g, ow, j);
            for (std::size_t m = 0; m < g.in_c; ++m) {
              T x = detail::padded_at(input, g, n, ih, iw, m);
              const T* w = kernel.raw() + ((i * g.k_w + j) * g.in_c + m) * g.out_c;
              for (std::size_t oc = 0; oc < g.out_c; ++oc) acc[oc] += w[oc] * x;
              MBNET_COUNT_MAC(g.out_c);
            }
          }
        }
        T* o = out.raw() + ((n * g.out_h + oh) * g.out_w + ow) * g.out_c;
        std::copy(acc.begin(), acc.end(), o);
      }
    }
  }
  return out;
}

// Depthwise convolution: one k_h x k_w filter per channel. kernel is
// (k_h, k_w, channels).
template <typename T>
BasicTensor<T> conv2d_depthwise_ref(const BasicTensor<T>& input, const BasicTensor<T>& kernel,
                                    const ConvConfig& cfg) {
  const Shape& ks = kernel.shape();
  if (ks.rank() != 3) throw ShapeError("depthwise kernel must be rank 3, got " + ks.str());
  if (input.shape().rank() != 4 || input.shape().channels() != ks[2]) {
    throw ShapeError("depthwise channel mismatch: input " + input.shape().str() + ", kernel " +
                     ks.str());
  }
  ConvGeometry g = conv_geometry(input.shape(), ks[0], ks[1], ks[2], cfg);
  BasicTensor<T> out(Shape{g.batch, g.out_h, g.out_w, g.out_c});
  for (std::size_t n = 0; n < g.batch; ++n) {
    for (std::size_t oh = 0; oh < g.out_h; ++oh) {
      for (std::size_t ow = 0; ow < g.out_w; ++ow) {
        for (std::size_t c = 0; c < g.in_c; ++c) {
          T acc = 0;
          for (std::size_t i = 0; i < g.k_h; ++i) {
            for (std::size_t j = 0; j < g.k_w; ++j) {
              T x = detail::padded_at(input, g, n, detail::tap_row(g, oh, i),
                                      detail::tap_col(g, ow, j), c);
              acc += kernel[(i * g.k_w + j) * g.in_c + c] * x;
            }
          }
          MBNET_COUNT_MAC(g.k_h * g.k_w);
          out[((n * g.out_h + oh) * g.out_w + ow) * g.out_c + c] = acc;
        }
      }
    }
  }
  return out;
}

// 1x1 convolution: per-pixel channel mixing. kernel is (1, 1, M, N).
template <typename T>
BasicTensor<T> conv2d_pointwise_ref(const BasicTensor<T>& input, const BasicTensor<T>& kernel) {
  const Shape& ks = kernel.shape();
  if (ks.rank() != 4 || ks[0] != 1 || ks[1] != 1) {
    throw ShapeError("pointwise kernel must be (1,1,M,N), got " + ks.str());
  }
  const Shape& is = input.shape();
  if (is.rank() != 4 || is.channels() != ks[2]) {
    throw ShapeError("pointwise channel mismatch: input " + is.str() + ", kernel " + ks.str());
  }
  std::size_t m_ch = ks[2], n_ch = ks[3];
  std::size_t pixels = is.batch() * is.height() * is.width();
  BasicTensor<T> out(Shape{is.batch(), is.height(), is.width(), n_ch});
  for (std::size_t p = 0; p < pixels; ++p) {
    const T* x = input.raw() + p * m_ch;
    T* y = out.raw() + p * n_ch;
    for (std::size_t m = 0; m < m_ch; ++m) {
      const T* w = kernel.raw() + m * n_ch;
      for (std::size_t oc = 0; oc < n_ch; ++oc) y[oc] += w[oc] * x[m];
    }
    MBNET_COUNT_MAC(m_ch * n_ch);
  }
  return out;
}

enum class BnMode { kTrain, kInfer };

template <typename T>
struct BatchNormParams {
  std::vector<T> gamma, beta, running_mean, running_var;
  T epsilon = T(1e-3);

  static BatchNormParams identity(std::size_t channels, T eps = T(1e-3)) {
    return BatchNormParams{std::vector<T>(channels, T(1)), std::vector<T>(channels, T(0)),
                           std::vector<T>(channels, T(0)), std::vector<T>(channels, T(1)), eps};
  }

  std::size_t channels() const { return gamma.size(); }

  void validate(std::size_t channels) const {
    if (gamma.size() != channels || beta.size() != channels || running_mean.size() != channels ||
        running_var.size() != channels) {
      throw ShapeError("batchnorm parameter length does not match channel count " +
                       std::to_string(channels));
    }
    for (T v : running_var) {
      if (!(v >= 0)) throw ValidationError("batchnorm running variance must be >= 0");
    }
  }
};

template <typename T>
struct BatchNormResult {
  BasicTensor<T> output;
  // Filled in train mode only: biased batch statistics over (batch, h, w).
  std::vector<T> batch_mean, batch_var;
};

// Per-channel affine normalization over the last dim.
// Infer: y = gamma*(x - running_mean)/sqrt(running_var + eps) + beta.
// Train: same with the batch mean and biased batch variance.
template <typename T>
BatchNormResult<T> batchnorm_fwd(const BasicTensor<T>& input, const BatchNormParams<T>& p,
                                 BnMode mode) {
  std::size_t c_n = input.shape().channels();
  p.validate(c_n);
  std::size_t rows = input.size() / c_n;
  BatchNormResult<T> r;
  std::vector<T> mean(c_n), var(c_n);
  if (mode == BnMode::kTrain) {
    for (std::size_t i = 0; i < rows; ++i) {
      for (std::size_t c = 0; c < c_n; ++c) mean[c] += input[i * c_n + c];
    }
    for (auto& m : mean) m /= static_cast<T>(rows);
    for (std::size_t i = 0; i < rows; ++i) {
      for (std::size_t c = 0; c < c_n; ++c) {
        T d = input[i * c_n + c] - mean[c];
        var[c] += d * d;
      }
    }
    for (auto& v : var) v /= static_cast<T>(rows);
    r.batch_mean = mean;
    r.batch_var = var;
  } else {
    mean = p.running_mean;
    var = p.running_var;
  }
  std::vector<T> scale(c_n), shift(c_n);
  for (std::size_t c = 0; c < c_n; ++c) {
    T denom = var[c] + p.epsilon;
    if (!(denom > 0)) {
      throw ValidationError("batchnorm variance + epsilon must be positive (channel " +
                            std::to_string(c) + ")");
    }
    scale[c] = p.gamma[c] / std::sqrt(denom);
    shift[c] = p.beta[c];
  }
  r.output = BasicTensor<T>(input.shape());
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t c = 0; c < c_n; ++c) {
      r.output[i * c_n + c] = (input[i * c_n + c] - mean[c]) * scale[c] + shift[c];
    }
  }
  return r;
}

template <typename T>
BasicTensor<T> relu(const BasicTensor<T>& input) {
  BasicTensor<T> out(input.shape());
  for (std::size_t i = 0; i < input.size(); ++i) out[i] = std::max(input[i], T(0));
  return out;
}

// Mean over all spatial positions: (N,H,W,C) -> (N,1,1,C).
template <typename T>
BasicTensor<T> avgpool_global(const BasicTensor<T>& input) {
  const Shape& s = input.shape();
  if (s.rank() != 4) throw ShapeError("avgpool input must be rank 4, got " + s.str());
  std::size_t hw = s.height() * s.width(), c_n = s.channels();
  BasicTensor<T> out(Shape{s.batch(), 1, 1, c_n});
  for (std::size_t n = 0; n < s.batch(); ++n) {
    for (std::size_t p = 0; p < hw; ++p) {
      for (std::size_t c = 0; c < c_n; ++c) out[n * c_n + c] += input[(n * hw + p) * c_n + c];
    }
    for (std::size_t c = 0; c < c_n; ++c) out[n * c_n + c] /= static_cast<T>(hw);
  }
  return out;
}

// Flattens every dim after the first into features.
template <typename T>
std::size_t feature_count(const BasicTensor<T>& input) {
  return input.size() / input.shape()[0];
}

// y = x W + b with W shaped (in, out); output is (batch, out).
template <typename T>
BasicTensor<T> fully_connected(const BasicTensor<T>& input, const BasicTensor<T>& weights,
                               const BasicTensor<T>& bias) {
  const Shape& ws = weights.shape();
  if (ws.rank() != 2) throw ShapeError("fc weights must be rank 2 (in,out), got " + ws.str());
  std::size_t batch = input.shape()[0], in_f = feature_count(input);
  if (in_f != ws[0]) {
    throw ShapeError("fc input features " + std::to_string(in_f) + " do not match weights " +
                     ws.str());
  }
  if (bias.shape() != Shape{ws[1]}) throw ShapeError("fc bias must be (" + std::to_string(ws[1]) + ")");
  std::size_t out_f = ws[1];
  BasicTensor<T> out(Shape{batch, out_f});
  for (std::size_t n = 0; n < batch; ++n) {
    T* y = out.raw() + n * out_f;
    for (std::size_t o = 0; o < out_f; ++o) y[o] = bias[o];
    for (std::size_t i = 0; i < in_f; ++i) {
      T x = input[n * in_f + i];
      const T* w = weights.raw() + i * out_f;
      for (std::size_t o = 0; o < out_f; ++o) y[o] += w[o] * x;
    }
  }
  return out;
}

// Row-wise softmax over the last dim, shifted by the row max.
template <typename T>
BasicTensor<T> softmax(const BasicTensor<T>& input) {
  std::size_t k = input.shape().dims().back();
  std::size_t rows = input.size() / k;
  BasicTensor<T> out(input.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    const T* x = input.raw() + r * k;
    T* y = out.raw() + r * k;
    T mx = *std::max_element(x, x + k);
    T sum = 0;
    for (std::size_t i = 0; i < k; ++i) {
      y[i] = std::exp(x[i] - mx);
      sum += y[i];
    }
    for (std::size_t i = 0; i < k; ++i) y[i] /= sum;
  }
  return out;
}

// Adds a per-channel bias along the last dim.
template <typename T>
void add_channel_bias(BasicTensor<T>& t, const BasicTensor<T>& bias) {
  std::size_t c_n = t.shape().dims().back();
  if (bias.size() != c_n) throw ShapeError("bias length does not match channels");
  for (std::size_t i = 0; i < t.size(); ++i) t[i] += bias[i % c_n];
}

// dw -> BN -> ReLU -> pw -> BN -> ReLU.
template <typename T>
BasicTensor<T> depthwise_separable_ref(const BasicTensor<T>& input, const BasicTensor<T>& dw_kernel,
                                       const BasicTensor<T>& pw_kernel, const ConvConfig& cfg,
                                       const BatchNormParams<T>& dw_bn,
                                       const BatchNormParams<T>& pw_bn) {
  auto h = relu(batchnorm_fwd(conv2d_depthwise_ref(input, dw_kernel, cfg), dw_bn, BnMode::kInfer).output);
  return relu(batchnorm_fwd(conv2d_pointwise_ref(h, pw_kernel), pw_bn, BnMode::kInfer).output);
}

}  // namespace mbnet
