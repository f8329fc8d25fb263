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

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "mbnet/error.hpp"
#include "mbnet/ops.hpp"
#include "mbnet/tensor.hpp"

namespace mbnet {

template <typename T>
struct ConvGrads {
  BasicTensor<T> d_input;
  BasicTensor<T> d_kernel;
};

namespace detail {

template <typename T>
void require_cached(const BasicTensor<T>& t, const char* what) {
  if (t.empty()) throw ValidationError(std::string("backward pass is missing cached ") + what);
}

}  // namespace detail

template <typename T>
ConvGrads<T> conv2d_std_bwd(const BasicTensor<T>& input, const BasicTensor<T>& kernel,
                            const BasicTensor<T>& d_out, const ConvConfig& cfg) {
  detail::require_cached(input, "conv input");
  const Shape& ks = kernel.shape();
  ConvGeometry g = conv_geometry(input.shape(), ks[0], ks[1], ks[3], cfg);
  if (d_out.shape() != Shape{g.batch, g.out_h, g.out_w, g.out_c}) {
    throw ShapeError("conv grad shape " + d_out.shape().str() + " does not match forward output");
  }
  ConvGrads<T> r{BasicTensor<T>(input.shape()), BasicTensor<T>(ks)};
  for (std::size_t n = 0; n < g.batch; ++n) {
    for (std::size_t oh = 0; oh < g.out_h; ++oh) {
      for (std::size_t ow = 0; ow < g.out_w; ++ow) {
        const T* dy = d_out.raw() + ((n * g.out_h + oh) * g.out_w + ow) * g.out_c;
        for (std::size_t i = 0; i < g.k_h; ++i) {
          long ih = detail::tap_row(g, oh, i);
          if (ih < 0 || ih >= static_cast<long>(g.in_h)) continue;
          for (std::size_t j = 0; j < g.k_w; ++j) {
            long iw = detail::tap_col(g, ow, j);
            if (iw < 0 || iw >= static_cast<long>(g.in_w)) continue;
            std::size_t in_off =
                ((n * g.in_h + static_cast<std::size_t>(ih)) * g.in_w + static_cast<std::size_t>(iw)) * g.in_c;
            for (std::size_t m = 0; m < g.in_c; ++m) {
              std::size_t k_off = ((i * g.k_w + j) * g.in_c + m) * g.out_c;
              T x = input[in_off + m];
              T dx = 0;
              for (std::size_t oc = 0; oc < g.out_c; ++oc) {
                dx += kernel[k_off + oc] * dy[oc];
                r.d_kernel[k_off + oc] += x * dy[oc];
              }
              r.d_input[in_off + m] += dx;
            }
          }
        }
      }
    }
  }
  return r;
}

template <typename T>
ConvGrads<T> conv2d_depthwise_bwd(const BasicTensor<T>& input, const BasicTensor<T>& kernel,
                                  const BasicTensor<T>& d_out, const ConvConfig& cfg) {
  detail::require_cached(input, "depthwise input");
  const Shape& ks = kernel.shape();
  ConvGeometry g = conv_geometry(input.shape(), ks[0], ks[1], ks[2], cfg);
  if (d_out.shape() != Shape{g.batch, g.out_h, g.out_w, g.out_c}) {
    throw ShapeError("depthwise grad shape " + d_out.shape().str() + " does not match forward output");
  }
  ConvGrads<T> r{BasicTensor<T>(input.shape()), BasicTensor<T>(ks)};
  for (std::size_t n = 0; n < g.batch; ++n) {
    for (std::size_t oh = 0; oh < g.out_h; ++oh) {
      for (std::size_t ow = 0; ow < g.out_w; ++ow) {
        const T* dy = d_out.raw() + ((n * g.out_h + oh) * g.out_w + ow) * g.out_c;
        for (std::size_t i = 0; i < g.k_h; ++i) {
          long ih = detail::tap_row(g, oh, i);
          if (ih < 0 || ih >= static_cast<long>(g.in_h)) continue;
          for (std::size_t j = 0; j < g.k_w; ++j) {
            long iw = detail::tap_col(g, ow, j);
            if (iw < 0 || iw >= static_cast<long>(g.in_w)) continue;
            std::size_t in_off =
                ((n * g.in_h + static_cast<std::size_t>(ih)) * g.in_w + static_cast<std::size_t>(iw)) * g.in_c;
            std::size_t k_off = (i * g.k_w + j) * g.in_c;
            for (std::size_t c = 0; c < g.in_c; ++c) {
              r.d_input[in_off + c] += kernel[k_off + c] * dy[c];
              r.d_kernel[k_off + c] += input[in_off + c] * dy[c];
            }
          }
        }
      }
    }
  }
  return r;
}

template <typename T>
ConvGrads<T> conv2d_pointwise_bwd(const BasicTensor<T>& input, const BasicTensor<T>& kernel,
                                  const BasicTensor<T>& d_out) {
  detail::require_cached(input, "pointwise input");
  const Shape& ks = kernel.shape();
  std::size_t m_ch = ks[2], n_ch = ks[3];
  std::size_t pixels = input.size() / m_ch;
  if (d_out.size() != pixels * n_ch) throw ShapeError("pointwise grad size mismatch");
  ConvGrads<T> r{BasicTensor<T>(input.shape()), BasicTensor<T>(ks)};
  for (std::size_t p = 0; p < pixels; ++p) {
    const T* x = input.raw() + p * m_ch;
    const T* dy = d_out.raw() + p * n_ch;
    T* dx = r.d_input.raw() + p * m_ch;
    for (std::size_t m = 0; m < m_ch; ++m) {
      const T* w = kernel.raw() + m * n_ch;
      T* dw = r.d_kernel.raw() + m * n_ch;
      T acc = 0;
      for (std::size_t oc = 0; oc < n_ch; ++oc) {
        acc += w[oc] * dy[oc];
        dw[oc] += x[m] * dy[oc];
      }
      dx[m] = acc;
    }
  }
  return r;
}

template <typename T>
struct BatchNormGrads {
  BasicTensor<T> d_input;
  std::vector<T> d_gamma, d_beta;
};

// Backward through batchnorm_fwd. In train mode `mean`/`var` are the batch
// statistics returned by the forward pass and the gradient flows through
// them; in infer mode they are the running statistics (constants).
template <typename T>
BatchNormGrads<T> batchnorm_bwd(const BasicTensor<T>& input, const BatchNormParams<T>& p,
                                const std::vector<T>& mean, const std::vector<T>& var,
                                const BasicTensor<T>& d_out, BnMode mode) {
  detail::require_cached(input, "batchnorm input");
  std::size_t c_n = input.shape().channels();
  if (mean.size() != c_n || var.size() != c_n) {
    throw ValidationError("batchnorm backward is missing cached statistics");
  }
  if (d_out.shape() != input.shape()) throw ShapeError("batchnorm grad shape mismatch");
  std::size_t rows = input.size() / c_n;
  std::vector<T> inv_std(c_n);
  for (std::size_t c = 0; c < c_n; ++c) inv_std[c] = T(1) / std::sqrt(var[c] + p.epsilon);

  BatchNormGrads<T> r{BasicTensor<T>(input.shape()), std::vector<T>(c_n), std::vector<T>(c_n)};
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t c = 0; c < c_n; ++c) {
      T xhat = (input[i * c_n + c] - mean[c]) * inv_std[c];
      r.d_gamma[c] += d_out[i * c_n + c] * xhat;
      r.d_beta[c] += d_out[i * c_n + c];
    }
  }
  T count = static_cast<T>(rows);
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t c = 0; c < c_n; ++c) {
      T dy = d_out[i * c_n + c];
      if (mode == BnMode::kInfer) {
        r.d_input[i * c_n + c] = dy * p.gamma[c] * inv_std[c];
      } else {
        T xhat = (input[i * c_n + c] - mean[c]) * inv_std[c];
        r.d_input[i * c_n + c] = p.gamma[c] * inv_std[c] / count *
                                 (count * dy - r.d_beta[c] - xhat * r.d_gamma[c]);
      }
    }
  }
  return r;
}

template <typename T>
BasicTensor<T> relu_bwd(const BasicTensor<T>& input, const BasicTensor<T>& d_out) {
  detail::require_cached(input, "relu input");
  if (d_out.shape() != input.shape()) throw ShapeError("relu grad shape mismatch");
  BasicTensor<T> dx(input.shape());
  for (std::size_t i = 0; i < input.size(); ++i) dx[i] = input[i] > 0 ? d_out[i] : T(0);
  return dx;
}

template <typename T>
BasicTensor<T> avgpool_global_bwd(const Shape& input_shape, const BasicTensor<T>& d_out) {
  std::size_t hw = input_shape.height() * input_shape.width(), c_n = input_shape.channels();
  BasicTensor<T> dx(input_shape);
  for (std::size_t n = 0; n < input_shape.batch(); ++n) {
    for (std::size_t p = 0; p < hw; ++p) {
      for (std::size_t c = 0; c < c_n; ++c) {
        dx[(n * hw + p) * c_n + c] = d_out[n * c_n + c] / static_cast<T>(hw);
      }
    }
  }
  return dx;
}

template <typename T>
struct FcGrads {
  BasicTensor<T> d_input, d_weights, d_bias;
};

template <typename T>
FcGrads<T> fc_bwd(const BasicTensor<T>& input, const BasicTensor<T>& weights,
                  const BasicTensor<T>& d_out) {
  detail::require_cached(input, "fc input");
  std::size_t batch = input.shape()[0], in_f = feature_count(input), out_f = weights.shape()[1];
  if (d_out.shape() != Shape{batch, out_f}) throw ShapeError("fc grad shape mismatch");
  FcGrads<T> r{BasicTensor<T>(input.shape()), BasicTensor<T>(weights.shape()),
               BasicTensor<T>(Shape{out_f})};
  for (std::size_t n = 0; n < batch; ++n) {
    const T* dy = d_out.raw() + n * out_f;
    for (std::size_t o = 0; o < out_f; ++o) r.d_bias[o] += dy[o];
    for (std::size_t i = 0; i < in_f; ++i) {
      T x = input[n * in_f + i];
      const T* w = weights.raw() + i * out_f;
      T* dw = r.d_weights.raw() + i * out_f;
      T acc = 0;
      for (std::size_t o = 0; o < out_f; ++o) {
        acc += w[o] * dy[o];
        dw[o] += x * dy[o];
      }
      r.d_input[n * in_f + i] = acc;
    }
  }
  return r;
}

// Gradient of mean cross-entropy w.r.t. the logits feeding a softmax:
// (probs - onehot(labels)) / batch.
template <typename T>
BasicTensor<T> softmax_xent_bwd(const BasicTensor<T>& probs, const std::vector<std::size_t>& labels) {
  detail::require_cached(probs, "softmax probabilities");
  std::size_t batch = probs.shape()[0], k = probs.size() / batch;
  if (labels.size() != batch) throw ShapeError("label count does not match batch");
  BasicTensor<T> d(probs.shape());
  for (std::size_t n = 0; n < batch; ++n) {
    if (labels[n] >= k) throw IndexError("label " + std::to_string(labels[n]) + " out of range");
    for (std::size_t i = 0; i < k; ++i) {
      T onehot = i == labels[n] ? T(1) : T(0);
      d[n * k + i] = (probs[n * k + i] - onehot) / static_cast<T>(batch);
    }
  }
  return d;
}

}  // namespace mbnet
