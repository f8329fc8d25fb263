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

// Fast convolution paths: im2col + GEMM for spatial kernels, direct GEMM for
// 1x1 kernels and a channel-vectorized direct loop for depthwise kernels.

#include <algorithm>
#include <cstddef>
#include <span>
#include <string>

#include "mbnet/error.hpp"
#include "mbnet/gemm.hpp"
#include "mbnet/ops.hpp"
#include "mbnet/tensor.hpp"

namespace mbnet {

// Which lowering a fast conv call used.
struct GemmTrace {
  bool used_im2col = false;
  GemmDims dims;
};

// Output rows x patch columns needed to run a standard conv via im2col.
inline GemmDims im2col_gemm_dims(const Shape& input, const Shape& kernel, const ConvConfig& cfg) {
  ConvGeometry g = conv_geometry(input, kernel[0], kernel[1], kernel[3], cfg);
  return GemmDims{g.out_h * g.out_w, g.out_c, g.k_h * g.k_w * g.in_c};
}

template <typename T>
BasicTensor<T> conv2d_std_gemm(const BasicTensor<T>& input, const BasicTensor<T>& kernel,
                               const ConvConfig& cfg, Im2colBuffer<T>& scratch,
                               GemmTrace* trace = nullptr) {
  const Shape& ks = kernel.shape();
  if (ks.rank() != 4) throw ShapeError("standard conv kernel must be rank 4, got " + ks.str());
  if (input.shape().rank() != 4 || input.shape().channels() != ks[2]) {
    throw ShapeError("conv channel mismatch: input " + input.shape().str() + ", kernel " + ks.str());
  }
  ConvGeometry g = conv_geometry(input.shape(), ks[0], ks[1], ks[3], cfg);
  GemmDims dims = im2col_gemm_dims(input.shape(), ks, cfg);
  scratch.reserve(dims.m, dims.k);
  BasicTensor<T> out(Shape{g.batch, g.out_h, g.out_w, g.out_c});
  std::size_t image = dims.m * dims.n;
  for (std::size_t n = 0; n < g.batch; ++n) {
    im2col(input, n, g.k_h, g.k_w, cfg, scratch);
    // (k_h, k_w, M, N) row-major is already the (k_h*k_w*M) x N matrix.
    gemm_into<T>(scratch.data(), kernel.data(), out.data().subspan(n * image, image), dims);
  }
  if (trace) *trace = GemmTrace{true, dims};
  return out;
}

template <typename T>
BasicTensor<T> conv2d_std_gemm(const BasicTensor<T>& input, const BasicTensor<T>& kernel,
                               const ConvConfig& cfg) {
  Im2colBuffer<T> scratch;
  return conv2d_std_gemm(input, kernel, cfg, scratch);
}

// 1x1 conv as a single GEMM. The NHWC input is already the
// (N*H*W) x M matrix, so no reordering or scratch is involved.
template <typename T>
BasicTensor<T> conv2d_pointwise_gemm(const BasicTensor<T>& input, const BasicTensor<T>& kernel,
                                     GemmTrace* trace = nullptr) {
  const Shape& ks = kernel.shape();
  if (ks.rank() != 4 || ks[0] != 1 || ks[1] != 1) {
    throw ShapeError("pointwise kernel must be (1,1,M,N), got " + ks.str());
  }
  const Shape& is = input.shape();
  if (is.rank() != 4 || is.channels() != ks[2]) {
    throw ShapeError("pointwise channel mismatch: input " + is.str() + ", kernel " + ks.str());
  }
  GemmDims dims{is.batch() * is.height() * is.width(), ks[3], ks[2]};
  BasicTensor<T> out(Shape{is.batch(), is.height(), is.width(), ks[3]});
  gemm_into<T>(input.data(), kernel.data(), out.data(), dims);
  if (trace) *trace = GemmTrace{false, dims};
  return out;
}

// Depthwise conv with the channel loop innermost over contiguous NHWC rows.
template <typename T>
BasicTensor<T> conv2d_depthwise_direct(const BasicTensor<T>& input, const BasicTensor<T>& kernel,
                                       const ConvConfig& cfg) {
  const Shape& ks = kernel.shape();
  if (ks.rank() != 3) throw ShapeError("depthwise kernel must be rank 3, got " + ks.str());
  if (input.shape().rank() != 4 || input.shape().channels() != ks[2]) {
    throw ShapeError("depthwise channel mismatch: input " + input.shape().str() + ", kernel " +
                     ks.str());
  }
  ConvGeometry g = conv_geometry(input.shape(), ks[0], ks[1], ks[2], cfg);
  BasicTensor<T> out(Shape{g.batch, g.out_h, g.out_w, g.out_c});
  const std::size_t c_n = g.in_c;
  for (std::size_t n = 0; n < g.batch; ++n) {
    const T* img = input.raw() + n * g.in_h * g.in_w * c_n;
    for (std::size_t oh = 0; oh < g.out_h; ++oh) {
      for (std::size_t ow = 0; ow < g.out_w; ++ow) {
        T* dst = out.raw() + ((n * g.out_h + oh) * g.out_w + ow) * c_n;
        for (std::size_t i = 0; i < g.k_h; ++i) {
          long ih = detail::tap_row(g, oh, i);
          if (ih < 0 || ih >= static_cast<long>(g.in_h)) continue;
          for (std::size_t j = 0; j < g.k_w; ++j) {
            long iw = detail::tap_col(g, ow, j);
            if (iw < 0 || iw >= static_cast<long>(g.in_w)) continue;
            const T* src = img + (static_cast<std::size_t>(ih) * g.in_w + static_cast<std::size_t>(iw)) * c_n;
            const T* w = kernel.raw() + (i * g.k_w + j) * c_n;
            for (std::size_t c = 0; c < c_n; ++c) dst[c] += w[c] * src[c];
          }
        }
      }
    }
  }
  return out;
}

}  // namespace mbnet
