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

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mbnet/error.hpp"
#include "mbnet/ops.hpp"
#include "mbnet/tensor.hpp"

namespace mbnet {

// C[m x n] = A[m x k] * B[k x n], all row-major.
struct GemmDims {
  std::size_t m = 0, n = 0, k = 0;

  std::uint64_t mult_adds() const { return checked_mul(checked_mul(m, n), k); }
};

template <typename T>
struct Matrix {
  std::size_t rows = 0, cols = 0;
  std::vector<T> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, T fill = T(0)) : rows(r), cols(c), data(r * c, fill) {}
  Matrix(std::size_t r, std::size_t c, std::vector<T> d) : rows(r), cols(c), data(std::move(d)) {
    if (data.size() != r * c) throw ShapeError("matrix data length does not match dims");
  }

  T& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
  T operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

  static Matrix identity(std::size_t n) {
    Matrix r(n, n);
    for (std::size_t i = 0; i < n; ++i) r(i, i) = T(1);
    return r;
  }

  friend bool operator==(const Matrix&, const Matrix&) = default;
};

namespace detail {

inline constexpr std::size_t kGemmRowBlock = 64;
inline constexpr std::size_t kGemmDepthBlock = 256;
inline constexpr std::size_t kGemmColBlock = 512;

// Four rows of C updated from one row of B per k step.
template <typename T>
inline void gemm_rows4(const T* a, std::size_t lda, const T* b, std::size_t ldb, T* c,
                       std::size_t ldc, std::size_t k0, std::size_t k1, std::size_t j0,
                       std::size_t j1) {
  T* c0 = c;
  T* c1 = c + ldc;
  T* c2 = c + 2 * ldc;
  T* c3 = c + 3 * ldc;
  for (std::size_t kk = k0; kk < k1; ++kk) {
    const T a0 = a[kk], a1 = a[lda + kk], a2 = a[2 * lda + kk], a3 = a[3 * lda + kk];
    const T* brow = b + kk * ldb;
    for (std::size_t j = j0; j < j1; ++j) {
      const T bv = brow[j];
      c0[j] += a0 * bv;
      c1[j] += a1 * bv;
      c2[j] += a2 * bv;
      c3[j] += a3 * bv;
    }
  }
}

template <typename T>
inline void gemm_row1(const T* a, const T* b, std::size_t ldb, T* c, std::size_t k0,
                      std::size_t k1, std::size_t j0, std::size_t j1) {
  for (std::size_t kk = k0; kk < k1; ++kk) {
    const T av = a[kk];
    const T* brow = b + kk * ldb;
    for (std::size_t j = j0; j < j1; ++j) c[j] += av * brow[j];
  }
}

}  // namespace detail

// Cache-blocked product. Each C element accumulates its k terms in
// ascending k order whatever the block sizes, so results are deterministic
// and identical to the plain i-k-j loop.
template <typename T>
void gemm_into(std::span<const T> a, std::span<const T> b, std::span<T> c, const GemmDims& d) {
  if (a.size() < d.m * d.k || b.size() < d.k * d.n || c.size() < d.m * d.n) {
    throw ShapeError("gemm operand sizes do not match dims m=" + std::to_string(d.m) +
                     " n=" + std::to_string(d.n) + " k=" + std::to_string(d.k));
  }
  std::fill(c.begin(), c.begin() + static_cast<std::ptrdiff_t>(d.m * d.n), T(0));
  const T* pa = a.data();
  const T* pb = b.data();
  T* pc = c.data();
  for (std::size_t j0 = 0; j0 < d.n; j0 += detail::kGemmColBlock) {
    std::size_t j1 = std::min(d.n, j0 + detail::kGemmColBlock);
    for (std::size_t k0 = 0; k0 < d.k; k0 += detail::kGemmDepthBlock) {
      std::size_t k1 = std::min(d.k, k0 + detail::kGemmDepthBlock);
      for (std::size_t i0 = 0; i0 < d.m; i0 += detail::kGemmRowBlock) {
        std::size_t i1 = std::min(d.m, i0 + detail::kGemmRowBlock);
        std::size_t i = i0;
        for (; i + 4 <= i1; i += 4) {
          detail::gemm_rows4(pa + i * d.k, d.k, pb, d.n, pc + i * d.n, d.n, k0, k1, j0, j1);
        }
        for (; i < i1; ++i) detail::gemm_row1(pa + i * d.k, pb, d.n, pc + i * d.n, k0, k1, j0, j1);
      }
    }
  }
}

template <typename T>
Matrix<T> gemm(const Matrix<T>& a, const Matrix<T>& b, const GemmDims& d) {
  if (a.rows != d.m || a.cols != d.k || b.rows != d.k || b.cols != d.n) {
    throw ShapeError("gemm dimension mismatch: A is " + std::to_string(a.rows) + "x" +
                     std::to_string(a.cols) + ", B is " + std::to_string(b.rows) + "x" +
                     std::to_string(b.cols));
  }
  Matrix<T> c(d.m, d.n);
  gemm_into<T>(a.data, b.data, c.data, d);
  return c;
}

template <typename T>
Matrix<T> gemm(const Matrix<T>& a, const Matrix<T>& b) {
  return gemm(a, b, GemmDims{a.rows, b.cols, a.cols});
}

// Per-thread instrumentation of scratch usage.
struct ScratchStats {
  std::uint64_t allocations = 0;  // im2col buffer (re)allocations
  std::uint64_t im2col_fills = 0;  // im2col materializations
};

inline ScratchStats& scratch_stats() {
  static thread_local ScratchStats stats;
  return stats;
}

inline void reset_scratch_stats() { scratch_stats() = ScratchStats{}; }

// Reusable (out_h*out_w) x (k_h*k_w*in_c) patch matrix for one image.
// Row r holds the receptive field of output pixel r, channels fastest.
template <typename T>
class Im2colBuffer {
 public:
  Im2colBuffer() = default;
  Im2colBuffer(std::size_t rows, std::size_t cols) { reserve(rows, cols); }

  // Grows the storage when needed; never shrinks.
  void reserve(std::size_t rows, std::size_t cols) {
    std::size_t need = static_cast<std::size_t>(checked_mul(rows, cols));
    if (need > storage_.size()) {
      storage_.assign(need, T(0));
      ++scratch_stats().allocations;
    }
  }

  void set_geometry(std::size_t rows, std::size_t cols) {
    if (checked_mul(rows, cols) > storage_.size()) {
      throw ShapeError("im2col buffer too small: need " + std::to_string(rows) + "x" +
                       std::to_string(cols) + ", capacity " + std::to_string(storage_.size()));
    }
    rows_ = rows;
    cols_ = cols;
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t capacity() const { return storage_.size(); }
  std::span<T> data() { return std::span<T>(storage_.data(), rows_ * cols_); }
  std::span<const T> data() const { return std::span<const T>(storage_.data(), rows_ * cols_); }
  T at(std::size_t r, std::size_t c) const { return storage_[r * cols_ + c]; }

 private:
  std::vector<T> storage_;
  std::size_t rows_ = 0, cols_ = 0;
};

// Unrolls the receptive fields of image `n` into `buf`. Out-of-range taps
// are written as zero. Throws if `buf` is too small.
template <typename T>
void im2col(const BasicTensor<T>& input, std::size_t n, std::size_t k_h, std::size_t k_w,
            const ConvConfig& cfg, Im2colBuffer<T>& buf) {
  ConvGeometry g = conv_geometry(input.shape(), k_h, k_w, 1, cfg);
  if (n >= g.batch) throw IndexError("im2col batch index out of range");
  std::size_t cols = k_h * k_w * g.in_c;
  buf.set_geometry(g.out_h * g.out_w, cols);
  ++scratch_stats().im2col_fills;
  T* out = buf.data().data();
  const T* img = input.raw() + n * g.in_h * g.in_w * g.in_c;
  for (std::size_t oh = 0; oh < g.out_h; ++oh) {
    for (std::size_t ow = 0; ow < g.out_w; ++ow) {
      T* row = out + (oh * g.out_w + ow) * cols;
      for (std::size_t i = 0; i < k_h; ++i) {
        long ih = detail::tap_row(g, oh, i);
        for (std::size_t j = 0; j < k_w; ++j) {
          long iw = detail::tap_col(g, ow, j);
          T* dst = row + (i * k_w + j) * g.in_c;
          if (ih < 0 || iw < 0 || ih >= static_cast<long>(g.in_h) || iw >= static_cast<long>(g.in_w)) {
            std::fill(dst, dst + g.in_c, T(0));
          } else {
            const T* src = img + (static_cast<std::size_t>(ih) * g.in_w + static_cast<std::size_t>(iw)) * g.in_c;
            std::copy(src, src + g.in_c, dst);
          }
        }
      }
    }
  }
}

// Convenience overload sizing a fresh buffer.
template <typename T>
Im2colBuffer<T> im2col(const BasicTensor<T>& input, std::size_t n, std::size_t k_h,
                       std::size_t k_w, const ConvConfig& cfg) {
  ConvGeometry g = conv_geometry(input.shape(), k_h, k_w, 1, cfg);
  Im2colBuffer<T> buf(g.out_h * g.out_w, k_h * k_w * g.in_c);
  im2col(input, n, k_h, k_w, cfg, buf);
  return buf;
}

}  // namespace mbnet
