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
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <limits>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "mbnet/error.hpp"

namespace mbnet {

// Multiplies two element counts, throwing on 64-bit overflow.
inline std::uint64_t checked_mul(std::uint64_t a, std::uint64_t b) {
  std::uint64_t r = 0;
  if (__builtin_mul_overflow(a, b, &r)) {
    throw OverflowError("element count overflows 64 bits");
  }
  return r;
}

// Dimensions of a rank 1..4 tensor. Feature maps use (batch, height, width,
// channels).
class Shape {
 public:
  static constexpr std::size_t kMaxRank = 4;

  Shape() = default;
  Shape(std::initializer_list<std::size_t> dims) : Shape(std::vector<std::size_t>(dims)) {}
  explicit Shape(std::vector<std::size_t> dims) : dims_(std::move(dims)) {
    if (dims_.empty() || dims_.size() > kMaxRank) {
      throw ShapeError("tensor rank must be in [1, 4], got " + std::to_string(dims_.size()));
    }
    std::uint64_t n = 1;
    for (std::size_t d : dims_) {
      if (d == 0) throw ShapeError("tensor dims must be >= 1: " + str());
      n = checked_mul(n, d);
    }
    if (n > std::numeric_limits<std::size_t>::max()) {
      throw OverflowError("element count does not fit in size_t");
    }
    count_ = static_cast<std::size_t>(n);
  }

  std::size_t rank() const { return dims_.size(); }
  std::size_t count() const { return count_; }
  std::size_t operator[](std::size_t i) const { return dims_.at(i); }
  const std::vector<std::size_t>& dims() const { return dims_; }

  // Rank-4 feature map accessors.
  std::size_t batch() const { return dims_.at(0); }
  std::size_t height() const { return dims_.at(1); }
  std::size_t width() const { return dims_.at(2); }
  std::size_t channels() const { return dims_.back(); }

  // Row-major linear offset of a multi-index; for rank 4 this is
  // ((n*H + h)*W + w)*C + c.
  std::size_t offset(std::span<const std::size_t> idx) const {
    if (idx.size() != dims_.size()) {
      throw IndexError("index rank " + std::to_string(idx.size()) + " does not match tensor rank " +
                       std::to_string(dims_.size()));
    }
    std::size_t off = 0;
    for (std::size_t i = 0; i < dims_.size(); ++i) {
      if (idx[i] >= dims_[i]) {
        throw IndexError("index " + std::to_string(idx[i]) + " out of bounds for dim " +
                         std::to_string(i) + " of shape " + str());
      }
      off = off * dims_[i] + idx[i];
    }
    return off;
  }
  std::size_t offset(std::initializer_list<std::size_t> idx) const {
    return offset(std::span<const std::size_t>(idx.begin(), idx.size()));
  }

  std::string str() const {
    std::ostringstream os;
    os << '(';
    for (std::size_t i = 0; i < dims_.size(); ++i) os << (i ? "," : "") << dims_[i];
    os << ')';
    return os.str();
  }

  friend bool operator==(const Shape&, const Shape&) = default;

 private:
  std::vector<std::size_t> dims_;
  std::size_t count_ = 0;
};

// Dense contiguous tensor, row-major in the declared dim order.
template <typename T>
class BasicTensor {
 public:
  using value_type = T;

  BasicTensor() = default;
  explicit BasicTensor(Shape shape, T fill = T(0))
      : shape_(std::move(shape)), data_(shape_.count(), fill) {}
  BasicTensor(Shape shape, std::vector<T> data) : shape_(std::move(shape)), data_(std::move(data)) {
    if (data_.size() != shape_.count()) {
      throw ShapeError("data length " + std::to_string(data_.size()) + " does not match shape " +
                       shape_.str());
    }
  }

  const Shape& shape() const { return shape_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  std::span<T> data() { return data_; }
  std::span<const T> data() const { return data_; }
  T* raw() { return data_.data(); }
  const T* raw() const { return data_.data(); }

  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  T get(std::initializer_list<std::size_t> idx) const { return data_[shape_.offset(idx)]; }
  void set(std::initializer_list<std::size_t> idx, T v) { data_[shape_.offset(idx)] = v; }
  T get(std::span<const std::size_t> idx) const { return data_[shape_.offset(idx)]; }
  void set(std::span<const std::size_t> idx, T v) { data_[shape_.offset(idx)] = v; }

  // Same data under a new shape with equal element count.
  BasicTensor reshaped(Shape s) const {
    if (s.count() != shape_.count()) {
      throw ShapeError("cannot reshape " + shape_.str() + " to " + s.str());
    }
    return BasicTensor(std::move(s), data_);
  }

  template <typename U>
  BasicTensor<U> cast() const {
    std::vector<U> out(data_.begin(), data_.end());
    return BasicTensor<U>(shape_, std::move(out));
  }

  friend bool operator==(const BasicTensor&, const BasicTensor&) = default;

 private:
  Shape shape_;
  std::vector<T> data_;
};

using Tensor = BasicTensor<float>;

template <typename T>
BasicTensor<T> tensor_new(Shape shape, T fill) {
  return BasicTensor<T>(std::move(shape), fill);
}

template <typename T>
bool all_finite(const BasicTensor<T>& t) {
  return std::all_of(t.data().begin(), t.data().end(), [](T v) { return std::isfinite(v); });
}

template <typename T>
void validate_finite(const BasicTensor<T>& t, const std::string& what, long layer = -1) {
  if (!all_finite(t)) throw NumericError("non-finite value in " + what, layer);
}

// Largest absolute elementwise difference.
template <typename T>
double max_abs_diff(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError("shape mismatch " + a.shape().str() + " vs " + b.shape().str());
  }
  double m = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    m = std::max(m, std::abs(static_cast<double>(a[i]) - static_cast<double>(b[i])));
  }
  return m;
}

template <typename T>
double max_abs(const BasicTensor<T>& a) {
  double m = 0;
  for (T v : a.data()) m = std::max(m, std::abs(static_cast<double>(v)));
  return m;
}

// Normwise relative difference max|a-b| / max|b|; 0 when both are zero.
template <typename T>
double rel_diff(const BasicTensor<T>& a, const BasicTensor<T>& ref) {
  double d = max_abs_diff(a, ref);
  double s = max_abs(ref);
  if (s == 0) return d;
  return d / s;
}

}  // namespace mbnet
