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
#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "mbnet/arch.hpp"
#include "mbnet/binary_io.hpp"
#include "mbnet/error.hpp"
#include "mbnet/tensor.hpp"

namespace mbnet {

// Named parameter tensors in insertion (layer) order.
template <typename T>
class BasicWeightStore {
 public:
  using Entry = std::pair<std::string, BasicTensor<T>>;

  void insert(std::string name, BasicTensor<T> t) {
    if (index_.contains(name)) throw ValidationError("duplicate tensor name '" + name + "'");
    index_.emplace(name, entries_.size());
    entries_.emplace_back(std::move(name), std::move(t));
  }

  // Inserts or replaces.
  void put(const std::string& name, BasicTensor<T> t) {
    if (auto it = index_.find(name); it != index_.end()) {
      entries_[it->second].second = std::move(t);
    } else {
      insert(name, std::move(t));
    }
  }

  bool contains(const std::string& name) const { return index_.contains(name); }

  const BasicTensor<T>& at(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw ValidationError("missing tensor '" + name + "'");
    return entries_[it->second].second;
  }
  BasicTensor<T>& at(const std::string& name) {
    auto it = index_.find(name);
    if (it == index_.end()) throw ValidationError("missing tensor '" + name + "'");
    return entries_[it->second].second;
  }
  const BasicTensor<T>* find(const std::string& name) const {
    auto it = index_.find(name);
    return it == index_.end() ? nullptr : &entries_[it->second].second;
  }

  const std::vector<Entry>& entries() const { return entries_; }
  std::vector<Entry>& entries() { return entries_; }
  std::size_t size() const { return entries_.size(); }

  std::uint64_t parameter_count() const {
    std::uint64_t n = 0;
    for (const auto& [_, t] : entries_) n += t.size();
    return n;
  }

  template <typename U>
  BasicWeightStore<U> cast() const {
    BasicWeightStore<U> out;
    for (const auto& [name, t] : entries_) out.insert(name, t.template cast<U>());
    return out;
  }

  friend bool operator==(const BasicWeightStore& a, const BasicWeightStore& b) { return a.entries_ == b.entries_; }

 private:
  std::vector<Entry> entries_;
  std::map<std::string, std::size_t> index_;
};

using WeightStore = BasicWeightStore<float>;

enum class ParamRole { kConvKernel, kDepthwiseKernel, kFcWeight, kFcBias, kBnGamma, kBnBeta, kBnMean, kBnVar, kConvBias };

inline bool is_trainable(ParamRole r) { return r != ParamRole::kBnMean && r != ParamRole::kBnVar; }

struct ParamSpec {
  std::string name;
  Shape shape;
  ParamRole role;
  std::size_t fan_in = 0;  // kernels and FC weights only
};

// Canonical tensor names of one layer.
struct LayerParamNames {
  std::string kernel;  // "conv0/kernel", "dw3/kernel", "pw3/kernel", "fc/weight"
  std::string bias;    // "fc/bias", or the optional conv bias after folding
  std::string bn;      // "bn0", "bn3a", "bn3b"; empty without batchnorm
};

// Names per layer index (empty for parameter-free layers). Conv layers are
// numbered by block: a standard conv or a depthwise conv opens a block, and
// a pointwise conv directly after a depthwise conv joins that block.
inline std::vector<LayerParamNames> layer_param_names(const ArchDescriptor& arch) {
  std::vector<LayerParamNames> names(arch.size());
  long block = -1;
  bool open_dw = false;
  std::size_t fc_count = 0;
  for (std::size_t i = 0; i < arch.size(); ++i) {
    const LayerSpec& l = arch[i];
    auto& n = names[i];
    switch (l.kind) {
      case LayerKind::kStdConv:
        ++block;
        open_dw = false;
        n.kernel = "conv" + std::to_string(block) + "/kernel";
        n.bias = "conv" + std::to_string(block) + "/bias";
        n.bn = "bn" + std::to_string(block);
        break;
      case LayerKind::kDepthwiseConv:
        ++block;
        open_dw = true;
        n.kernel = "dw" + std::to_string(block) + "/kernel";
        n.bias = "dw" + std::to_string(block) + "/bias";
        n.bn = "bn" + std::to_string(block) + "a";
        break;
      case LayerKind::kPointwiseConv:
        if (!open_dw) ++block;
        open_dw = false;
        n.kernel = "pw" + std::to_string(block) + "/kernel";
        n.bias = "pw" + std::to_string(block) + "/bias";
        n.bn = "bn" + std::to_string(block) + "b";
        break;
      case LayerKind::kFullyConnected: {
        std::string base = fc_count == 0 ? "fc" : "fc" + std::to_string(fc_count);
        ++fc_count;
        n.kernel = base + "/weight";
        n.bias = base + "/bias";
        break;
      }
      case LayerKind::kAvgPool:
      case LayerKind::kSoftmax:
        break;
    }
    if (!l.has_bn_relu) n.bn.clear();
  }
  return names;
}

// Every tensor the arch requires, in layer order. Optional conv biases
// (present after batchnorm folding) are not listed.
inline std::vector<ParamSpec> parameter_specs(const ArchDescriptor& arch) {
  std::vector<ParamSpec> specs;
  auto names = layer_param_names(arch);
  for (std::size_t i = 0; i < arch.size(); ++i) {
    const LayerSpec& l = arch[i];
    const auto& n = names[i];
    std::size_t k = l.kernel;
    switch (l.kind) {
      case LayerKind::kStdConv:
        specs.push_back({n.kernel, Shape{k, k, l.in_channels, l.out_channels}, ParamRole::kConvKernel, k * k * l.in_channels});
        break;
      case LayerKind::kDepthwiseConv:
        specs.push_back({n.kernel, Shape{k, k, l.in_channels}, ParamRole::kDepthwiseKernel, k * k});
        break;
      case LayerKind::kPointwiseConv:
        specs.push_back({n.kernel, Shape{1, 1, l.in_channels, l.out_channels}, ParamRole::kConvKernel, l.in_channels});
        break;
      case LayerKind::kFullyConnected:
        specs.push_back({n.kernel, Shape{l.in_channels, l.out_channels}, ParamRole::kFcWeight, l.in_channels});
        specs.push_back({n.bias, Shape{l.out_channels}, ParamRole::kFcBias, 0});
        break;
      case LayerKind::kAvgPool:
      case LayerKind::kSoftmax:
        break;
    }
    if (!n.bn.empty()) {
      Shape c{l.out_channels};
      specs.push_back({n.bn + "/gamma", c, ParamRole::kBnGamma, 0});
      specs.push_back({n.bn + "/beta", c, ParamRole::kBnBeta, 0});
      specs.push_back({n.bn + "/running_mean", c, ParamRole::kBnMean, 0});
      specs.push_back({n.bn + "/running_var", c, ParamRole::kBnVar, 0});
    }
  }
  return specs;
}

// Checks that `store` has exactly the tensors `arch` needs. Conv biases are
// optional. Throws FormatError(kShapeMismatch) naming the first offender.
template <typename T>
void validate_weights(const ArchDescriptor& arch, const BasicWeightStore<T>& store) {
  auto specs = parameter_specs(arch);
  auto names = layer_param_names(arch);
  std::map<std::string, Shape> allowed;
  for (const auto& s : specs) allowed.emplace(s.name, s.shape);
  for (std::size_t i = 0; i < arch.size(); ++i) {
    if (arch[i].is_conv()) allowed.emplace(names[i].bias, Shape{arch[i].out_channels});
  }
  for (const auto& s : specs) {
    const auto* t = store.find(s.name);
    if (!t) throw FormatError(FormatError::Kind::kShapeMismatch, "missing tensor '" + s.name + "'");
    if (t->shape() != s.shape) {
      throw FormatError(FormatError::Kind::kShapeMismatch, "tensor '" + s.name + "' has shape " + t->shape().str() +
                                                               ", architecture expects " + s.shape.str());
    }
  }
  for (const auto& [name, t] : store.entries()) {
    auto it = allowed.find(name);
    if (it == allowed.end()) throw FormatError(FormatError::Kind::kShapeMismatch, "unexpected tensor '" + name + "'");
    if (t.shape() != it->second) {
      throw FormatError(FormatError::Kind::kShapeMismatch, "tensor '" + name + "' has shape " + t.shape().str() +
                                                               ", architecture expects " + it->second.str());
    }
  }
}

// He-normal weights (stddev sqrt(2/fan_in)), zero FC bias, batchnorm
// gamma=1, beta=0, running stats (0, 1).
template <typename T = float>
BasicWeightStore<T> init_weights(const ArchDescriptor& arch, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  BasicWeightStore<T> store;
  for (const auto& s : parameter_specs(arch)) {
    BasicTensor<T> t(s.shape);
    switch (s.role) {
      case ParamRole::kConvKernel:
      case ParamRole::kDepthwiseKernel:
      case ParamRole::kFcWeight: {
        std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / static_cast<double>(s.fan_in)));
        for (auto& v : t.data()) v = static_cast<T>(dist(rng));
        break;
      }
      case ParamRole::kBnGamma:
      case ParamRole::kBnVar:
        t = BasicTensor<T>(s.shape, T(1));
        break;
      default:
        break;
    }
    store.insert(s.name, std::move(t));
  }
  return store;
}

// Weight file: "MBNW", u32 version, u32 count, then per tensor u16 name
// length, name bytes, u8 dtype (0 = f32), u8 rank, rank x u32 dims and the
// little-endian f32 payload. No padding.
inline constexpr std::string_view kWeightMagic = "MBNW";
inline constexpr std::uint32_t kWeightVersion = 1;

inline std::vector<std::uint8_t> encode_weights(const WeightStore& store) {
  ByteWriter w;
  w.bytes(kWeightMagic);
  w.u32(kWeightVersion);
  w.u32(static_cast<std::uint32_t>(store.size()));
  for (const auto& [name, t] : store.entries()) {
    if (name.size() > 0xffff) throw ValidationError("tensor name too long: " + name.substr(0, 32) + "...");
    w.u16(static_cast<std::uint16_t>(name.size()));
    w.bytes(name);
    w.u8(0);
    w.u8(static_cast<std::uint8_t>(t.shape().rank()));
    for (std::size_t d : t.shape().dims()) w.u32(static_cast<std::uint32_t>(d));
    for (float v : t.data()) w.f32(v);
  }
  return w.buffer();
}

inline WeightStore decode_weights(std::span<const std::uint8_t> bytes) {
  using K = FormatError::Kind;
  ByteReader r(bytes);
  if (r.remaining() < 4 || r.bytes(4) != kWeightMagic) throw FormatError(K::kBadMagic, "not an MBNW weight file");
  std::uint32_t version = r.u32();
  if (version != kWeightVersion) {
    throw FormatError(K::kVersion, "unsupported weight file version " + std::to_string(version));
  }
  std::uint32_t count = r.u32();
  WeightStore store;
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string name = r.bytes(r.u16());
    std::uint8_t dtype = r.u8();
    if (dtype != 0) throw FormatError(K::kCorrupt, "tensor '" + name + "' has unknown dtype " + std::to_string(dtype));
    std::uint8_t rank = r.u8();
    if (rank < 1 || rank > Shape::kMaxRank) {
      throw FormatError(K::kCorrupt, "tensor '" + name + "' has bad rank " + std::to_string(rank));
    }
    std::vector<std::size_t> dims(rank);
    for (auto& d : dims) d = r.u32();
    Shape shape;
    try {
      shape = Shape(dims);
    } catch (const Error& e) {
      throw FormatError(K::kCorrupt, "tensor '" + name + "': " + e.what());
    }
    if (shape.count() > r.remaining() / 4) {
      throw FormatError(K::kTruncated, "tensor '" + name + "' payload is truncated");
    }
    std::vector<float> data(shape.count());
    for (auto& v : data) v = r.f32();
    if (store.contains(name)) throw FormatError(K::kCorrupt, "duplicate tensor '" + name + "'");
    store.insert(std::move(name), Tensor(std::move(shape), std::move(data)));
  }
  if (r.remaining() != 0) throw FormatError(K::kCorrupt, "trailing bytes after last tensor");
  return store;
}

inline void save_weights(const std::string& path, const WeightStore& store) {
  write_file_bytes(path, encode_weights(store));
}

inline WeightStore load_weights(const std::string& path) { return decode_weights(read_file_bytes(path)); }

// Loads and checks against `arch`.
inline WeightStore load_weights(const std::string& path, const ArchDescriptor& arch) {
  WeightStore store = load_weights(path);
  validate_weights(arch, store);
  return store;
}

}  // namespace mbnet
