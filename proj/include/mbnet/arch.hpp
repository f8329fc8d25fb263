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
#include <utility>
#include <vector>

#include "mbnet/error.hpp"

namespace mbnet {

enum class LayerKind { kStdConv, kDepthwiseConv, kPointwiseConv, kAvgPool, kFullyConnected, kSoftmax };

inline const char* layer_kind_name(LayerKind k) {
  switch (k) {
    case LayerKind::kStdConv: return "conv";
    case LayerKind::kDepthwiseConv: return "dw";
    case LayerKind::kPointwiseConv: return "pw";
    case LayerKind::kAvgPool: return "avgpool";
    case LayerKind::kFullyConnected: return "fc";
    case LayerKind::kSoftmax: return "softmax";
  }
  return "?";
}

inline bool is_conv(LayerKind k) {
  return k == LayerKind::kStdConv || k == LayerKind::kDepthwiseConv || k == LayerKind::kPointwiseConv;
}

// One layer of the network. Pool and softmax carry their channel count in
// in_channels/out_channels so every layer has the same shape bookkeeping.
struct LayerSpec {
  LayerKind kind = LayerKind::kStdConv;
  std::size_t stride = 1;
  std::size_t kernel = 1;
  std::size_t in_channels = 0;
  std::size_t out_channels = 0;
  bool has_bn_relu = false;

  static LayerSpec std_conv(std::size_t stride, std::size_t k, std::size_t in, std::size_t out) {
    return {LayerKind::kStdConv, stride, k, in, out, true};
  }
  static LayerSpec depthwise(std::size_t stride, std::size_t k, std::size_t ch) {
    return {LayerKind::kDepthwiseConv, stride, k, ch, ch, true};
  }
  static LayerSpec pointwise(std::size_t in, std::size_t out) {
    return {LayerKind::kPointwiseConv, 1, 1, in, out, true};
  }
  static LayerSpec avgpool(std::size_t ch) { return {LayerKind::kAvgPool, 1, 0, ch, ch, false}; }
  static LayerSpec fully_connected(std::size_t in, std::size_t out) {
    return {LayerKind::kFullyConnected, 1, 0, in, out, false};
  }
  static LayerSpec softmax(std::size_t ch) { return {LayerKind::kSoftmax, 1, 0, ch, ch, false}; }

  bool is_conv() const { return mbnet::is_conv(kind); }

  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

// Per-image feature map geometry (height, width, channels).
struct FeatureShape {
  std::size_t height = 0, width = 0, channels = 0;

  std::string str() const {
    return std::to_string(height) + "x" + std::to_string(width) + "x" + std::to_string(channels);
  }
  friend bool operator==(const FeatureShape&, const FeatureShape&) = default;
};

struct LayerShapes {
  FeatureShape in, out;
  friend bool operator==(const LayerShapes&, const LayerShapes&) = default;
};

// Output geometry of one layer, or ShapeError if `in` does not fit it.
inline FeatureShape layer_output_shape(const LayerSpec& l, const FeatureShape& in) {
  auto mismatch = [&](const std::string& why) {
    return ShapeError(std::string(layer_kind_name(l.kind)) + " layer: " + why + " (input " + in.str() + ")");
  };
  if (l.stride == 0) throw mismatch("stride must be >= 1");
  auto down = [&](std::size_t v) { return (v + l.stride - 1) / l.stride; };
  switch (l.kind) {
    case LayerKind::kStdConv:
      if (l.kernel == 0) throw mismatch("kernel size must be >= 1");
      if (in.channels != l.in_channels) throw mismatch("expects " + std::to_string(l.in_channels) + " channels");
      if (l.out_channels == 0) throw mismatch("output channels must be >= 1");
      return {down(in.height), down(in.width), l.out_channels};
    case LayerKind::kDepthwiseConv:
      if (l.kernel == 0) throw mismatch("kernel size must be >= 1");
      if (in.channels != l.in_channels || l.out_channels != l.in_channels) {
        throw mismatch("expects " + std::to_string(l.in_channels) + " channels in and out");
      }
      return {down(in.height), down(in.width), l.in_channels};
    case LayerKind::kPointwiseConv:
      if (l.kernel != 1 || l.stride != 1) throw mismatch("pointwise layers are 1x1 stride 1");
      if (in.channels != l.in_channels) throw mismatch("expects " + std::to_string(l.in_channels) + " channels");
      if (l.out_channels == 0) throw mismatch("output channels must be >= 1");
      return {in.height, in.width, l.out_channels};
    case LayerKind::kAvgPool:
      if (in.channels != l.in_channels || l.out_channels != l.in_channels) {
        throw mismatch("channel count " + std::to_string(l.in_channels) + " does not chain");
      }
      return {1, 1, in.channels};
    case LayerKind::kFullyConnected:
      if (in.height * in.width * in.channels != l.in_channels) {
        throw mismatch("expects " + std::to_string(l.in_channels) + " input features");
      }
      if (l.out_channels == 0) throw mismatch("output features must be >= 1");
      return {1, 1, l.out_channels};
    case LayerKind::kSoftmax:
      if (in.channels != l.in_channels || l.out_channels != l.in_channels) {
        throw mismatch("channel count " + std::to_string(l.in_channels) + " does not chain");
      }
      return {in.height, in.width, in.channels};
  }
  throw mismatch("unknown layer kind");
}

inline std::vector<LayerShapes> infer_shapes(const FeatureShape& input, const std::vector<LayerSpec>& layers) {
  std::vector<LayerShapes> shapes;
  shapes.reserve(layers.size());
  FeatureShape cur = input;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    try {
      FeatureShape out = layer_output_shape(layers[i], cur);
      shapes.push_back({cur, out});
      cur = out;
    } catch (const ShapeError& e) {
      throw ShapeError("layer " + std::to_string(i) + ": " + e.what());
    }
  }
  return shapes;
}

// An ordered layer list with its input geometry. Shapes are inferred and
// the chain validated at construction.
class ArchDescriptor {
 public:
  ArchDescriptor() = default;
  ArchDescriptor(FeatureShape input, std::vector<LayerSpec> layers)
      : input_(input), layers_(std::move(layers)), shapes_(mbnet::infer_shapes(input_, layers_)) {
    if (input_.height == 0 || input_.width == 0 || input_.channels == 0) {
      throw ShapeError("input shape must be positive, got " + input_.str());
    }
  }

  const FeatureShape& input() const { return input_; }
  const std::vector<LayerSpec>& layers() const { return layers_; }
  const std::vector<LayerShapes>& shapes() const { return shapes_; }
  std::size_t size() const { return layers_.size(); }
  const LayerSpec& operator[](std::size_t i) const { return layers_.at(i); }

  FeatureShape output() const { return shapes_.empty() ? input_ : shapes_.back().out; }

  std::size_t conv_layer_count() const {
    std::size_t n = 0;
    for (const auto& l : layers_) n += l.is_conv() ? 1 : 0;
    return n;
  }
  // Conv layers plus fully connected layers, with depthwise and pointwise
  // counted separately.
  std::size_t weighted_layer_count() const { return conv_layer_count() + count(LayerKind::kFullyConnected); }
  std::size_t count(LayerKind k) const {
    std::size_t n = 0;
    for (const auto& l : layers_) n += l.kind == k ? 1 : 0;
    return n;
  }

  // Class count of the head (output channels of the last layer).
  std::size_t classes() const { return output().channels; }

  friend bool operator==(const ArchDescriptor& a, const ArchDescriptor& b) {
    return a.input_ == b.input_ && a.layers_ == b.layers_;
  }

 private:
  FeatureShape input_;
  std::vector<LayerSpec> layers_;
  std::vector<LayerShapes> shapes_;
};

inline std::vector<LayerShapes> infer_shapes(const ArchDescriptor& arch) {
  return infer_shapes(arch.input(), arch.layers());
}

struct Hyperparams {
  double alpha = 1.0;
  std::size_t resolution = 224;
  bool shallow = false;
  std::size_t classes = 1000;

  void validate() const {
    if (!(alpha > 0.0 && alpha <= 1.0)) {
      throw ValidationError("alpha must be in (0, 1], got " + std::to_string(alpha));
    }
    if (resolution == 0 || resolution % 32 != 0) {
      throw ValidationError("resolution must be a positive multiple of 32, got " +
                            std::to_string(resolution));
    }
    if (classes == 0) throw ValidationError("class count must be >= 1");
  }
};

// round-half-up(alpha * c), at least 1.
inline std::size_t scale_channels(std::size_t c, double alpha) {
  auto v = static_cast<std::size_t>(std::floor(alpha * static_cast<double>(c) + 0.5));
  return v < 1 ? 1 : v;
}

inline constexpr std::size_t kRepeatedBlocks = 5;

// Conv rows of the MobileNet body: a strided 3x3 conv followed by 13
// depthwise/pointwise pairs. The final depthwise layer uses stride 1 so the
// map stays 7x7 at 224.
inline std::vector<LayerSpec> mobilenet_conv_body(double alpha, bool shallow) {
  auto c = [alpha](std::size_t ch) { return scale_channels(ch, alpha); };
  std::vector<LayerSpec> rows;
  rows.push_back(LayerSpec::std_conv(2, 3, 3, c(32)));
  struct Block {
    std::size_t in, out, stride;
  };
  std::vector<Block> blocks = {{32, 64, 1}, {64, 128, 2}, {128, 128, 1}, {128, 256, 2}, {256, 256, 1}, {256, 512, 2}};
  if (!shallow) {
    for (std::size_t i = 0; i < kRepeatedBlocks; ++i) blocks.push_back({512, 512, 1});
  }
  blocks.push_back({512, 1024, 2});
  blocks.push_back({1024, 1024, 1});
  for (const auto& b : blocks) {
    rows.push_back(LayerSpec::depthwise(b.stride, 3, c(b.in)));
    rows.push_back(LayerSpec::pointwise(c(b.in), c(b.out)));
  }
  return rows;
}

namespace detail {

inline ArchDescriptor with_head(std::size_t resolution, std::vector<LayerSpec> layers, std::size_t classes) {
  std::size_t ch = layers.back().out_channels;
  layers.push_back(LayerSpec::avgpool(ch));
  layers.push_back(LayerSpec::fully_connected(ch, classes));
  layers.push_back(LayerSpec::softmax(classes));
  return ArchDescriptor(FeatureShape{resolution, resolution, 3}, std::move(layers));
}

}  // namespace detail

inline ArchDescriptor build_mobilenet(const Hyperparams& hp) {
  hp.validate();
  return detail::with_head(hp.resolution, mobilenet_conv_body(hp.alpha, hp.shallow), hp.classes);
}

// The first `conv_layers` conv layers of the body plus the pool/FC/softmax
// head. Any positive resolution is accepted; used for small test networks.
inline ArchDescriptor build_mobilenet_prefix(double alpha, std::size_t resolution, std::size_t conv_layers,
                                             std::size_t classes) {
  Hyperparams{alpha, 32, false, classes}.validate();
  if (resolution == 0) throw ValidationError("resolution must be >= 1");
  auto body = mobilenet_conv_body(alpha, false);
  if (conv_layers == 0 || conv_layers > body.size()) {
    throw ValidationError("conv layer count must be in [1, " + std::to_string(body.size()) + "]");
  }
  body.resize(conv_layers);
  return detail::with_head(resolution, std::move(body), classes);
}

}  // namespace mbnet
