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

#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "mbnet/arch.hpp"
#include "mbnet/arch_text.hpp"
#include "mbnet/error.hpp"
#include "mbnet/fast_conv.hpp"
#include "mbnet/gemm.hpp"
#include "mbnet/ops.hpp"
#include "mbnet/tensor.hpp"
#include "mbnet/weights.hpp"

namespace mbnet {

struct Model {
  ArchDescriptor arch;
  WeightStore weights;
  BnMode bn_mode = BnMode::kInfer;
  float bn_epsilon = 1e-3f;

  void validate() const { validate_weights(arch, weights); }
};

inline Model make_model(ArchDescriptor arch, std::uint64_t seed) {
  Model m{std::move(arch), {}, BnMode::kInfer, 1e-3f};
  m.weights = init_weights<float>(m.arch, seed);
  return m;
}

inline constexpr const char* kArchFileName = "arch.txt";
inline constexpr const char* kWeightFileName = "weights.mbnw";

// A model bundle is a directory holding arch.txt and weights.mbnw.
inline void save_model(const std::string& dir, const Model& m) {
  std::filesystem::create_directories(dir);
  std::ofstream arch(std::filesystem::path(dir) / kArchFileName, std::ios::trunc);
  if (!arch) throw FormatError(FormatError::Kind::kIo, "cannot write " + dir + "/" + kArchFileName);
  arch << emit_arch(m.arch);
  save_weights((std::filesystem::path(dir) / kWeightFileName).string(), m.weights);
}

inline Model load_model(const std::string& dir) {
  std::ifstream in(std::filesystem::path(dir) / kArchFileName);
  if (!in) throw FormatError(FormatError::Kind::kIo, "cannot open " + dir + "/" + kArchFileName);
  std::stringstream text;
  text << in.rdbuf();
  Model m;
  m.arch = parse_arch(text.str());
  m.weights = load_weights((std::filesystem::path(dir) / kWeightFileName).string(), m.arch);
  return m;
}

struct ForwardOptions {
  // Run every layer through the reference ops instead of the fast paths.
  bool reference_ops = false;
};

struct LayerTrace {
  std::size_t index = 0;
  LayerKind kind = LayerKind::kStdConv;
  FeatureShape out;
  std::int64_t nanos = 0;
};

inline BatchNormParams<float> gather_batchnorm(const WeightStore& w, const std::string& bn, float eps) {
  auto vec = [&](const char* field) {
    const Tensor& t = w.at(bn + "/" + field);
    return std::vector<float>(t.data().begin(), t.data().end());
  };
  return BatchNormParams<float>{vec("gamma"), vec("beta"), vec("running_mean"), vec("running_var"), eps};
}

// Runs a Model. Owns the im2col scratch buffer, sized once for the largest
// standard conv; one Engine per thread.
class Engine {
 public:
  explicit Engine(const Model& model) : model_(model), names_(layer_param_names(model.arch)) {
    model_.validate();
    std::size_t rows = 0, cols = 0;
    for (std::size_t i = 0; i < model_.arch.size(); ++i) {
      const auto& l = model_.arch[i];
      if (l.kind != LayerKind::kStdConv) continue;
      const auto& s = model_.arch.shapes()[i];
      std::size_t r = s.out.height * s.out.width, c = l.kernel * l.kernel * l.in_channels;
      if (r * c > rows * cols) rows = r, cols = c;
    }
    if (rows) scratch_.reserve(rows, cols);
  }

  // Class probabilities, shaped (batch, classes).
  Tensor forward(const Tensor& input, const ForwardOptions& opts = {}) {
    if (model_.bn_mode != BnMode::kInfer) throw ValidationError("forward requires batchnorm in infer mode");
    const FeatureShape& want = model_.arch.input();
    const Shape& is = input.shape();
    if (is.rank() != 4 || is.height() != want.height || is.width() != want.width || is.channels() != want.channels) {
      throw ShapeError("input shape " + is.str() + " does not match expected (N," + std::to_string(want.height) + "," +
                       std::to_string(want.width) + "," + std::to_string(want.channels) + ")");
    }
    trace_.clear();
    Tensor x = input;
    for (std::size_t i = 0; i < model_.arch.size(); ++i) {
      auto t0 = std::chrono::steady_clock::now();
      x = run_layer(i, x, opts);
      auto t1 = std::chrono::steady_clock::now();
      validate_finite(x, "output of layer " + std::to_string(i), static_cast<long>(i));
      const Shape& s = x.shape();
      FeatureShape fs = s.rank() == 4 ? FeatureShape{s.height(), s.width(), s.channels()} : FeatureShape{1, 1, s[1]};
      trace_.push_back({i, model_.arch[i].kind, fs, std::chrono::duration_cast<std::chrono::nanoseconds>(t1 - t0).count()});
    }
    return x;
  }

  const std::vector<LayerTrace>& trace() const { return trace_; }

 private:
  Tensor run_layer(std::size_t i, const Tensor& x, const ForwardOptions& opts) {
    const LayerSpec& l = model_.arch[i];
    const auto& n = names_[i];
    const WeightStore& w = model_.weights;
    ConvConfig cfg{l.stride, Padding::kSame};
    Tensor y;
    switch (l.kind) {
      case LayerKind::kStdConv:
        y = opts.reference_ops ? conv2d_std_ref(x, w.at(n.kernel), cfg) : conv2d_std_gemm(x, w.at(n.kernel), cfg, scratch_);
        break;
      case LayerKind::kDepthwiseConv:
        y = opts.reference_ops ? conv2d_depthwise_ref(x, w.at(n.kernel), cfg)
                               : conv2d_depthwise_direct(x, w.at(n.kernel), cfg);
        break;
      case LayerKind::kPointwiseConv:
        y = opts.reference_ops ? conv2d_pointwise_ref(x, w.at(n.kernel)) : conv2d_pointwise_gemm(x, w.at(n.kernel));
        break;
      case LayerKind::kAvgPool:
        return avgpool_global(x);
      case LayerKind::kFullyConnected:
        return fully_connected(x, w.at(n.kernel), w.at(n.bias));
      case LayerKind::kSoftmax:
        return softmax(x);
    }
    if (const Tensor* b = w.find(n.bias)) add_channel_bias(y, *b);
    if (l.has_bn_relu) {
      y = batchnorm_fwd(y, gather_batchnorm(w, n.bn, model_.bn_epsilon), BnMode::kInfer).output;
      y = relu(y);
    }
    return y;
  }

  const Model& model_;
  std::vector<LayerParamNames> names_;
  Im2colBuffer<float> scratch_;
  std::vector<LayerTrace> trace_;
};

inline Tensor forward(const Model& model, const Tensor& input, const ForwardOptions& opts = {}) {
  Engine e(model);
  return e.forward(input, opts);
}

// Folds inference batchnorm into each conv: kernel scaled by
// gamma/sqrt(var+eps) per output channel, bias = scale*(bias - mean) + beta.
// The batchnorm is left as an exact identity (gamma 1, beta 0, mean 0,
// var 1, eps 0), so folding again changes nothing.
inline Model fold_batchnorm(const Model& model) {
  if (model.bn_mode != BnMode::kInfer) throw ValidationError("batchnorm folding requires infer mode");
  model.validate();
  Model out = model;
  auto names = layer_param_names(model.arch);
  for (std::size_t i = 0; i < model.arch.size(); ++i) {
    const LayerSpec& l = model.arch[i];
    if (!l.is_conv() || !l.has_bn_relu) continue;
    const auto& n = names[i];
    auto bn = gather_batchnorm(model.weights, n.bn, model.bn_epsilon);
    std::size_t c_n = l.out_channels;
    Tensor& k = out.weights.at(n.kernel);
    Tensor bias = model.weights.find(n.bias) ? model.weights.at(n.bias) : Tensor(Shape{c_n});
    for (std::size_t c = 0; c < c_n; ++c) {
      float scale = bn.gamma[c] / std::sqrt(bn.running_var[c] + bn.epsilon);
      for (std::size_t j = c; j < k.size(); j += c_n) k[j] *= scale;
      bias[c] = scale * (bias[c] - bn.running_mean[c]) + bn.beta[c];
    }
    out.weights.put(n.bias, std::move(bias));
    out.weights.at(n.bn + "/gamma") = Tensor(Shape{c_n}, 1.0f);
    out.weights.at(n.bn + "/beta") = Tensor(Shape{c_n}, 0.0f);
    out.weights.at(n.bn + "/running_mean") = Tensor(Shape{c_n}, 0.0f);
    out.weights.at(n.bn + "/running_var") = Tensor(Shape{c_n}, 1.0f);
  }
  out.bn_epsilon = 0.0f;
  return out;
}

}  // namespace mbnet
