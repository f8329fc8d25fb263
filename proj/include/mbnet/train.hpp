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

// Synchronous single-worker training over the reference ops: a caching
// training graph, RMSprop, cross-entropy, the finite-difference gradient
// checker and a small synthetic classification task.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <numbers>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "mbnet/arch.hpp"
#include "mbnet/arch_text.hpp"
#include "mbnet/error.hpp"
#include "mbnet/ops.hpp"
#include "mbnet/ops_backward.hpp"
#include "mbnet/tensor.hpp"
#include "mbnet/weights.hpp"

namespace mbnet {

template <typename T>
struct Gradients {
  BasicWeightStore<T> params;  // trainable tensors only
  BasicTensor<T> input;
};

// Forward/backward over an ArchDescriptor whose last layer is softmax.
template <typename T>
class TrainGraph {
 public:
  TrainGraph(ArchDescriptor arch, BasicWeightStore<T> params, T bn_epsilon = T(1e-3), T bn_momentum = T(0.99))
      : arch_(std::move(arch)),
        params_(std::move(params)),
        names_(layer_param_names(arch_)),
        eps_(bn_epsilon),
        momentum_(bn_momentum) {
    validate_weights(arch_, params_);
    if (arch_.size() == 0 || arch_.layers().back().kind != LayerKind::kSoftmax) {
      throw ValidationError("training graph needs a softmax output layer");
    }
  }

  const ArchDescriptor& arch() const { return arch_; }
  const BasicWeightStore<T>& params() const { return params_; }

  // Sign pattern of every ReLU input from the last forward pass.
  std::vector<bool> relu_pattern() const {
    std::vector<bool> bits;
    for (const auto& c : cache_) {
      for (T v : c.bn_out.data()) bits.push_back(v > 0);
    }
    return bits;
  }
  BasicWeightStore<T>& params() { return params_; }

  // Class probabilities. Train mode normalizes with batch statistics and,
  // if requested, folds them into the running statistics.
  BasicTensor<T> forward(const BasicTensor<T>& input, BnMode mode, bool update_running_stats = false) {
    mode_ = mode;
    cache_.assign(arch_.size(), {});
    BasicTensor<T> x = input;
    for (std::size_t i = 0; i < arch_.size(); ++i) {
      const LayerSpec& l = arch_[i];
      const auto& n = names_[i];
      Cache& c = cache_[i];
      c.input = x;
      ConvConfig cfg{l.stride, Padding::kSame};
      switch (l.kind) {
        case LayerKind::kStdConv: x = conv2d_std_ref(x, params_.at(n.kernel), cfg); break;
        case LayerKind::kDepthwiseConv: x = conv2d_depthwise_ref(x, params_.at(n.kernel), cfg); break;
        case LayerKind::kPointwiseConv: x = conv2d_pointwise_ref(x, params_.at(n.kernel)); break;
        case LayerKind::kAvgPool: x = avgpool_global(x); break;
        case LayerKind::kFullyConnected: x = fully_connected(x, params_.at(n.kernel), params_.at(n.bias)); break;
        case LayerKind::kSoftmax: x = softmax(x); break;
      }
      if (l.is_conv()) {
        if (const auto* b = params_.find(n.bias)) add_channel_bias(x, *b);
        if (l.has_bn_relu) {
          c.conv_out = x;
          auto bn = batchnorm(n.bn);
          auto r = batchnorm_fwd(x, bn, mode);
          if (mode == BnMode::kTrain) {
            c.mean = r.batch_mean;
            c.var = r.batch_var;
            if (update_running_stats) update_running(n.bn, r.batch_mean, r.batch_var);
          } else {
            c.mean = bn.running_mean;
            c.var = bn.running_var;
          }
          c.bn_out = r.output;
          x = relu(r.output);
        }
      }
    }
    probs_ = x;
    return x;
  }

  // Gradients of mean cross-entropy against `labels` for the last forward.
  Gradients<T> backward(const std::vector<std::size_t>& labels) {
    if (cache_.size() != arch_.size() || probs_.empty()) {
      throw ValidationError("backward called without cached forward activations");
    }
    Gradients<T> g;
    BasicTensor<T> d;
    // Walk layers back to front, collecting gradients in reverse and
    // re-inserting them in layer order afterwards.
    std::vector<std::pair<std::string, BasicTensor<T>>> rev;
    for (std::size_t ii = arch_.size(); ii-- > 0;) {
      const LayerSpec& l = arch_[ii];
      const auto& n = names_[ii];
      const Cache& c = cache_[ii];
      ConvConfig cfg{l.stride, Padding::kSame};
      switch (l.kind) {
        case LayerKind::kSoftmax:
          if (ii + 1 != arch_.size()) throw ValidationError("softmax must be the last layer");
          d = softmax_xent_bwd(probs_, labels);
          continue;
        case LayerKind::kFullyConnected: {
          auto r = fc_bwd(c.input, params_.at(n.kernel), d);
          rev.emplace_back(n.bias, std::move(r.d_bias));
          rev.emplace_back(n.kernel, std::move(r.d_weights));
          d = std::move(r.d_input);
          continue;
        }
        case LayerKind::kAvgPool:
          d = avgpool_global_bwd(c.input.shape(), d.reshaped(Shape{c.input.shape().batch(), 1, 1, l.out_channels}));
          continue;
        default:
          break;
      }
      if (l.has_bn_relu) {
        d = relu_bwd(c.bn_out, d);
        auto bn = batchnorm(n.bn);
        auto r = batchnorm_bwd(c.conv_out, bn, c.mean, c.var, d, mode_);
        rev.emplace_back(n.bn + "/beta", BasicTensor<T>(Shape{r.d_beta.size()}, r.d_beta));
        rev.emplace_back(n.bn + "/gamma", BasicTensor<T>(Shape{r.d_gamma.size()}, r.d_gamma));
        d = std::move(r.d_input);
      }
      if (params_.contains(n.bias)) {
        BasicTensor<T> db(Shape{l.out_channels});
        for (std::size_t i = 0; i < d.size(); ++i) db[i % l.out_channels] += d[i];
        rev.emplace_back(n.bias, std::move(db));
      }
      ConvGrads<T> r;
      switch (l.kind) {
        case LayerKind::kStdConv: r = conv2d_std_bwd(c.input, params_.at(n.kernel), d, cfg); break;
        case LayerKind::kDepthwiseConv: r = conv2d_depthwise_bwd(c.input, params_.at(n.kernel), d, cfg); break;
        default: r = conv2d_pointwise_bwd(c.input, params_.at(n.kernel), d); break;
      }
      rev.emplace_back(n.kernel, std::move(r.d_kernel));
      d = std::move(r.d_input);
    }
    for (auto it = rev.rbegin(); it != rev.rend(); ++it) g.params.insert(it->first, std::move(it->second));
    g.input = std::move(d);
    return g;
  }

 private:
  struct Cache {
    BasicTensor<T> input, conv_out, bn_out;
    std::vector<T> mean, var;
  };

  BatchNormParams<T> batchnorm(const std::string& bn) const {
    auto vec = [&](const char* f) {
      const auto& t = params_.at(bn + "/" + f);
      return std::vector<T>(t.data().begin(), t.data().end());
    };
    return BatchNormParams<T>{vec("gamma"), vec("beta"), vec("running_mean"), vec("running_var"), eps_};
  }

  void update_running(const std::string& bn, const std::vector<T>& mean, const std::vector<T>& var) {
    auto& rm = params_.at(bn + "/running_mean");
    auto& rv = params_.at(bn + "/running_var");
    for (std::size_t c = 0; c < mean.size(); ++c) {
      rm[c] = momentum_ * rm[c] + (T(1) - momentum_) * mean[c];
      rv[c] = momentum_ * rv[c] + (T(1) - momentum_) * var[c];
    }
  }

  ArchDescriptor arch_;
  BasicWeightStore<T> params_;
  std::vector<LayerParamNames> names_;
  T eps_, momentum_;
  BnMode mode_ = BnMode::kInfer;
  std::vector<Cache> cache_;
  BasicTensor<T> probs_;
};

template <typename T>
struct XentResult {
  T loss = 0;
  BasicTensor<T> d_logits;
};

// Mean -log p[label] and its gradient w.r.t. the softmax logits.
template <typename T>
XentResult<T> xent_loss(const BasicTensor<T>& probs, const std::vector<std::size_t>& labels) {
  XentResult<T> r;
  r.d_logits = softmax_xent_bwd(probs, labels);
  std::size_t batch = probs.shape()[0], k = probs.size() / batch;
  for (std::size_t n = 0; n < batch; ++n) {
    T p = std::max(probs[n * k + labels[n]], std::numeric_limits<T>::min());
    r.loss -= std::log(p);
  }
  r.loss /= static_cast<T>(batch);
  return r;
}

struct RmsPropConfig {
  double learning_rate = 1e-3;
  double decay = 0.9;
  double epsilon = 1e-8;
};

// L2 coefficients. Depthwise kernels get their own (default zero).
struct RegPolicy {
  double l2 = 0;
  double l2_depthwise = 0;

  void validate() const {
    if (l2 < 0 || l2_depthwise < 0) throw ValidationError("l2 coefficients must be >= 0");
  }
};

inline std::map<std::string, ParamRole> param_roles(const ArchDescriptor& arch) {
  std::map<std::string, ParamRole> roles;
  for (const auto& s : parameter_specs(arch)) roles.emplace(s.name, s.role);
  auto names = layer_param_names(arch);
  for (std::size_t i = 0; i < arch.size(); ++i) {
    if (arch[i].is_conv()) roles.emplace(names[i].bias, ParamRole::kConvBias);
  }
  return roles;
}

// One RMS accumulator per trainable tensor.
template <typename T>
class OptimState {
 public:
  OptimState(const BasicWeightStore<T>& params, RmsPropConfig cfg = {}, std::map<std::string, ParamRole> roles = {})
      : cfg_(cfg), roles_(std::move(roles)) {
    for (const auto& [name, t] : params.entries()) {
      if (is_trainable(role(name))) acc_.insert(name, BasicTensor<T>(t.shape()));
    }
  }

  ParamRole role(const std::string& name) const {
    auto it = roles_.find(name);
    return it == roles_.end() ? ParamRole::kConvBias : it->second;
  }

  const RmsPropConfig& config() const { return cfg_; }
  RmsPropConfig& config() { return cfg_; }
  const BasicWeightStore<T>& accumulators() const { return acc_; }
  BasicWeightStore<T>& accumulators() { return acc_; }

 private:
  RmsPropConfig cfg_;
  std::map<std::string, ParamRole> roles_;
  BasicWeightStore<T> acc_;
};

// acc <- decay*acc + (1-decay)*g^2; p <- p - lr*g/sqrt(acc + eps), with the
// policy's l2 term added to g first (kernels and FC weights only).
template <typename T>
void rmsprop_step(BasicWeightStore<T>& params, const BasicWeightStore<T>& grads, OptimState<T>& state,
                  const RegPolicy& policy = {}) {
  policy.validate();
  const auto& cfg = state.config();
  const T lr = static_cast<T>(cfg.learning_rate), decay = static_cast<T>(cfg.decay);
  const T eps = static_cast<T>(cfg.epsilon);
  for (const auto& [name, g] : grads.entries()) {
    auto& p = params.at(name);
    auto& acc = state.accumulators().at(name);
    if (g.shape() != p.shape() || acc.shape() != p.shape()) {
      throw ShapeError("gradient for '" + name + "' has shape " + g.shape().str() + ", parameter is " +
                       p.shape().str());
    }
    T l2 = 0;
    switch (state.role(name)) {
      case ParamRole::kConvKernel:
      case ParamRole::kFcWeight: l2 = static_cast<T>(policy.l2); break;
      case ParamRole::kDepthwiseKernel: l2 = static_cast<T>(policy.l2_depthwise); break;
      default: break;
    }
    for (std::size_t i = 0; i < p.size(); ++i) {
      T gi = g[i];
      if (l2 != 0) gi += l2 * p[i];
      acc[i] = decay * acc[i] + (T(1) - decay) * gi * gi;
      p[i] -= lr * gi / std::sqrt(acc[i] + eps);
    }
  }
}

// ---------------------------------------------------------------------------
// Finite-difference gradient checking.

// input 8x8x3; conv 3->4, dw s2, pw 4->4, pool, fc 4->3, softmax.
inline ArchDescriptor grad_check_micro_arch() {
  return parse_arch(
      "input 8x8x3\n"
      "conv s1 3x3 3->4\n"
      "dw s2 3x3 4\n"
      "pw 4->4\n"
      "avgpool\n"
      "fc 4->3\n"
      "softmax\n");
}

struct GradCheckEntry {
  std::string name;
  std::size_t count = 0;
  std::size_t kink_skips = 0;  // elements whose +-h probes flip a ReLU
  double max_abs_err = 0;
  double max_abs_grad = 0;
  // max |analytic - numeric| over max |numeric|, taken over the tensor.
  double max_rel_err = 0;
  // Worst per-element |a-n| / max(|a|, |n|); dominated by roundoff for
  // elements whose gradient is near zero.
  double max_elem_rel_err = 0;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  double worst_rel_err() const {
    double w = 0;
    for (const auto& e : entries) w = std::max(w, e.max_rel_err);
    return w;
  }
  std::size_t kink_skips() const {
    std::size_t n = 0;
    for (const auto& e : entries) n += e.kink_skips;
    return n;
  }
};

struct GradCheckConfig {
  double step = 1e-3;
  std::size_t batch = 2;
  BnMode bn_mode = BnMode::kInfer;
  bool zero_input = false;
  bool inert_batchnorm = false;
  bool skip_kinks = true;
};

// |a-n| / max(|a|, |n|); 0 when both are exactly 0.
inline double grad_rel_err(double analytic, double numeric) {
  double denom = std::max(std::abs(analytic), std::abs(numeric));
  return denom == 0 ? 0.0 : std::abs(analytic - numeric) / denom;
}

struct GradCheckProblem {
  TrainGraph<double> graph;
  BasicTensor<double> input;
  std::vector<std::size_t> labels;
  BnMode mode;

  double loss() {
    return xent_loss(graph.forward(input, mode), labels).loss;
  }
};

inline GradCheckProblem make_grad_check_problem(const ArchDescriptor& arch, std::uint64_t seed,
                                                const GradCheckConfig& cfg) {
  std::mt19937_64 rng(seed);
  auto params = init_weights<double>(arch, seed);
  if (!cfg.inert_batchnorm) {
    std::uniform_real_distribution<double> gamma(0.5, 1.5), beta(-0.5, 0.5), mean(-0.2, 0.2), var(0.5, 1.5);
    for (auto& [name, t] : params.entries()) {
      auto pick = [&](std::uniform_real_distribution<double>& d) {
        for (auto& v : t.data()) v = d(rng);
      };
      if (name.ends_with("/gamma")) pick(gamma);
      else if (name.ends_with("/beta")) pick(beta);
      else if (name.ends_with("/running_mean")) pick(mean);
      else if (name.ends_with("/running_var")) pick(var);
    }
  }
  const auto& in = arch.input();
  BasicTensor<double> x(Shape{cfg.batch, in.height, in.width, in.channels});
  if (!cfg.zero_input) {
    std::normal_distribution<double> nd(0.0, 1.0);
    for (auto& v : x.data()) v = nd(rng);
  }
  std::uniform_int_distribution<std::size_t> label(0, arch.classes() - 1);
  std::vector<std::size_t> labels(cfg.batch);
  for (auto& l : labels) l = label(rng);
  return GradCheckProblem{TrainGraph<double>(arch, std::move(params)), std::move(x), std::move(labels), cfg.bn_mode};
}

struct CentralDifference {
  double estimate = 0;
  bool crosses_kink = false;
};

// (L(p+h) - L(p-h)) / 2h for one element of a tensor; name "input"
// addresses the network input. Flags probes that change any ReLU sign.
inline CentralDifference central_difference_probe(GradCheckProblem& prob, const std::string& name, std::size_t i,
                                                  double h) {
  prob.graph.forward(prob.input, prob.mode);
  auto base = prob.graph.relu_pattern();
  double& v = name == "input" ? prob.input[i] : prob.graph.params().at(name)[i];
  const double saved = v;
  v = saved + h;
  double up = prob.loss();
  bool kink = prob.graph.relu_pattern() != base;
  v = saved - h;
  double down = prob.loss();
  kink = kink || prob.graph.relu_pattern() != base;
  v = saved;
  return {(up - down) / (2 * h), kink};
}

inline double central_difference(GradCheckProblem& prob, const std::string& name, std::size_t i, double h) {
  return central_difference_probe(prob, name, i, h).estimate;
}

// Compares every trainable parameter gradient (and the input gradient)
// against f64 central differences.
inline GradCheckReport grad_check(const ArchDescriptor& arch, std::uint64_t seed, const GradCheckConfig& cfg = {}) {
  auto prob = make_grad_check_problem(arch, seed, cfg);
  prob.graph.forward(prob.input, prob.mode);
  Gradients<double> g = prob.graph.backward(prob.labels);

  GradCheckReport report;
  auto check = [&](const std::string& name, const BasicTensor<double>& analytic) {
    GradCheckEntry e;
    e.name = name;
    e.count = analytic.size();
    double max_num = 0;
    for (std::size_t i = 0; i < analytic.size(); ++i) {
      auto cd = central_difference_probe(prob, name, i, cfg.step);
      if (cd.crosses_kink && cfg.skip_kinks) {
        ++e.kink_skips;
        continue;
      }
      e.max_abs_err = std::max(e.max_abs_err, std::abs(analytic[i] - cd.estimate));
      e.max_abs_grad = std::max(e.max_abs_grad, std::abs(analytic[i]));
      e.max_elem_rel_err = std::max(e.max_elem_rel_err, grad_rel_err(analytic[i], cd.estimate));
      max_num = std::max(max_num, std::abs(cd.estimate));
    }
    double denom = std::max(max_num, e.max_abs_grad);
    e.max_rel_err = denom == 0 ? 0.0 : e.max_abs_err / denom;
    report.entries.push_back(e);
  };
  for (const auto& [name, t] : g.params.entries()) check(name, t);
  check("input", g.input);
  return report;
}

// Train-mode batchnorm in isolation: loss = sum(r * bn(x)) for a fixed
// random readout r. Checks d_input, d_gamma and d_beta.
inline GradCheckReport grad_check_batchnorm_train(std::uint64_t seed, const Shape& shape = Shape{2, 4, 4, 4},
                                                  double step = 1e-3) {
  if (shape.rank() != 4) throw ShapeError("batchnorm check expects a rank-4 shape, got " + shape.str());
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd(0.0, 1.0);
  std::uniform_real_distribution<double> gamma(0.5, 1.5), beta(-0.5, 0.5);
  BasicTensor<double> x(shape), r(shape);
  for (auto& v : x.data()) v = nd(rng);
  for (auto& v : r.data()) v = nd(rng);
  auto p = BatchNormParams<double>::identity(shape.channels());
  for (auto& v : p.gamma) v = gamma(rng);
  for (auto& v : p.beta) v = beta(rng);

  auto loss = [&] {
    auto y = batchnorm_fwd(x, p, BnMode::kTrain).output;
    double s = 0;
    for (std::size_t i = 0; i < y.size(); ++i) s += r[i] * y[i];
    return s;
  };
  auto fwd = batchnorm_fwd(x, p, BnMode::kTrain);
  auto grads = batchnorm_bwd(x, p, fwd.batch_mean, fwd.batch_var, r, BnMode::kTrain);

  GradCheckReport report;
  auto check = [&](const std::string& name, std::span<double> values, std::span<const double> analytic) {
    GradCheckEntry e;
    e.name = name;
    e.count = values.size();
    double max_num = 0;
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double saved = values[i];
      values[i] = saved + step;
      double up = loss();
      values[i] = saved - step;
      double down = loss();
      values[i] = saved;
      double num = (up - down) / (2 * step);
      e.max_abs_err = std::max(e.max_abs_err, std::abs(analytic[i] - num));
      e.max_abs_grad = std::max(e.max_abs_grad, std::abs(analytic[i]));
      e.max_elem_rel_err = std::max(e.max_elem_rel_err, grad_rel_err(analytic[i], num));
      max_num = std::max(max_num, std::abs(num));
    }
    double denom = std::max(max_num, e.max_abs_grad);
    e.max_rel_err = denom == 0 ? 0.0 : e.max_abs_err / denom;
    report.entries.push_back(e);
  };
  check("bn/input", x.data(), grads.d_input.data());
  check("bn/gamma", p.gamma, grads.d_gamma);
  check("bn/beta", p.beta, grads.d_beta);
  return report;
}

// ---------------------------------------------------------------------------
// Toy training task.

// Four-or-more-class images: each class has its own base color and stripe
// orientation; phase, amplitude and noise vary per sample.
class ToyDataset {
 public:
  ToyDataset(std::size_t resolution, std::size_t classes, std::uint64_t seed)
      : res_(resolution), classes_(classes), rng_(seed) {
    if (classes_ < 2) throw ValidationError("toy dataset needs >= 2 classes");
    std::uniform_real_distribution<double> u(-0.6, 0.6);
    for (std::size_t c = 0; c < classes_; ++c) {
      colors_.push_back({u(rng_), u(rng_), u(rng_)});
      angles_.push_back(std::numbers::pi * static_cast<double>(c) / static_cast<double>(classes_));
    }
  }

  void sample(std::size_t batch, Tensor& images, std::vector<std::size_t>& labels) {
    images = Tensor(Shape{batch, res_, res_, 3});
    labels.assign(batch, 0);
    std::uniform_int_distribution<std::size_t> cls(0, classes_ - 1);
    std::uniform_real_distribution<double> phase(0, 2 * std::numbers::pi), amp(0.5, 1.0);
    std::normal_distribution<double> noise(0.0, 0.3);
    const double freq = 2 * std::numbers::pi * 3.0 / static_cast<double>(res_);
    for (std::size_t n = 0; n < batch; ++n) {
      std::size_t c = cls(rng_);
      labels[n] = c;
      double ph = phase(rng_), a = amp(rng_);
      double ca = std::cos(angles_[c]), sa = std::sin(angles_[c]);
      for (std::size_t y = 0; y < res_; ++y) {
        for (std::size_t x = 0; x < res_; ++x) {
          double stripe = a * std::sin(freq * (ca * double(x) + sa * double(y)) + ph);
          for (std::size_t ch = 0; ch < 3; ++ch) {
            images[((n * res_ + y) * res_ + x) * 3 + ch] =
                static_cast<float>(colors_[c][ch] + 0.5 * stripe + noise(rng_));
          }
        }
      }
    }
  }

 private:
  std::size_t res_, classes_;
  std::mt19937_64 rng_;
  std::vector<std::array<double, 3>> colors_;
  std::vector<double> angles_;
};

struct ToyConfig {
  double alpha = 0.25;
  std::size_t resolution = 16;
  std::size_t conv_layers = 6;
  std::size_t classes = 4;
  std::size_t batch = 32;
  double learning_rate = 1e-3;
  // Per-step multiplicative learning-rate decay; 1 keeps it constant.
  double lr_decay = 1.0;
  RegPolicy reg{1e-5, 0.0};
  // Reuse the first batch at every step instead of drawing a new one.
  bool fixed_batch = false;
};

struct ToyResult {
  std::vector<double> losses;
  WeightStore weights;
  ArchDescriptor arch;
};

inline ArchDescriptor toy_arch(const ToyConfig& cfg) {
  return build_mobilenet_prefix(cfg.alpha, cfg.resolution, cfg.conv_layers, cfg.classes);
}

inline ToyResult train_toy(const ToyConfig& cfg, std::size_t steps, std::uint64_t seed) {
  ArchDescriptor arch = toy_arch(cfg);
  TrainGraph<float> graph(arch, init_weights<float>(arch, seed));
  OptimState<float> state(graph.params(), RmsPropConfig{cfg.learning_rate, 0.9, 1e-8}, param_roles(arch));
  ToyDataset data(cfg.resolution, cfg.classes, seed ^ 0x9e3779b97f4a7c15ULL);
  ToyResult result;
  result.losses.reserve(steps);
  Tensor x;
  std::vector<std::size_t> labels;
  for (std::size_t step = 0; step < steps; ++step) {
    if (step == 0 || !cfg.fixed_batch) data.sample(cfg.batch, x, labels);
    auto probs = graph.forward(x, BnMode::kTrain, true);
    float loss = xent_loss(probs, labels).loss;
    if (!std::isfinite(loss)) {
      throw NumericError("training diverged at step " + std::to_string(step), static_cast<long>(step));
    }
    result.losses.push_back(loss);
    auto g = graph.backward(labels);
    rmsprop_step(graph.params(), g.params, state, cfg.reg);
    state.config().learning_rate *= cfg.lr_decay;
  }
  result.weights = graph.params();
  result.arch = arch;
  return result;
}

// Mean of losses[begin, begin+count).
inline double mean_loss(const std::vector<double>& losses, std::size_t begin, std::size_t count) {
  if (begin + count > losses.size() || count == 0) throw ValidationError("loss window out of range");
  double s = 0;
  for (std::size_t i = begin; i < begin + count; ++i) s += losses[i];
  return s / static_cast<double>(count);
}

}  // namespace mbnet
