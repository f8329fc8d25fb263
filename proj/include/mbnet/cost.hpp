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

// Analytic Mult-Add and parameter accounting.
//
// Conventions: one Mult-Add is one multiply-accumulate. Conv costs use the
// output spatial size. Batchnorm, pooling, softmax and biases cost nothing.
// Parameters are conv weights plus FC weights and FC bias.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <initializer_list>
#include <string>
#include <vector>

#include "mbnet/arch.hpp"
#include "mbnet/error.hpp"
#include "mbnet/tensor.hpp"

namespace mbnet {

struct Cost {
  std::uint64_t mult_adds = 0;
  std::uint64_t params = 0;

  Cost& operator+=(const Cost& o) {
    mult_adds += o.mult_adds;
    params += o.params;
    return *this;
  }
  friend Cost operator+(Cost a, const Cost& b) { return a += b; }
  friend bool operator==(const Cost&, const Cost&) = default;
};

namespace detail {

inline void require_positive(std::initializer_list<std::uint64_t> vs) {
  for (auto v : vs) {
    if (v == 0) throw ValidationError("cost arguments must be positive");
  }
}

inline std::uint64_t mul(std::initializer_list<std::uint64_t> vs) {
  std::uint64_t r = 1;
  for (auto v : vs) r = checked_mul(r, v);
  return r;
}

// Rounds a positive scaled size to the nearest integer, at least 1.
inline std::uint64_t round_scaled(std::uint64_t v, double f) {
  auto r = static_cast<std::uint64_t>(std::floor(static_cast<double>(v) * f + 0.5));
  return r < 1 ? 1 : r;
}

}  // namespace detail

// Dk*Dk*M*N*Df*Df mult-adds, Dk*Dk*M*N params. Df is the output size.
inline Cost cost_std_conv(std::uint64_t dk, std::uint64_t m, std::uint64_t n, std::uint64_t df) {
  detail::require_positive({dk, m, n, df});
  return {detail::mul({dk, dk, m, n, df, df}), detail::mul({dk, dk, m, n})};
}

inline Cost cost_depthwise(std::uint64_t dk, std::uint64_t m, std::uint64_t df) {
  detail::require_positive({dk, m, df});
  return {detail::mul({dk, dk, m, df, df}), detail::mul({dk, dk, m})};
}

inline Cost cost_pointwise(std::uint64_t m, std::uint64_t n, std::uint64_t df) {
  return cost_std_conv(1, m, n, df);
}

// Depthwise filtering plus 1x1 combination.
inline Cost cost_separable(std::uint64_t dk, std::uint64_t m, std::uint64_t n, std::uint64_t df) {
  return cost_depthwise(dk, m, df) + cost_pointwise(m, n, df);
}

// Separable cost with channels thinned by alpha and the map shrunk by rho.
// alpha*M, alpha*N and rho*Df are rounded to the nearest integer.
inline Cost cost_separable_scaled(std::uint64_t dk, std::uint64_t m, std::uint64_t n, std::uint64_t df,
                                  double alpha, double rho) {
  if (!(alpha > 0 && alpha <= 1) || !(rho > 0 && rho <= 1)) {
    throw ValidationError("alpha and rho must be in (0, 1]");
  }
  detail::require_positive({dk, m, n, df});
  return cost_separable(dk, scale_channels(m, alpha), scale_channels(n, alpha), detail::round_scaled(df, rho));
}

// Separable over standard cost: 1/N + 1/Dk^2.
inline double reduction_ratio(std::uint64_t dk, std::uint64_t n) {
  detail::require_positive({dk, n});
  return 1.0 / static_cast<double>(n) + 1.0 / static_cast<double>(dk * dk);
}

struct LayerCost {
  std::size_t index = 0;
  LayerKind kind = LayerKind::kStdConv;
  std::size_t kernel = 0;
  Cost cost;
};

// Aggregate for one layer type, e.g. all 1x1 convs.
struct KindShare {
  LayerKind kind = LayerKind::kStdConv;
  std::size_t kernel = 0;
  std::string label;
  Cost cost;
  double mult_add_pct = 0;
  double param_pct = 0;
};

struct CostReport {
  std::vector<LayerCost> layers;
  Cost total;
  std::vector<KindShare> by_kind;
};

inline std::string kind_label(LayerKind kind, std::size_t kernel) {
  auto kk = std::to_string(kernel) + "x" + std::to_string(kernel);
  switch (kind) {
    case LayerKind::kStdConv: return "Conv " + kk;
    case LayerKind::kDepthwiseConv: return "Conv DW " + kk;
    case LayerKind::kPointwiseConv: return "Conv 1x1";
    case LayerKind::kFullyConnected: return "Fully Connected";
    case LayerKind::kAvgPool: return "Avg Pool";
    case LayerKind::kSoftmax: return "Softmax";
  }
  return "?";
}

inline Cost layer_cost(const LayerSpec& l, const LayerShapes& s) {
  std::uint64_t out_px = detail::mul({s.out.height, s.out.width});
  switch (l.kind) {
    case LayerKind::kStdConv:
      return {detail::mul({l.kernel, l.kernel, l.in_channels, l.out_channels, out_px}),
              detail::mul({l.kernel, l.kernel, l.in_channels, l.out_channels})};
    case LayerKind::kDepthwiseConv:
      return {detail::mul({l.kernel, l.kernel, l.in_channels, out_px}), detail::mul({l.kernel, l.kernel, l.in_channels})};
    case LayerKind::kPointwiseConv:
      return {detail::mul({l.in_channels, l.out_channels, out_px}), detail::mul({l.in_channels, l.out_channels})};
    case LayerKind::kFullyConnected:
      return {detail::mul({l.in_channels, l.out_channels}), detail::mul({l.in_channels, l.out_channels}) + l.out_channels};
    case LayerKind::kAvgPool:
    case LayerKind::kSoftmax:
      return {};
  }
  return {};
}

// Shares of mult-adds and params per (kind, kernel) group, in first-seen
// order. Parameter-free kinds are omitted.
inline std::vector<KindShare> breakdown_by_type(const CostReport& report) {
  std::vector<KindShare> out;
  for (const auto& lc : report.layers) {
    if (lc.kind == LayerKind::kAvgPool || lc.kind == LayerKind::kSoftmax) continue;
    std::size_t k = lc.kind == LayerKind::kFullyConnected ? 0 : lc.kernel;
    KindShare* slot = nullptr;
    for (auto& s : out) {
      if (s.kind == lc.kind && s.kernel == k) slot = &s;
    }
    if (!slot) {
      out.push_back(KindShare{lc.kind, k, kind_label(lc.kind, k), {}, 0, 0});
      slot = &out.back();
    }
    slot->cost += lc.cost;
  }
  for (auto& s : out) {
    if (report.total.mult_adds) s.mult_add_pct = 100.0 * double(s.cost.mult_adds) / double(report.total.mult_adds);
    if (report.total.params) s.param_pct = 100.0 * double(s.cost.params) / double(report.total.params);
  }
  return out;
}

inline CostReport analyze(const ArchDescriptor& arch) {
  CostReport r;
  const auto& shapes = arch.shapes();
  for (std::size_t i = 0; i < arch.size(); ++i) {
    const LayerSpec& l = arch[i];
    Cost c = layer_cost(l, shapes[i]);
    r.layers.push_back(LayerCost{i, l.kind, l.kernel, c});
    r.total += c;
  }
  r.by_kind = breakdown_by_type(r);
  return r;
}

struct SweepRow {
  double alpha = 1;
  std::size_t resolution = 224;
  Cost cost;
};

// Cross product of width multipliers and input resolutions.
inline std::vector<SweepRow> sweep(const std::vector<double>& alphas, const std::vector<std::size_t>& resolutions,
                                   bool shallow = false, std::size_t classes = 1000) {
  std::vector<SweepRow> rows;
  for (double a : alphas) {
    for (std::size_t res : resolutions) {
      rows.push_back({a, res, analyze(build_mobilenet(Hyperparams{a, res, shallow, classes})).total});
    }
  }
  return rows;
}

// Millions with a fixed number of decimals, rounded half away from zero.
inline std::string format_millions(std::uint64_t v, int decimals) {
  double m = static_cast<double>(v) / 1e6;
  double scale = std::pow(10.0, decimals);
  double rounded = std::floor(m * scale + 0.5) / scale;
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, rounded);
  return buf;
}

// Millions to `digits` significant figures, never fewer than 0 decimals:
// 462422016 -> "462", 52283392 -> "52.3".
inline std::string format_millions_sig(std::uint64_t v, int digits) {
  if (v == 0) return "0";
  double m = static_cast<double>(v) / 1e6;
  int magnitude = static_cast<int>(std::floor(std::log10(m))) + 1;
  int decimals = std::max(0, digits - magnitude);
  double scale = std::pow(10.0, decimals);
  // Rounding may carry into a new leading digit (9.996 -> 10.0).
  if (decimals > 0 && std::floor(m * scale + 0.5) / scale >= std::pow(10.0, magnitude)) --decimals;
  return format_millions(v, decimals);
}

struct ExampleRow {
  std::string label;
  Cost cost;
};

// One layer shrunk step by step: standard conv, then separable, then
// thinned by alpha, then the map reduced by rho. Each row builds on the
// previous one.
inline std::vector<ExampleRow> cumulative_layer_rows(std::uint64_t dk = 3, std::uint64_t m = 512, std::uint64_t n = 512,
                                                     std::uint64_t df = 14, double alpha = 0.75, double rho = 0.714) {
  char a[32], r[32];
  std::snprintf(a, sizeof a, "alpha=%g", alpha);
  std::snprintf(r, sizeof r, "rho=%g", rho);
  return {
      {"Convolution", cost_std_conv(dk, m, n, df)},
      {"Depthwise Separable Conv", cost_separable(dk, m, n, df)},
      {a, cost_separable_scaled(dk, m, n, df, alpha, 1.0)},
      {r, cost_separable_scaled(dk, m, n, df, alpha, rho)},
  };
}

}  // namespace mbnet
