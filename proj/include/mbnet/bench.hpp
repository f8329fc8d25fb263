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
#include <chrono>
#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "mbnet/cost.hpp"
#include "mbnet/error.hpp"
#include "mbnet/fast_conv.hpp"
#include "mbnet/model.hpp"
#include "mbnet/ops.hpp"

namespace mbnet {

enum class BenchOp { kStdConvGemm, kStdConvRef, kDepthwise, kDepthwiseRef, kPointwiseGemm, kPointwiseRef };

inline const char* bench_op_name(BenchOp op) {
  switch (op) {
    case BenchOp::kStdConvGemm: return "conv_gemm";
    case BenchOp::kStdConvRef: return "conv_ref";
    case BenchOp::kDepthwise: return "dw_direct";
    case BenchOp::kDepthwiseRef: return "dw_ref";
    case BenchOp::kPointwiseGemm: return "pw_gemm";
    case BenchOp::kPointwiseRef: return "pw_ref";
  }
  return "?";
}

// One conv layer: input height x width x in_channels, square kernel.
struct BenchShape {
  std::size_t height = 14, width = 14, in_channels = 512, out_channels = 512;
  std::size_t kernel = 1, stride = 1;

  std::string str() const {
    return std::to_string(height) + "x" + std::to_string(width) + "x" + std::to_string(in_channels) + "->" +
           std::to_string(out_channels) + " k" + std::to_string(kernel) + " s" + std::to_string(stride);
  }
};

struct BenchReport {
  std::string op;
  std::string shape;
  std::vector<std::int64_t> samples_ns;
  std::int64_t median_ns = 0;
  std::uint64_t mult_adds = 0;
  double effective_gflops = 0;  // 2 flops per mult-add

  std::string csv_row() const {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.3f", effective_gflops);
    return op + "," + shape + "," + std::to_string(median_ns) + "," + std::to_string(mult_adds) + "," + buf;
  }
};

inline constexpr const char* kBenchCsvHeader = "op,shape,median_ns,mult_adds,gflops";

// Median of the samples; mean of the two middle values for even counts.
inline std::int64_t median_ns(std::vector<std::int64_t> samples) {
  if (samples.empty()) throw ValidationError("median of empty sample set");
  std::sort(samples.begin(), samples.end());
  std::size_t n = samples.size();
  return n % 2 ? samples[n / 2] : (samples[n / 2 - 1] + samples[n / 2]) / 2;
}

inline LayerSpec bench_layer(BenchOp op, const BenchShape& s) {
  switch (op) {
    case BenchOp::kStdConvGemm:
    case BenchOp::kStdConvRef: return LayerSpec::std_conv(s.stride, s.kernel, s.in_channels, s.out_channels);
    case BenchOp::kDepthwise:
    case BenchOp::kDepthwiseRef: return LayerSpec::depthwise(s.stride, s.kernel, s.in_channels);
    case BenchOp::kPointwiseGemm:
    case BenchOp::kPointwiseRef: return LayerSpec::pointwise(s.in_channels, s.out_channels);
  }
  throw ValidationError("unknown bench op");
}

template <typename Fn>
std::vector<std::int64_t> time_samples(Fn&& fn, std::size_t repetitions, std::size_t warmups) {
  for (std::size_t i = 0; i < warmups; ++i) fn();
  std::vector<std::int64_t> samples;
  samples.reserve(repetitions);
  for (std::size_t i = 0; i < repetitions; ++i) {
    auto t0 = std::chrono::steady_clock::now();
    fn();
    auto t1 = std::chrono::steady_clock::now();
    samples.push_back(std::chrono::duration_cast<std::chrono::nanoseconds>(t1 - t0).count());
  }
  return samples;
}

inline BenchReport bench(BenchOp op, const BenchShape& s, std::size_t repetitions, std::size_t warmups = 3) {
  if (repetitions == 0) throw ValidationError("repetitions must be >= 1");
  LayerSpec layer = bench_layer(op, s);
  FeatureShape in{s.height, s.width, s.in_channels};
  LayerShapes shapes{in, layer_output_shape(layer, in)};

  std::mt19937 rng(42);
  std::uniform_real_distribution<float> u(-1.f, 1.f);
  auto fill = [&](Shape sh) {
    Tensor t(std::move(sh));
    for (auto& v : t.data()) v = u(rng);
    return t;
  };
  Tensor x = fill(Shape{1, s.height, s.width, s.in_channels});
  Tensor k;
  if (layer.kind == LayerKind::kDepthwiseConv) {
    k = fill(Shape{s.kernel, s.kernel, s.in_channels});
  } else {
    k = fill(Shape{layer.kernel, layer.kernel, s.in_channels, s.out_channels});
  }
  ConvConfig cfg{s.stride, Padding::kSame};
  Im2colBuffer<float> scratch;
  Tensor sink;
  auto run = [&] {
    switch (op) {
      case BenchOp::kStdConvGemm: sink = conv2d_std_gemm(x, k, cfg, scratch); break;
      case BenchOp::kStdConvRef: sink = conv2d_std_ref(x, k, cfg); break;
      case BenchOp::kDepthwise: sink = conv2d_depthwise_direct(x, k, cfg); break;
      case BenchOp::kDepthwiseRef: sink = conv2d_depthwise_ref(x, k, cfg); break;
      case BenchOp::kPointwiseGemm: sink = conv2d_pointwise_gemm(x, k); break;
      case BenchOp::kPointwiseRef: sink = conv2d_pointwise_ref(x, k); break;
    }
  };
  BenchReport r;
  r.op = bench_op_name(op);
  r.shape = s.str();
  r.samples_ns = time_samples(run, repetitions, warmups);
  r.median_ns = median_ns(r.samples_ns);
  r.mult_adds = layer_cost(layer, shapes).mult_adds;
  r.effective_gflops = r.median_ns > 0 ? 2.0 * double(r.mult_adds) / double(r.median_ns) : 0.0;
  return r;
}

struct TypeTimeShare {
  std::string label;
  std::int64_t nanos = 0;
  double pct = 0;
};

struct ForwardBench {
  std::int64_t median_total_ns = 0;
  std::vector<TypeTimeShare> shares;  // summed over all repetitions
};

// Times full forward passes and splits wall time by layer type.
inline ForwardBench bench_forward(const Model& model, std::size_t batch, std::size_t repetitions,
                                  std::size_t warmups = 3) {
  if (repetitions == 0) throw ValidationError("repetitions must be >= 1");
  const auto& in = model.arch.input();
  Tensor x(Shape{batch, in.height, in.width, in.channels});
  std::mt19937 rng(7);
  std::uniform_real_distribution<float> u(-1.f, 1.f);
  for (auto& v : x.data()) v = u(rng);
  Engine engine(model);
  for (std::size_t i = 0; i < warmups; ++i) engine.forward(x);
  ForwardBench fb;
  std::vector<std::int64_t> totals;
  for (std::size_t r = 0; r < repetitions; ++r) {
    engine.forward(x);
    std::int64_t total = 0;
    for (const auto& t : engine.trace()) {
      const auto& l = model.arch[t.index];
      std::string label = kind_label(l.kind, l.kind == LayerKind::kFullyConnected ? 0 : l.kernel);
      auto it = std::find_if(fb.shares.begin(), fb.shares.end(), [&](const auto& s) { return s.label == label; });
      if (it == fb.shares.end()) {
        fb.shares.push_back({label, 0, 0});
        it = fb.shares.end() - 1;
      }
      it->nanos += t.nanos;
      total += t.nanos;
    }
    totals.push_back(total);
  }
  std::int64_t sum = 0;
  for (const auto& s : fb.shares) sum += s.nanos;
  for (auto& s : fb.shares) s.pct = sum ? 100.0 * double(s.nanos) / double(sum) : 0.0;
  fb.median_total_ns = median_ns(totals);
  return fb;
}

}  // namespace mbnet
