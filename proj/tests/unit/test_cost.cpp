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

#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "mbnet/cost.hpp"
#include "mbnet/ops.hpp"
#include "oracles/layer_table_oracle.hpp"
#include "test_util.hpp"

namespace mbnet {
namespace {

using testutil::pick;

TEST(Cost, StandardConvTableExample) {
  Cost c = cost_std_conv(3, 512, 512, 14);
  EXPECT_EQ(c.mult_adds, 462'422'016u);
  EXPECT_EQ(c.params, 2'359'296u);
  EXPECT_EQ(cost_std_conv(1, 1, 1, 1).mult_adds, 1u);
}

TEST(Cost, Depthwise) {
  EXPECT_EQ(cost_depthwise(3, 512, 14).mult_adds, 903'168u);
  EXPECT_EQ(cost_depthwise(3, 32, 112).mult_adds, 3'612'672u);
  EXPECT_EQ(cost_depthwise(3, 1, 9), cost_std_conv(3, 1, 1, 9));
}

TEST(Cost, Separable) {
  Cost c = cost_separable(3, 512, 512, 14);
  EXPECT_EQ(c.mult_adds, 52'283'392u);
  EXPECT_EQ(c.params, 266'752u);
  EXPECT_EQ(c, cost_depthwise(3, 512, 14) + cost_std_conv(1, 512, 512, 14));
  EXPECT_EQ(cost_separable(1, 37, 1, 5).mult_adds, 2u * 37 * 25);
}

TEST(Cost, ScaledSeparable) {
  Cost a = cost_separable_scaled(3, 512, 512, 14, 0.75, 1.0);
  EXPECT_EQ(a.mult_adds, 29'578'752u);
  EXPECT_EQ(a.params, 150'912u);
  Cost r = cost_separable_scaled(3, 512, 512, 14, 0.75, 0.714);
  EXPECT_EQ(r.mult_adds, 15'091'200u);
  EXPECT_EQ(r.params, 150'912u);
  EXPECT_EQ(cost_separable_scaled(3, 512, 512, 14, 1.0, 1.0), cost_separable(3, 512, 512, 14));
  EXPECT_THROW(cost_separable_scaled(3, 8, 8, 4, 0.0, 1.0), ValidationError);
  EXPECT_THROW(cost_separable_scaled(3, 8, 8, 4, 1.0, 1.5), ValidationError);
}

TEST(Cost, CumulativeRowsPrintAtPublishedPrecision) {
  auto rows = cumulative_layer_rows();
  ASSERT_EQ(rows.size(), 4u);
  const char* ma[] = {"462", "52.3", "29.6", "15.1"};
  const char* pa[] = {"2.36", "0.27", "0.15", "0.15"};
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_EQ(format_millions_sig(rows[i].cost.mult_adds, 3), ma[i]);
    EXPECT_EQ(format_millions(rows[i].cost.params, 2), pa[i]);
  }
}

TEST(Cost, ZeroArgumentsRejected) {
  EXPECT_THROW(cost_std_conv(0, 1, 1, 1), ValidationError);
  EXPECT_THROW(cost_depthwise(3, 0, 1), ValidationError);
  EXPECT_THROW(reduction_ratio(3, 0), ValidationError);
}

TEST(ReductionRatio, Examples) {
  EXPECT_NEAR(reduction_ratio(3, 512), 0.11306423611111111, 1e-15);
  double exact = double(cost_separable(3, 512, 512, 14).mult_adds) / double(cost_std_conv(3, 512, 512, 14).mult_adds);
  EXPECT_NEAR(reduction_ratio(3, 512), exact, 1e-12);
  EXPECT_DOUBLE_EQ(reduction_ratio(1, 1), 2.0);
  EXPECT_NEAR(reduction_ratio(3, 1'000'000), 1.0 / 9 + 1e-6, 1e-15);
}

// Property: the ratio law holds exactly and lands in [1/9, 1/8] for N >= 72.
TEST(ReductionRatioProperty, RandomConfigs) {
  std::mt19937_64 rng(21);
  for (int i = 0; i < 200; ++i) {
    std::uint64_t dk = pick(rng, 1, 7), m = pick(rng, 1, 1024), n = pick(rng, 1, 1024), df = pick(rng, 1, 112);
    double ratio = double(cost_separable(dk, m, n, df).mult_adds) / double(cost_std_conv(dk, m, n, df).mult_adds);
    EXPECT_NEAR(ratio, reduction_ratio(dk, n), 1e-12);
    if (dk == 3 && n >= 72) {
      EXPECT_GE(reduction_ratio(dk, n), 1.0 / 9);
      EXPECT_LE(reduction_ratio(dk, n), 1.0 / 8);
    }
  }
}

// Property: separable cost is depthwise plus pointwise for all inputs.
TEST(CostProperty, SeparableDecomposition) {
  std::mt19937_64 rng(22);
  for (int i = 0; i < 200; ++i) {
    std::uint64_t dk = pick(rng, 1, 7), m = pick(rng, 1, 2048), n = pick(rng, 1, 2048), df = pick(rng, 1, 224);
    EXPECT_EQ(cost_separable(dk, m, n, df), cost_depthwise(dk, m, df) + cost_pointwise(m, n, df));
  }
}

TEST(Analyze, FullNetworkMatchesRowOracle) {
  auto t = oracle::account(oracle::mobilenet_rows());
  CostReport r = analyze(build_mobilenet(Hyperparams{}));
  EXPECT_EQ(r.total.mult_adds, t.mult_adds);
  EXPECT_EQ(r.total.params, t.params);
  // Frozen from the row oracle.
  EXPECT_EQ(r.total.mult_adds, 568'740'352u);
  EXPECT_EQ(r.total.params, 4'210'088u);
  EXPECT_EQ(format_millions(r.total.mult_adds, 0), "569");
  EXPECT_EQ(format_millions(r.total.params, 1), "4.2");
}

TEST(Analyze, ShallowMatchesRowOracle) {
  auto t = oracle::account(oracle::mobilenet_rows(true));
  CostReport r = analyze(build_mobilenet(Hyperparams{1.0, 224, true, 1000}));
  EXPECT_EQ(r.total.mult_adds, t.mult_adds);
  EXPECT_EQ(r.total.params, t.params);
  EXPECT_EQ(r.total.mult_adds, 568'740'352u - 5 * 52'283'392u);
  EXPECT_EQ(r.total.params, 4'210'088u - 5 * 266'752u);
  EXPECT_EQ(format_millions(r.total.mult_adds, 0), "307");
  EXPECT_EQ(format_millions(r.total.params, 1), "2.9");
}

TEST(Analyze, ResolutionSweepPrintedValues) {
  const std::pair<std::size_t, const char*> rows[] = {{224, "569"}, {192, "418"}, {128, "186"}};
  for (auto [res, printed] : rows) {
    CostReport r = analyze(build_mobilenet(Hyperparams{1.0, res, false, 1000}));
    EXPECT_EQ(format_millions(r.total.mult_adds, 0), printed) << res;
    EXPECT_EQ(format_millions(r.total.params, 1), "4.2");
  }
  EXPECT_EQ(analyze(build_mobilenet(Hyperparams{1.0, 160, false, 1000})).total.mult_adds, 290'675'200u);
}

// Published as 290; the exact count 290,675,200 rounds to 291.
TEST(Analyze, Resolution160PrintsAsPublished) {
  EXPECT_EQ(format_millions(analyze(build_mobilenet(Hyperparams{1.0, 160, false, 1000})).total.mult_adds, 0), "290");
}

TEST(Analyze, PerLayerCostsMatchRows) {
  auto rows = oracle::mobilenet_rows();
  CostReport r = analyze(build_mobilenet(Hyperparams{}));
  std::size_t j = 0;
  for (const auto& lc : r.layers) {
    if (lc.kind == LayerKind::kAvgPool || lc.kind == LayerKind::kSoftmax) {
      EXPECT_EQ(lc.cost, Cost{});
      continue;
    }
    ASSERT_LT(j, rows.size());
    auto single = oracle::account({rows[j++]});
    EXPECT_EQ(lc.cost.mult_adds, single.mult_adds) << "layer " << lc.index;
    EXPECT_EQ(lc.cost.params, single.params) << "layer " << lc.index;
  }
  EXPECT_EQ(j, rows.size());
}

TEST(Breakdown, SharesAgainstOracle) {
  auto t = oracle::account(oracle::mobilenet_rows());
  CostReport r = analyze(build_mobilenet(Hyperparams{}));
  ASSERT_EQ(r.by_kind.size(), 4u);
  auto find = [&](const std::string& label) -> const KindShare& {
    for (const auto& s : r.by_kind)
      if (s.label == label) return s;
    throw std::runtime_error("missing " + label);
  };
  double ma = double(t.mult_adds), pa = double(t.params);
  EXPECT_NEAR(find("Conv 1x1").mult_add_pct, 100.0 * double(t.pw_ma) / ma, 1e-9);
  EXPECT_NEAR(find("Conv DW 3x3").mult_add_pct, 100.0 * double(t.dw_ma) / ma, 1e-9);
  EXPECT_NEAR(find("Conv 3x3").mult_add_pct, 100.0 * double(t.std_ma) / ma, 1e-9);
  EXPECT_NEAR(find("Fully Connected").mult_add_pct, 100.0 * double(t.fc_ma) / ma, 1e-9);
  EXPECT_NEAR(find("Conv 1x1").param_pct, 100.0 * double(t.pw_p) / pa, 1e-9);
  EXPECT_NEAR(find("Fully Connected").param_pct, 100.0 * double(t.fc_p) / pa, 1e-9);

  EXPECT_NEAR(find("Conv 1x1").mult_add_pct, 94.86, 0.15);
  EXPECT_NEAR(find("Conv DW 3x3").mult_add_pct, 3.06, 0.15);
  EXPECT_NEAR(find("Fully Connected").mult_add_pct, 0.18, 0.15);
  EXPECT_NEAR(find("Conv 1x1").param_pct, 74.59, 0.15);
  EXPECT_NEAR(find("Fully Connected").param_pct, 24.33, 0.15);
  EXPECT_NEAR(find("Conv 3x3").param_pct, 0.02, 0.15);
  EXPECT_NEAR(find("Conv 3x3").mult_add_pct, 1.91, 0.01);
}

TEST(Breakdown, SharesSumToHundred) {
  for (double alpha : {1.0, 0.5}) {
    CostReport r = analyze(build_mobilenet(Hyperparams{alpha, 192, false, 1000}));
    double ma = 0, pa = 0;
    for (const auto& s : r.by_kind) {
      ma += s.mult_add_pct;
      pa += s.param_pct;
    }
    EXPECT_NEAR(ma, 100.0, 0.01);
    EXPECT_NEAR(pa, 100.0, 0.01);
  }
}

TEST(Sweep, SixteenRowsAndWidthExamples) {
  auto rows = sweep({1.0, 0.75, 0.5, 0.25}, {224, 192, 160, 128});
  ASSERT_EQ(rows.size(), 16u);
  auto at = [&](double a, std::size_t res) {
    for (const auto& r : rows)
      if (r.alpha == a && r.resolution == res) return r.cost;
    throw std::runtime_error("missing row");
  };
  EXPECT_EQ(format_millions(at(0.75, 224).mult_adds, 0), "325");
  EXPECT_EQ(format_millions(at(0.75, 224).params, 1), "2.6");
  EXPECT_EQ(format_millions(at(0.5, 224).mult_adds, 0), "149");
  EXPECT_EQ(format_millions(at(0.5, 224).params, 1), "1.3");
  EXPECT_EQ(format_millions(at(0.25, 224).mult_adds, 0), "41");
  EXPECT_EQ(format_millions(at(0.25, 224).params, 1), "0.5");
  EXPECT_EQ(at(0.5, 160).mult_adds, 76'524'800u);
  EXPECT_EQ(format_millions(at(0.5, 160).params, 2), "1.32");
}

// Published as 76; the exact count 76,524,800 rounds to 77.
TEST(Sweep, HalfWidth160PrintsAsPublished) {
  Cost c = analyze(build_mobilenet(Hyperparams{0.5, 160, false, 1000})).total;
  EXPECT_EQ(format_millions(c.mult_adds, 0), "76");
}

// Property: params do not depend on resolution.
TEST(SweepProperty, ParamsResolutionInvariant) {
  for (double alpha : {1.0, 0.75, 0.5, 0.25}) {
    auto rows = sweep({alpha}, {224, 192, 160, 128});
    for (const auto& r : rows) EXPECT_EQ(r.cost.params, rows[0].cost.params);
  }
}

TEST(SweepProperty, RoughlyQuadraticInAlpha) {
  double full = double(analyze(build_mobilenet(Hyperparams{})).total.mult_adds);
  double half = double(analyze(build_mobilenet(Hyperparams{0.5, 224, false, 1000})).total.mult_adds);
  EXPECT_GT(half / full, 0.25);
  EXPECT_LT(half / full, 0.30);
}

// Property: analytic conv cost equals the multiplies executed by the
// instrumented reference ops, for random layer configurations.
TEST(CostProperty, AgreesWithInstrumentedReference) {
  std::mt19937_64 rng(23);
  for (int i = 0; i < 20; ++i) {
    std::size_t h = pick(rng, 1, 12), c = pick(rng, 1, 8), o = pick(rng, 1, 8), k = pick(rng, 0, 1) * 2 + 1;
    std::size_t s = pick(rng, 1, 2);
    FeatureShape in{h, h, c};
    ConvConfig cfg{s};
    Tensor x = testutil::random_tensor(Shape{1, h, h, c}, rng);

    LayerSpec l = LayerSpec::std_conv(s, k, c, o);
    reference_mac_count = 0;
    conv2d_std_ref(x, Tensor(Shape{k, k, c, o}), cfg);
    EXPECT_EQ(reference_mac_count, layer_cost(l, {in, layer_output_shape(l, in)}).mult_adds);

    l = LayerSpec::depthwise(s, k, c);
    reference_mac_count = 0;
    conv2d_depthwise_ref(x, Tensor(Shape{k, k, c}), cfg);
    EXPECT_EQ(reference_mac_count, layer_cost(l, {in, layer_output_shape(l, in)}).mult_adds);

    l = LayerSpec::pointwise(c, o);
    reference_mac_count = 0;
    conv2d_pointwise_ref(x, Tensor(Shape{1, 1, c, o}));
    EXPECT_EQ(reference_mac_count, layer_cost(l, {in, layer_output_shape(l, in)}).mult_adds);
  }
}

TEST(Format, Millions) {
  EXPECT_EQ(format_millions(568'740'352, 0), "569");
  EXPECT_EQ(format_millions(4'210'088, 1), "4.2");
  EXPECT_EQ(format_millions(1'500'000, 0), "2");
  EXPECT_EQ(format_millions_sig(9'996'000, 3), "10.0");
  EXPECT_EQ(format_millions_sig(462'422'016, 3), "462");
  EXPECT_EQ(format_millions_sig(0, 3), "0");
}

}  // namespace
}  // namespace mbnet
