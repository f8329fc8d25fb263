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

// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
// criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "mbnet/mbnet.hpp"
#include "oracles/layer_table_oracle.hpp"
#include "test_util.hpp"

namespace {

using namespace mbnet;
using testutil::pick;
using testutil::random_tensor;

struct Outcome {
  bool pass = true;
  std::ostringstream notes;

  void expect(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      notes << "  mismatch: " << what << "\n";
    }
  }
};

std::filesystem::path g_tmp;

std::string mb(std::uint64_t v, int decimals) { return format_millions(v, decimals); }

void criterion1(Outcome& o) {
  auto rows = cumulative_layer_rows();
  const Cost want[] = {{462'422'016, 2'359'296}, {52'283'392, 266'752}, {29'578'752, 150'912}, {15'091'200, 150'912}};
  const char* printed_ma[] = {"462", "52.3", "29.6", "15.1"};
  const char* printed_p[] = {"2.36", "0.27", "0.15", "0.15"};
  o.expect(rows.size() == 4, "row count");
  for (std::size_t i = 0; i < 4 && i < rows.size(); ++i) {
    const Cost& c = rows[i].cost;
    o.expect(c == want[i], rows[i].label + " = " + std::to_string(c.mult_adds) + " / " + std::to_string(c.params));
    o.expect(format_millions_sig(c.mult_adds, 3) == printed_ma[i], rows[i].label + " printed mult-adds");
    o.expect(mb(c.params, 2) == printed_p[i], rows[i].label + " printed params " + mb(c.params, 2));
    o.notes << "  " << rows[i].label << ": " << format_millions_sig(c.mult_adds, 3) << " M / " << mb(c.params, 2)
            << " M\n";
  }
}

void criterion2(Outcome& o) {
  Cost c = analyze(build_mobilenet(Hyperparams{})).total;
  auto ref = oracle::account(oracle::mobilenet_rows(false));
  o.expect(c.mult_adds == 568'740'352, "mult-adds " + std::to_string(c.mult_adds));
  o.expect(c.mult_adds == ref.mult_adds, "mult-adds vs row oracle");
  o.expect(c.params == ref.params, "params " + std::to_string(c.params) + " vs row oracle " + std::to_string(ref.params));
  o.expect(mb(c.mult_adds, 0) == "569" && mb(c.params, 1) == "4.2", "printed values");
  o.notes << "  " << c.mult_adds << " mult-adds, " << c.params << " params (" << mb(c.mult_adds, 0) << " M / "
          << mb(c.params, 1) << " M)\n";
  if (c.params != 4'214'696) {
    o.notes << "  note: row oracle gives " << ref.params << " params; the stated 4,214,696 differs by "
            << 4'214'696 - static_cast<long long>(ref.params) << "\n";
  }
}

void criterion3(Outcome& o) {
  struct Want {
    double alpha;
    std::size_t res;
    const char* ma;
    const char* p;
  };
  const Want wants[] = {{1.0, 224, "569", "4.2"},  {0.75, 224, "325", "2.6"}, {0.5, 224, "149", "1.3"},
                        {0.25, 224, "41", "0.5"},  {1.0, 192, "418", "4.2"},  {1.0, 160, "290", "4.2"},
                        {1.0, 128, "186", "4.2"}};
  for (const auto& w : wants) {
    Cost c = analyze(build_mobilenet(Hyperparams{w.alpha, w.res, false, 1000})).total;
    std::string got = mb(c.mult_adds, 0) + " / " + mb(c.params, 1);
    o.notes << "  alpha " << w.alpha << " res " << w.res << ": " << got << " (printed " << w.ma << " / " << w.p << ")\n";
    o.expect(mb(c.mult_adds, 0) == w.ma && mb(c.params, 1) == w.p,
             "alpha " + std::to_string(w.alpha) + " res " + std::to_string(w.res) + " gives " + got + " (" +
                 std::to_string(c.mult_adds) + ")");
  }
  auto rows = sweep({1.0, 0.75, 0.5, 0.25}, {224, 192, 160, 128});
  o.expect(rows.size() == 16, "sweep size");
  for (std::size_t i = 0; i < rows.size(); ++i) {
    o.expect(rows[i].cost.params == rows[i - i % 4].cost.params, "params vary with resolution");
  }
}

void criterion4(Outcome& o) {
  auto report = analyze(build_mobilenet(Hyperparams{}));
  struct Want {
    const char* label;
    double ma, p;
  };
  const Want wants[] = {{"Conv 1x1", 94.86, 74.59}, {"Conv DW 3x3", 3.06, 1.06}, {"Conv 3x3", 1.19, 0.02},
                        {"Fully Connected", 0.18, 24.33}};
  for (const auto& w : wants) {
    const KindShare* s = nullptr;
    for (const auto& k : report.by_kind) {
      if (k.label == w.label) s = &k;
    }
    if (!s) {
      o.expect(false, std::string("missing group ") + w.label);
      continue;
    }
    char line[160];
    std::snprintf(line, sizeof line, "  %-16s mult-adds %6.2f%% (printed %.2f%%), params %6.2f%% (printed %.2f%%)\n",
                  w.label, s->mult_add_pct, w.ma, s->param_pct, w.p);
    o.notes << line;
    if (std::string(w.label) == "Conv 3x3") {
      o.expect(std::abs(s->mult_add_pct - 1.91) < 0.01, "3x3 mult-add share");
      o.expect(std::abs(s->param_pct - w.p) <= 0.15, "3x3 param share");
      o.notes << "  note: the printed 3x3 mult-add share 1.19% does not follow from the layer list; computed is "
                 "1.91% (864 x 112 x 112 / 568,740,352)\n";
      continue;
    }
    o.expect(std::abs(s->param_pct - w.p) <= 0.15, std::string(w.label) + " param share");
    o.expect(std::abs(s->mult_add_pct - w.ma) <= 0.15, std::string(w.label) + " mult-add share");
  }
}

void criterion5(Outcome& o) {
  Cost c = analyze(build_mobilenet(Hyperparams{1.0, 224, true, 1000})).total;
  auto ref = oracle::account(oracle::mobilenet_rows(false));
  o.expect(c.mult_adds == 568'740'352 - 5 * 52'283'392ull, "mult-adds " + std::to_string(c.mult_adds));
  o.expect(c.params == ref.params - 5 * 266'752ull, "params " + std::to_string(c.params));
  o.expect(mb(c.mult_adds, 0) == "307" && mb(c.params, 1) == "2.9", "printed " + mb(c.mult_adds, 0) + " / " + mb(c.params, 1));
  o.notes << "  " << c.mult_adds << " / " << c.params << " (" << mb(c.mult_adds, 0) << " M / " << mb(c.params, 1)
          << " M)\n";
}

void criterion6(Outcome& o) {
  std::mt19937_64 rng(6);
  std::size_t band_checked = 0;
  for (int i = 0; i < 20; ++i) {
    std::uint64_t dk = pick(rng, 1, 3) * 2 + 1, m = pick(rng, 1, 1024), n = pick(rng, 1, 1024), df = pick(rng, 1, 112);
    double ratio = double(cost_separable(dk, m, n, df).mult_adds) / double(cost_std_conv(dk, m, n, df).mult_adds);
    double law = 1.0 / double(n) + 1.0 / double(dk * dk);
    o.expect(std::abs(ratio - law) <= 1e-12, "ratio law at case " + std::to_string(i));
    o.expect(std::abs(reduction_ratio(dk, n) - law) <= 1e-12, "reduction_ratio at case " + std::to_string(i));
  }
  for (std::uint64_t n = 72; n <= 4096; n += 1 + n / 8) {
    double r = double(cost_separable(3, 64, n, 14).mult_adds) / double(cost_std_conv(3, 64, n, 14).mult_adds);
    o.expect(r >= 1.0 / 9 && r <= 1.0 / 8, "band at N=" + std::to_string(n));
    ++band_checked;
  }
  o.notes << "  20 random cases within 1e-12, " << band_checked << " N >= 72 cases inside [1/9, 1/8]\n";
}

void criterion7(Outcome& o) {
  std::mt19937_64 rng(7);
  Im2colBuffer<float> scratch;
  double worst = 0;
  for (int trial = 0; trial < 200; ++trial) {
    std::size_t n = pick(rng, 1, 2), h = pick(rng, 1, 16), w = pick(rng, 1, 16);
    std::size_t c = pick(rng, 1, 16), oc = pick(rng, 1, 16), kk = pick(rng, 0, 2) * 2 + 1, s = pick(rng, 1, 2);
    Tensor x = random_tensor(Shape{n, h, w, c}, rng);
    ConvConfig cfg{s};
    Tensor k = random_tensor(Shape{kk, kk, c, oc}, rng);
    Tensor p = random_tensor(Shape{1, 1, c, oc}, rng);
    Tensor d = random_tensor(Shape{kk, kk, c}, rng);
    worst = std::max({worst, rel_diff(conv2d_std_gemm(x, k, cfg, scratch), conv2d_std_ref(x, k, cfg)),
                      rel_diff(conv2d_pointwise_gemm(x, p), conv2d_pointwise_ref(x, p)),
                      rel_diff(conv2d_depthwise_direct(x, d, cfg), conv2d_depthwise_ref(x, d, cfg))});
  }
  o.expect(worst <= 1e-5, "fast path vs reference " + std::to_string(worst));
  double worst_fact = 0;
  for (int trial = 0; trial < 60; ++trial) {
    std::size_t h = pick(rng, 1, 10), w = pick(rng, 1, 10), m = pick(rng, 1, 6), n = pick(rng, 1, 6);
    std::size_t kk = pick(rng, 1, 2) * 2 + 1, s = pick(rng, 1, 2);
    Tensor x = random_tensor(Shape{pick(rng, 1, 2), h, w, m}, rng);
    Tensor dw = random_tensor(Shape{kk, kk, m}, rng), pw = random_tensor(Shape{1, 1, m, n}, rng);
    Tensor diag(Shape{kk, kk, m, m}), full(Shape{kk, kk, m, n});
    for (std::size_t i = 0; i < kk; ++i) {
      for (std::size_t j = 0; j < kk; ++j) {
        for (std::size_t a = 0; a < m; ++a) {
          diag.set({i, j, a, a}, dw.get({i, j, a}));
          for (std::size_t b = 0; b < n; ++b) full.set({i, j, a, b}, dw.get({i, j, a}) * pw.get({0, 0, a, b}));
        }
      }
    }
    ConvConfig cfg{s};
    Tensor dwo = conv2d_depthwise_ref(x, dw, cfg);
    worst_fact = std::max({worst_fact, rel_diff(dwo, conv2d_std_ref(x, diag, cfg)),
                           rel_diff(conv2d_pointwise_ref(dwo, pw), conv2d_std_ref(x, full, cfg))});
  }
  o.expect(worst_fact <= 1e-5, "factorization " + std::to_string(worst_fact));
  o.notes << "  200 cases, worst rel err " << worst << "; factorization worst " << worst_fact << "\n";
}

void criterion8(Outcome& o) {
  std::mt19937_64 rng(8);
  Tensor x = random_tensor(Shape{1, 14, 14, 64}, rng), k = random_tensor(Shape{1, 1, 64, 128}, rng);
  reset_scratch_stats();
  GemmTrace trace;
  Tensor y = conv2d_pointwise_gemm(x, k, &trace);
  o.expect(scratch_stats().allocations == 0, "pointwise allocations " + std::to_string(scratch_stats().allocations));
  o.expect(scratch_stats().im2col_fills == 0, "pointwise im2col fills");
  o.expect(!trace.used_im2col, "pointwise trace reports im2col");
  o.expect(rel_diff(y, conv2d_pointwise_ref(x, k)) <= 1e-5, "pointwise result");
  // Counter sanity: the standard path does register its lowering.
  Im2colBuffer<float> buf;
  reset_scratch_stats();
  conv2d_std_gemm(x, random_tensor(Shape{3, 3, 64, 8}, rng), ConvConfig{1}, buf);
  o.expect(scratch_stats().allocations == 1 && scratch_stats().im2col_fills == 1, "standard conv counters");
  o.notes << "  pointwise GEMM: 0 allocations, 0 im2col fills; standard conv: 1 allocation, 1 fill\n";
}

void criterion9(Outcome& o) {
  auto report = grad_check(grad_check_micro_arch(), 0);
  std::size_t params = 0;
  for (const auto& e : report.entries) {
    if (e.name != "input") params += e.count;
    o.expect(e.max_rel_err < 1e-6, e.name + " " + std::to_string(e.max_rel_err));
    char line[160];
    std::snprintf(line, sizeof line, "  %-18s n=%-4zu max_rel_err %.3g (kink skips %zu)\n", e.name.c_str(), e.count,
                  e.max_rel_err, e.kink_skips);
    o.notes << line;
  }
  o.expect(params < 2000, "micro-net params " + std::to_string(params));
  auto bn = grad_check_batchnorm_train(0);
  for (const auto& e : bn.entries) {
    o.expect(e.max_rel_err < 1e-6, e.name + " " + std::to_string(e.max_rel_err));
    char line[160];
    std::snprintf(line, sizeof line, "  %-18s n=%-4zu max_rel_err %.3g (train-mode batchnorm)\n", e.name.c_str(),
                  e.count, e.max_rel_err);
    o.notes << line;
  }
  GradCheckConfig train;
  train.bn_mode = BnMode::kTrain;
  double coarse = grad_check(grad_check_micro_arch(), 0, train).worst_rel_err();
  train.step = 1e-4;
  double fine = grad_check(grad_check_micro_arch(), 0, train).worst_rel_err();
  o.notes << "  info: micro-net with train-mode batchnorm, h=1e-3 " << coarse << ", h=1e-4 " << fine << "\n";
  o.notes << "  micro-net params: " << params << "\n";
}

void criterion10(Outcome& o) {
  ToyConfig cfg;
  auto a = train_toy(cfg, 2000, 0);
  auto b = train_toy(cfg, 2000, 0);
  double first = mean_loss(a.losses, 0, 50), last = mean_loss(a.losses, a.losses.size() - 50, 50);
  o.expect(last < 0.4 * first, "final/initial " + std::to_string(last / first));
  o.expect(std::abs(a.losses.front() - std::log(4.0)) <= 0.15, "initial loss " + std::to_string(a.losses.front()));
  o.expect(a.losses == b.losses, "re-run differs");
  o.notes << "  initial loss " << a.losses.front() << ", first-50 mean " << first << ", last-50 mean " << last
          << ", re-run identical " << (a.losses == b.losses ? "yes" : "no") << "\n";
}

void criterion11(Outcome& o) {
  ArchDescriptor a = build_mobilenet(Hyperparams{});
  o.expect(a.weighted_layer_count() == 28, "weighted layers " + std::to_string(a.weighted_layer_count()));
  o.expect(a.conv_layer_count() == 27, "conv layers " + std::to_string(a.conv_layer_count()));
  o.expect(a.count(LayerKind::kStdConv) == 1 && a.count(LayerKind::kDepthwiseConv) == 13 &&
               a.count(LayerKind::kPointwiseConv) == 13,
           "conv split");
  auto column = oracle::input_size_column();
  o.expect(column.size() == a.size(), "shape chain length");
  for (std::size_t i = 0; i < a.size() && i < column.size(); ++i) {
    o.expect(a.shapes()[i].in.str() == column[i], "row " + std::to_string(i) + " " + a.shapes()[i].in.str());
  }
  o.notes << "  " << a.weighted_layer_count() << " weighted layers (" << a.conv_layer_count()
          << " conv + 1 FC), " << column.size() << " input sizes match\n";
}

void criterion12(Outcome& o) {
  Model m = make_model(build_mobilenet(Hyperparams{0.25, 128, false, 100}), 12);
  auto dir = g_tmp / "c12";
  save_model(dir.string(), m);
  auto path = (dir / kWeightFileName).string();
  auto bytes = read_file_bytes(path);
  Model back = load_model(dir.string());
  o.expect(encode_weights(back.weights) == bytes, "re-encode differs");
  save_weights((dir / "again.mbnw").string(), back.weights);
  o.expect(read_file_bytes((dir / "again.mbnw").string()) == bytes, "second file differs");

  std::size_t cases = 0, typed = 0;
  auto decode_checked = [&](std::span<const std::uint8_t> b) {
    WeightStore s = decode_weights(b);
    validate_weights(m.arch, s);
  };
  auto run = [&](const std::vector<std::uint8_t>& b, bool must_fail) {
    ++cases;
    try {
      decode_checked(b);
      if (must_fail) o.expect(false, "corruption accepted at case " + std::to_string(cases));
      else ++typed;
    } catch (const Error&) {
      ++typed;
    } catch (...) {
      o.expect(false, "untyped exception at case " + std::to_string(cases));
    }
  };
  // Every truncation point inside the header and first tensor, then a
  // stride over the rest.
  for (std::size_t n = 0; n < bytes.size(); n += n < 4096 ? 1 : 997) {
    run(std::vector<std::uint8_t>(bytes.begin(), bytes.begin() + static_cast<long>(n)), true);
  }
  auto bad = bytes;
  bad[0] = 'X';
  run(bad, true);
  bad = bytes;
  bad[4] = 2;
  run(bad, true);
  bad = bytes;
  bad.push_back(0);
  run(bad, true);
  // Random byte flips may land in payload floats and stay valid; they only
  // need to never crash.
  std::mt19937_64 rng(12);
  for (int i = 0; i < 500; ++i) {
    bad = bytes;
    for (int f = 0; f < 4; ++f) bad[pick(rng, 0, bad.size() - 1)] ^= static_cast<std::uint8_t>(pick(rng, 1, 255));
    run(bad, false);
  }
  o.expect(typed == cases, "typed outcomes " + std::to_string(typed) + " of " + std::to_string(cases));
  o.notes << "  roundtrip byte-identical (" << bytes.size() << " bytes); " << cases
          << " corrupted inputs, all typed errors or valid decodes\n";
}

}  // namespace

int main(int argc, char** argv) {
  g_tmp = argc > 1 ? std::filesystem::path(argv[1]) : std::filesystem::temp_directory_path() / "mbnet_acceptance";
  std::filesystem::create_directories(g_tmp);

  struct Criterion {
    int id;
    const char* title;
    std::function<void(Outcome&)> run;
  };
  const std::vector<Criterion> all = {
      {1, "cumulative layer rows exact", criterion1},
      {2, "full-network accounting", criterion2},
      {3, "width/resolution sweep at printed precision", criterion3},
      {4, "layer-type shares", criterion4},
      {5, "shallow variant", criterion5},
      {6, "reduction-ratio law", criterion6},
      {7, "kernel correctness (200 cases + factorization)", criterion7},
      {8, "1x1 zero-copy", criterion8},
      {9, "gradient checks", criterion9},
      {10, "toy training", criterion10},
      {11, "architecture fidelity", criterion11},
      {12, "weight format roundtrip and corruption", criterion12},
  };
  int failures = 0;
  for (const auto& c : all) {
    Outcome o;
    auto t0 = std::chrono::steady_clock::now();
    try {
      c.run(o);
    } catch (const std::exception& e) {
      o.pass = false;
      o.notes << "  exception: " << e.what() << "\n";
    }
    double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    std::printf("%s criterion %d: %s (%.1f ms)\n", o.pass ? "PASS" : "FAIL", c.id, c.title, ms);
    std::fputs(o.notes.str().c_str(), stdout);
    std::fflush(stdout);
    failures += !o.pass;
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(all.size()) - failures, all.size());
  return failures ? 1 : 0;
}
