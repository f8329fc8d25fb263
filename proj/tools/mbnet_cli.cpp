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

// mbnet command-line tool.

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <numeric>
#include <string>
#include <vector>

#include "mbnet/mbnet.hpp"

namespace {

using namespace mbnet;
using json = nlohmann::json;

constexpr int kExitOk = 0;
constexpr int kExitCheckFailed = 1;
constexpr int kExitUsage = 2;

struct CliConfig {
  double alpha = 1.0;
  std::size_t resolution = 224;
  bool shallow = false;
  std::uint64_t seed = 0;
  std::string format = "table";

  Hyperparams hyperparams(std::size_t classes = 1000) const { return Hyperparams{alpha, resolution, shallow, classes}; }
};

// Usage problems found after parsing (bad hyperparameters, missing files
// named on the command line).
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

ArchDescriptor build_or_usage(const CliConfig& cfg) {
  try {
    return build_mobilenet(cfg.hyperparams());
  } catch (const ValidationError& e) {
    throw UsageError(e.what());
  }
}

std::string dims(std::initializer_list<std::size_t> vs) {
  std::string s;
  for (auto v : vs) s += (s.empty() ? "" : "x") + std::to_string(v);
  return s;
}

std::string type_stride(const LayerSpec& l) {
  std::string s = " / s" + std::to_string(l.stride);
  switch (l.kind) {
    case LayerKind::kStdConv:
    case LayerKind::kPointwiseConv: return "Conv" + s;
    case LayerKind::kDepthwiseConv: return "Conv dw" + s;
    case LayerKind::kAvgPool: return "Avg Pool / s1";
    case LayerKind::kFullyConnected: return "FC / s1";
    case LayerKind::kSoftmax: return "Softmax / s1";
  }
  return "?";
}

std::string filter_shape(const LayerSpec& l, const LayerShapes& s) {
  switch (l.kind) {
    case LayerKind::kStdConv:
    case LayerKind::kPointwiseConv: return dims({l.kernel, l.kernel, l.in_channels, l.out_channels});
    case LayerKind::kDepthwiseConv: return dims({l.kernel, l.kernel, l.in_channels}) + " dw";
    case LayerKind::kAvgPool: return "Pool " + dims({s.in.height, s.in.width});
    case LayerKind::kFullyConnected: return dims({l.in_channels, l.out_channels});
    case LayerKind::kSoftmax: return "Classifier";
  }
  return "?";
}

void print_row(const std::vector<std::string>& cells, const std::vector<int>& widths) {
  for (std::size_t i = 0; i < cells.size(); ++i) {
    std::printf("%-*s", i + 1 < cells.size() ? widths[i] : 0, cells[i].c_str());
    if (i + 1 < cells.size()) std::printf("  ");
  }
  std::printf("\n");
}

int cmd_describe(const CliConfig& cfg) {
  ArchDescriptor a = build_or_usage(cfg);
  const auto& shapes = a.shapes();
  if (cfg.format == "json") {
    json j;
    j["arch"] = emit_arch(a);
    j["conv_layers"] = a.conv_layer_count();
    j["weighted_layers"] = a.weighted_layer_count();
    for (std::size_t i = 0; i < a.size(); ++i) {
      j["layers"].push_back({{"type", type_stride(a[i])}, {"filter", filter_shape(a[i], shapes[i])},
                             {"input", shapes[i].in.str()}, {"output", shapes[i].out.str()}});
    }
    std::cout << j.dump(2) << "\n";
    return kExitOk;
  }
  if (cfg.format == "csv") {
    std::printf("index,type,filter,input,output\n");
    for (std::size_t i = 0; i < a.size(); ++i) {
      std::printf("%zu,%s,%s,%s,%s\n", i, type_stride(a[i]).c_str(), filter_shape(a[i], shapes[i]).c_str(),
                  shapes[i].in.str().c_str(), shapes[i].out.str().c_str());
    }
    return kExitOk;
  }
  std::printf("%s\n", emit_arch(a).c_str());
  const std::vector<int> w{14, 20, 14};
  print_row({"Type / Stride", "Filter Shape", "Input Size"}, w);
  for (std::size_t i = 0; i < a.size(); ++i) {
    print_row({type_stride(a[i]), filter_shape(a[i], shapes[i]), shapes[i].in.str()}, w);
  }
  std::printf("\n%zu conv layers (%zu standard, %zu depthwise, %zu pointwise) + %zu FC = %zu weighted layers\n",
              a.conv_layer_count(), a.count(LayerKind::kStdConv), a.count(LayerKind::kDepthwiseConv),
              a.count(LayerKind::kPointwiseConv), a.count(LayerKind::kFullyConnected), a.weighted_layer_count());
  return kExitOk;
}

std::string summary_line(const Cost& c) {
  return format_millions(c.mult_adds, 0) + " M Mult-Adds, " + format_millions(c.params, 1) + " M params";
}

int cmd_analyze(const CliConfig& cfg) {
  ArchDescriptor a = build_or_usage(cfg);
  CostReport r = analyze(a);
  const auto& shapes = a.shapes();
  if (cfg.format == "csv") {
    std::printf("index,type,filter,input,output,mult_adds,params\n");
    for (const auto& l : r.layers) {
      std::printf("%zu,%s,%s,%s,%s,%llu,%llu\n", l.index, type_stride(a[l.index]).c_str(),
                  filter_shape(a[l.index], shapes[l.index]).c_str(), shapes[l.index].in.str().c_str(),
                  shapes[l.index].out.str().c_str(), static_cast<unsigned long long>(l.cost.mult_adds),
                  static_cast<unsigned long long>(l.cost.params));
    }
    return kExitOk;
  }
  if (cfg.format == "json") {
    json j;
    j["alpha"] = cfg.alpha;
    j["resolution"] = cfg.resolution;
    j["shallow"] = cfg.shallow;
    j["mult_adds"] = r.total.mult_adds;
    j["params"] = r.total.params;
    for (const auto& l : r.layers) {
      j["layers"].push_back({{"index", l.index}, {"type", type_stride(a[l.index])},
                             {"mult_adds", l.cost.mult_adds}, {"params", l.cost.params}});
    }
    for (const auto& s : r.by_kind) {
      j["by_type"].push_back({{"type", s.label}, {"mult_add_pct", s.mult_add_pct}, {"param_pct", s.param_pct}});
    }
    std::cout << j.dump(2) << "\n";
    return kExitOk;
  }
  const std::vector<int> w{4, 14, 20, 14, 12, 10};
  print_row({"#", "Type / Stride", "Filter Shape", "Input Size", "Mult-Adds", "Params"}, w);
  for (const auto& l : r.layers) {
    print_row({std::to_string(l.index), type_stride(a[l.index]), filter_shape(a[l.index], shapes[l.index]),
               shapes[l.index].in.str(), std::to_string(l.cost.mult_adds), std::to_string(l.cost.params)},
              w);
  }
  std::printf("\ntotal: %llu mult-adds, %llu params\n", static_cast<unsigned long long>(r.total.mult_adds),
              static_cast<unsigned long long>(r.total.params));
  std::printf("%s\n", summary_line(r.total).c_str());
  return kExitOk;
}

void print_shares(const CostReport& r) {
  std::printf("Resource per layer type (alpha 1, 224)\n");
  std::printf("%-16s  %9s  %10s\n", "Type", "Mult-Adds", "Parameters");
  for (const auto& s : r.by_kind) {
    std::printf("%-16s  %8.2f%%  %9.2f%%\n", s.label.c_str(), s.mult_add_pct, s.param_pct);
  }
  std::printf(
      "note: the reference lists the Conv 3x3 mult-add share as 1.19%%; the layer list gives 3x3x3x32 weights\n"
      "      over a 112x112 output = 10,838,016 mult-adds, %.2f%% of the total.\n\n",
      100.0 * 10'838'016.0 / double(r.total.mult_adds));
}

int cmd_paper_tables(const CliConfig& cfg) {
  (void)cfg;
  print_shares(analyze(build_mobilenet(Hyperparams{})));

  std::printf("Cumulative reductions for one 3x3 layer, M=N=512, 14x14 map\n");
  std::printf("%-26s  %16s  %14s\n", "Layer/Modification", "Million Mult-Adds", "Million Params");
  for (const auto& row : cumulative_layer_rows()) {
    std::printf("%-26s  %16s  %14s\n", row.label.c_str(), format_millions_sig(row.cost.mult_adds, 3).c_str(),
                format_millions(row.cost.params, 2).c_str());
  }

  auto model_row = [](const std::string& name, const Hyperparams& hp) {
    Cost c = analyze(build_mobilenet(hp)).total;
    std::printf("%-24s  %16s  %14s\n", name.c_str(), format_millions(c.mult_adds, 0).c_str(),
                format_millions(c.params, 1).c_str());
  };
  std::printf("\nFull and shallow networks\n");
  std::printf("%-24s  %16s  %14s\n", "Model", "Million Mult-Adds", "Million Params");
  model_row("1.0 MobileNet-224", Hyperparams{});
  model_row("Shallow MobileNet-224", Hyperparams{1.0, 224, true, 1000});

  std::printf("\nWidth multiplier sweep\n");
  std::printf("%-24s  %16s  %14s\n", "Model", "Million Mult-Adds", "Million Params");
  for (double a : {1.0, 0.75, 0.5, 0.25}) {
    char name[64];
    std::snprintf(name, sizeof name, "%.2g MobileNet-224", a);
    model_row(name, Hyperparams{a, 224, false, 1000});
  }

  std::printf("\nResolution sweep\n");
  std::printf("%-24s  %16s  %14s\n", "Model", "Million Mult-Adds", "Million Params");
  for (std::size_t r : {224, 192, 160, 128}) model_row("1.0 MobileNet-" + std::to_string(r), Hyperparams{1.0, r, false, 1000});

  std::printf("\nalpha x resolution cross product (CSV)\n");
  std::printf("alpha,resolution,mult_adds,params\n");
  for (const auto& row : sweep({1.0, 0.75, 0.5, 0.25}, {224, 192, 160, 128})) {
    std::printf("%g,%zu,%llu,%llu\n", row.alpha, row.resolution, static_cast<unsigned long long>(row.cost.mult_adds),
                static_cast<unsigned long long>(row.cost.params));
  }
  return kExitOk;
}

struct InferArgs {
  std::string model_dir;
  std::string input;
  std::size_t top_k = 5;
  bool reference_ops = false;
};

Tensor load_input(const std::string& path) {
  auto bytes = read_file_bytes(path);
  if (bytes.size() >= 2 && bytes[0] == 'P' && bytes[1] == '6') return decode_ppm(bytes);
  Tensor t = decode_raw_tensor(bytes);
  if (t.shape().rank() == 3) t = t.reshaped(Shape{1, t.shape()[0], t.shape()[1], t.shape()[2]});
  return t;
}

int cmd_infer(const CliConfig& cfg, const InferArgs& args) {
  Model m = args.model_dir.empty() ? make_model(build_or_usage(cfg), cfg.seed) : load_model(args.model_dir);
  Tensor x = load_input(args.input);
  Tensor probs = forward(m, x, ForwardOptions{args.reference_ops});
  std::size_t batch = probs.shape()[0], classes = probs.shape()[1];
  std::size_t k = std::min(args.top_k, classes);
  json out = json::array();
  for (std::size_t n = 0; n < batch; ++n) {
    std::vector<std::size_t> idx(classes);
    std::iota(idx.begin(), idx.end(), 0);
    const float* row = probs.raw() + n * classes;
    std::partial_sort(idx.begin(), idx.begin() + static_cast<long>(k), idx.end(),
                      [&](std::size_t a, std::size_t b) { return row[a] > row[b] || (row[a] == row[b] && a < b); });
    double sum = std::accumulate(row, row + classes, 0.0);
    if (cfg.format == "json") {
      json item{{"image", n}, {"sum", sum}};
      for (std::size_t i = 0; i < k; ++i) item["top"].push_back({{"class", idx[i]}, {"prob", row[idx[i]]}});
      out.push_back(item);
    } else if (cfg.format == "csv") {
      if (n == 0) std::printf("image,rank,class,prob\n");
      for (std::size_t i = 0; i < k; ++i) std::printf("%zu,%zu,%zu,%.6g\n", n, i + 1, idx[i], row[idx[i]]);
    } else {
      std::printf("image %zu (probability sum %.6f)\n", n, sum);
      for (std::size_t i = 0; i < k; ++i) std::printf("  %zu. class %-5zu %.6f\n", i + 1, idx[i], row[idx[i]]);
    }
  }
  if (cfg.format == "json") std::cout << out.dump(2) << "\n";
  return kExitOk;
}

struct BenchArgs {
  std::string op = "all";
  BenchShape shape;
  std::size_t reps = 10;
  std::size_t warmups = 3;
  bool forward = false;
  std::size_t batch = 1;
};

int cmd_bench(const CliConfig& cfg, const BenchArgs& args) {
  if (args.reps == 0) throw UsageError("--reps must be >= 1");
  if (args.forward) {
    Model m = make_model(build_or_usage(cfg), cfg.seed);
    ForwardBench fb = bench_forward(m, args.batch, args.reps, args.warmups);
    std::printf("type,nanos,pct\n");
    for (const auto& s : fb.shares) std::printf("%s,%lld,%.2f\n", s.label.c_str(), static_cast<long long>(s.nanos), s.pct);
    std::printf("median_forward_ns,%lld\n", static_cast<long long>(fb.median_total_ns));
    return kExitOk;
  }
  const BenchOp ops[] = {BenchOp::kStdConvGemm, BenchOp::kStdConvRef, BenchOp::kDepthwise,
                         BenchOp::kDepthwiseRef, BenchOp::kPointwiseGemm, BenchOp::kPointwiseRef};
  std::vector<BenchOp> chosen;
  for (BenchOp op : ops) {
    if (args.op == "all" || args.op == bench_op_name(op)) chosen.push_back(op);
  }
  if (chosen.empty()) throw UsageError("unknown --op '" + args.op + "'");
  std::printf("%s\n", kBenchCsvHeader);
  for (BenchOp op : chosen) {
    BenchShape s = args.shape;
    if (op == BenchOp::kPointwiseGemm || op == BenchOp::kPointwiseRef) s.kernel = 1, s.stride = 1;
    if (op == BenchOp::kDepthwise || op == BenchOp::kDepthwiseRef) s.out_channels = s.in_channels;
    std::printf("%s\n", bench(op, s, args.reps, args.warmups).csv_row().c_str());
    std::fflush(stdout);
  }
  return kExitOk;
}

struct TrainArgs {
  ToyConfig toy;
  std::size_t steps = 2000;
  std::string dump_weights;
};

int cmd_train_toy(const CliConfig& cfg, const TrainArgs& args) {
  ToyResult r = train_toy(args.toy, args.steps, cfg.seed);
  std::printf("step,loss\n");
  for (std::size_t i = 0; i < r.losses.size(); ++i) std::printf("%zu,%.6f\n", i, r.losses[i]);
  if (!args.dump_weights.empty()) save_weights(args.dump_weights, r.weights);
  if (r.losses.size() < 100) return kExitOk;
  double first = mean_loss(r.losses, 0, 50), last = mean_loss(r.losses, r.losses.size() - 50, 50);
  bool ok = last < 0.4 * first;
  std::fprintf(stderr, "first-50 mean %.4f, last-50 mean %.4f, ratio %.3f: %s\n", first, last, last / first,
               ok ? "PASS" : "FAIL");
  return ok ? kExitOk : kExitCheckFailed;
}

struct GradArgs {
  double step = 1e-3;
  double tolerance = 1e-6;
  std::string bn_mode = "infer";
};

int cmd_gradcheck(const CliConfig& cfg, const GradArgs& args) {
  GradCheckConfig gc;
  gc.step = args.step;
  gc.bn_mode = args.bn_mode == "train" ? BnMode::kTrain : BnMode::kInfer;
  GradCheckReport report = grad_check(grad_check_micro_arch(), cfg.seed, gc);
  GradCheckReport bn = grad_check_batchnorm_train(cfg.seed, Shape{2, 4, 4, 4}, args.step);
  report.entries.insert(report.entries.end(), bn.entries.begin(), bn.entries.end());
  bool ok = true;
  if (cfg.format == "csv") std::printf("tensor,count,kink_skips,max_abs_err,max_rel_err,max_elem_rel_err,status\n");
  json out = json::array();
  for (const auto& e : report.entries) {
    bool pass = e.max_rel_err < args.tolerance;
    ok = ok && pass;
    if (cfg.format == "csv") {
      std::printf("%s,%zu,%zu,%.3g,%.3g,%.3g,%s\n", e.name.c_str(), e.count, e.kink_skips, e.max_abs_err,
                  e.max_rel_err, e.max_elem_rel_err, pass ? "PASS" : "FAIL");
    } else if (cfg.format == "json") {
      out.push_back({{"tensor", e.name}, {"count", e.count}, {"kink_skips", e.kink_skips},
                     {"max_rel_err", e.max_rel_err}, {"pass", pass}});
    } else {
      std::printf("%-18s n=%-4zu kinks=%-3zu max_rel_err=%.3g  %s\n", e.name.c_str(), e.count, e.kink_skips,
                  e.max_rel_err, pass ? "PASS" : "FAIL");
    }
  }
  if (cfg.format == "json") std::cout << out.dump(2) << "\n";
  if (cfg.format == "table") std::printf("%s (tolerance %g, h=%g)\n", ok ? "PASS" : "FAIL", args.tolerance, args.step);
  return ok ? kExitOk : kExitCheckFailed;
}

int cmd_init_model(const CliConfig& cfg, const std::string& out_dir, std::size_t classes) {
  ArchDescriptor a;
  try {
    a = build_mobilenet(cfg.hyperparams(classes));
  } catch (const ValidationError& e) {
    throw UsageError(e.what());
  }
  save_model(out_dir, make_model(a, cfg.seed));
  std::printf("wrote %s/%s and %s/%s\n", out_dir.c_str(), kArchFileName, out_dir.c_str(), kWeightFileName);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"MobileNet inference engine and cost modeler"};
  app.require_subcommand(1);
  app.fallthrough();

  CliConfig cfg;
  app.add_option("--alpha", cfg.alpha, "Width multiplier in (0, 1]")->capture_default_str();
  app.add_option("--resolution", cfg.resolution, "Input resolution, a multiple of 32")->capture_default_str();
  app.add_flag("--shallow", cfg.shallow, "Drop the five repeated 14x14x512 separable blocks");
  app.add_option("--seed", cfg.seed, "Seed for weights, data and checks")->capture_default_str();
  app.add_option("--format", cfg.format, "Output format")
      ->check(CLI::IsMember({"table", "csv", "json"}))
      ->capture_default_str();

  auto* describe = app.add_subcommand("describe", "Print the layer list and per-layer input sizes");
  auto* analyze_cmd = app.add_subcommand("analyze", "Count mult-adds and parameters");
  auto* tables = app.add_subcommand("paper-tables", "Print the cost reproductions and the sweep CSV");

  InferArgs infer_args;
  auto* infer = app.add_subcommand("infer", "Classify a PPM (P6) or MBT1 tensor");
  infer->add_option("--model", infer_args.model_dir, "Model bundle directory (default: random weights from --seed)");
  infer->add_option("--input", infer_args.input, "Input .ppm or MBT1 file")->required()->check(CLI::ExistingFile);
  infer->add_option("--top-k", infer_args.top_k, "Number of classes to print")->capture_default_str();
  infer->add_flag("--reference-ops", infer_args.reference_ops, "Use the naive reference kernels");

  BenchArgs bench_args;
  auto* bench_cmd = app.add_subcommand("bench", "Time conv kernels; CSV op,shape,median_ns,mult_adds,gflops");
  bench_cmd->add_option("--op", bench_args.op, "all, conv_gemm, conv_ref, dw_direct, dw_ref, pw_gemm or pw_ref")
      ->capture_default_str();
  bench_cmd->add_option("--height", bench_args.shape.height)->capture_default_str();
  bench_cmd->add_option("--width", bench_args.shape.width)->capture_default_str();
  bench_cmd->add_option("--in-channels", bench_args.shape.in_channels)->capture_default_str();
  bench_cmd->add_option("--out-channels", bench_args.shape.out_channels)->capture_default_str();
  bench_cmd->add_option("--kernel", bench_args.shape.kernel, "Kernel size for standard and depthwise ops")
      ->capture_default_str();
  bench_cmd->add_option("--stride", bench_args.shape.stride)->capture_default_str();
  bench_cmd->add_option("--reps", bench_args.reps, "Timed repetitions")->capture_default_str();
  bench_cmd->add_option("--warmups", bench_args.warmups)->capture_default_str();
  bench_cmd->add_flag("--forward", bench_args.forward, "Time whole forward passes and split by layer type");
  bench_cmd->add_option("--batch", bench_args.batch, "Batch size for --forward")->capture_default_str();

  TrainArgs train_args;
  auto* train = app.add_subcommand("train-toy", "Train on the synthetic 4-class task; CSV step,loss");
  train->add_option("--steps", train_args.steps)->capture_default_str();
  train->add_option("--lr", train_args.toy.learning_rate, "Learning rate")->capture_default_str();
  train->add_option("--lr-decay", train_args.toy.lr_decay, "Per-step multiplicative decay")->capture_default_str();
  train->add_option("--batch", train_args.toy.batch)->capture_default_str();
  train->add_option("--l2", train_args.toy.reg.l2, "L2 on standard, pointwise and FC weights")->capture_default_str();
  train->add_option("--l2-depthwise", train_args.toy.reg.l2_depthwise)->capture_default_str();
  train->add_flag("--fixed-batch", train_args.toy.fixed_batch, "Reuse the first batch every step");
  train->add_option("--dump-weights", train_args.dump_weights, "Write the trained weights (MBNW)");

  GradArgs grad_args;
  auto* grad = app.add_subcommand("gradcheck", "Compare backward passes against f64 central differences");
  grad->add_option("--step", grad_args.step, "Finite-difference step")->capture_default_str();
  grad->add_option("--tolerance", grad_args.tolerance)->capture_default_str();
  grad->add_option("--bn-mode", grad_args.bn_mode, "Batchnorm mode inside the micro-net")
      ->check(CLI::IsMember({"infer", "train"}))
      ->capture_default_str();

  std::string init_out;
  std::size_t init_classes = 1000;
  auto* init = app.add_subcommand("init-model", "Write a randomly initialized model bundle");
  init->add_option("--out", init_out, "Output directory")->required();
  init->add_option("--classes", init_classes)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*describe) return cmd_describe(cfg);
    if (*analyze_cmd) return cmd_analyze(cfg);
    if (*tables) return cmd_paper_tables(cfg);
    if (*infer) return cmd_infer(cfg, infer_args);
    if (*bench_cmd) return cmd_bench(cfg, bench_args);
    if (*train) return cmd_train_toy(cfg, train_args);
    if (*grad) return cmd_gradcheck(cfg, grad_args);
    if (*init) return cmd_init_model(cfg, init_out, init_classes);
  } catch (const UsageError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitUsage;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitCheckFailed;
  }
  return kExitUsage;
}
