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

// Line-oriented architecture format:
//
//   input 224x224x3
//   conv s2 3x3 3->32
//   dw s1 3x3 32
//   pw 32->64
//   avgpool
//   fc 1024->1000
//   softmax
//
// '#' starts a comment; blank lines are ignored.

#include <charconv>
#include <cstddef>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "mbnet/arch.hpp"
#include "mbnet/error.hpp"

namespace mbnet {

namespace detail {

inline bool parse_size(std::string_view s, std::size_t& out) {
  if (s.empty()) return false;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && p == s.data() + s.size();
}

inline std::vector<std::string> split_ws(const std::string& line) {
  std::istringstream is(line);
  std::vector<std::string> toks;
  for (std::string t; is >> t;) toks.push_back(t);
  return toks;
}

// "a->b"
inline bool parse_arrow(std::string_view s, std::size_t& a, std::size_t& b) {
  auto pos = s.find("->");
  return pos != std::string_view::npos && parse_size(s.substr(0, pos), a) && parse_size(s.substr(pos + 2), b);
}

// "s<n>"
inline bool parse_stride(std::string_view s, std::size_t& v) {
  return s.size() > 1 && s[0] == 's' && parse_size(s.substr(1), v) && v >= 1;
}

// "<k>x<k>", square only.
inline bool parse_square_kernel(std::string_view s, std::size_t& k) {
  auto pos = s.find('x');
  std::size_t k2 = 0;
  return pos != std::string_view::npos && parse_size(s.substr(0, pos), k) && parse_size(s.substr(pos + 1), k2) &&
         k == k2 && k >= 1;
}

}  // namespace detail

inline ArchDescriptor parse_arch(const std::string& text) {
  std::istringstream is(text);
  std::string raw;
  std::size_t line_no = 0;
  bool have_input = false;
  FeatureShape input;
  FeatureShape cur;
  std::vector<LayerSpec> layers;

  while (std::getline(is, raw)) {
    ++line_no;
    if (auto hash = raw.find('#'); hash != std::string::npos) raw.resize(hash);
    auto toks = detail::split_ws(raw);
    if (toks.empty()) continue;
    const std::string& op = toks[0];
    auto fail = [&](const std::string& why) { return ParseError(line_no, why); };

    if (op == "input") {
      if (have_input) throw fail("duplicate input line");
      if (!layers.empty()) throw fail("input line must precede layers");
      std::size_t h = 0, w = 0, c = 0;
      auto p1 = toks.size() == 2 ? toks[1].find('x') : std::string::npos;
      auto p2 = p1 == std::string::npos ? p1 : toks[1].find('x', p1 + 1);
      if (p2 == std::string::npos || !detail::parse_size(std::string_view(toks[1]).substr(0, p1), h) ||
          !detail::parse_size(std::string_view(toks[1]).substr(p1 + 1, p2 - p1 - 1), w) ||
          !detail::parse_size(std::string_view(toks[1]).substr(p2 + 1), c) || h == 0 || w == 0 || c == 0) {
        throw fail("expected 'input <h>x<w>x<c>'");
      }
      input = cur = FeatureShape{h, w, c};
      have_input = true;
      continue;
    }
    if (!have_input) throw fail("missing 'input' header before '" + op + "'");

    LayerSpec l;
    std::size_t a = 0, b = 0, s = 0, k = 0;
    if (op == "conv") {
      if (toks.size() != 4 || !detail::parse_stride(toks[1], s) || !detail::parse_square_kernel(toks[2], k) ||
          !detail::parse_arrow(toks[3], a, b)) {
        throw fail("expected 'conv s<stride> <k>x<k> <in>-><out>'");
      }
      l = LayerSpec::std_conv(s, k, a, b);
    } else if (op == "dw") {
      if (toks.size() != 4 || !detail::parse_stride(toks[1], s) || !detail::parse_square_kernel(toks[2], k) ||
          !detail::parse_size(toks[3], a)) {
        throw fail("expected 'dw s<stride> <k>x<k> <channels>'");
      }
      l = LayerSpec::depthwise(s, k, a);
    } else if (op == "pw") {
      if (toks.size() != 2 || !detail::parse_arrow(toks[1], a, b)) throw fail("expected 'pw <in>-><out>'");
      l = LayerSpec::pointwise(a, b);
    } else if (op == "avgpool") {
      if (toks.size() != 1) throw fail("'avgpool' takes no arguments");
      l = LayerSpec::avgpool(cur.channels);
    } else if (op == "fc") {
      if (toks.size() != 2 || !detail::parse_arrow(toks[1], a, b)) throw fail("expected 'fc <in>-><out>'");
      l = LayerSpec::fully_connected(a, b);
    } else if (op == "softmax") {
      if (toks.size() != 1) throw fail("'softmax' takes no arguments");
      l = LayerSpec::softmax(cur.channels);
    } else {
      throw fail("unknown layer '" + op + "'");
    }
    try {
      cur = layer_output_shape(l, cur);
    } catch (const ShapeError& e) {
      throw fail(std::string("shape chain broken: ") + e.what());
    }
    layers.push_back(l);
  }
  if (!have_input) throw ParseError(line_no, "missing 'input' header");
  return ArchDescriptor(input, std::move(layers));
}

inline std::string emit_layer(const LayerSpec& l) {
  auto kk = std::to_string(l.kernel) + "x" + std::to_string(l.kernel);
  auto arrow = std::to_string(l.in_channels) + "->" + std::to_string(l.out_channels);
  switch (l.kind) {
    case LayerKind::kStdConv: return "conv s" + std::to_string(l.stride) + " " + kk + " " + arrow;
    case LayerKind::kDepthwiseConv:
      return "dw s" + std::to_string(l.stride) + " " + kk + " " + std::to_string(l.in_channels);
    case LayerKind::kPointwiseConv: return "pw " + arrow;
    case LayerKind::kAvgPool: return "avgpool";
    case LayerKind::kFullyConnected: return "fc " + arrow;
    case LayerKind::kSoftmax: return "softmax";
  }
  return "";
}

inline std::string emit_arch(const ArchDescriptor& arch) {
  std::string out = "input " + arch.input().str() + "\n";
  for (const auto& l : arch.layers()) out += emit_layer(l) + "\n";
  return out;
}

}  // namespace mbnet
