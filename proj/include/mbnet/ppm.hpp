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

// Binary PPM (P6, maxval 255) decoding into a (1, H, W, 3) tensor scaled to
// [0, 1] and then mapped to [-1, 1].

#include <cctype>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mbnet/binary_io.hpp"
#include "mbnet/error.hpp"
#include "mbnet/tensor.hpp"

namespace mbnet {

inline Tensor decode_ppm(std::span<const std::uint8_t> bytes) {
  using K = FormatError::Kind;
  std::size_t pos = 0;
  auto skip_ws = [&] {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(bytes[pos])) {
        ++pos;
      } else {
        break;
      }
    }
  };
  auto number = [&]() -> std::size_t {
    skip_ws();
    std::size_t v = 0, digits = 0;
    while (pos < bytes.size() && std::isdigit(bytes[pos])) {
      v = v * 10 + (bytes[pos++] - '0');
      if (++digits > 9) throw FormatError(K::kCorrupt, "PPM header value too large");
    }
    if (digits == 0) throw FormatError(K::kCorrupt, "malformed PPM header");
    return v;
  };
  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '6') throw FormatError(K::kBadMagic, "not a binary PPM (P6)");
  pos = 2;
  std::size_t w = number(), h = number(), maxval = number();
  if (w == 0 || h == 0) throw FormatError(K::kCorrupt, "PPM has zero size");
  if (maxval != 255) throw FormatError(K::kCorrupt, "only 8-bit PPM (maxval 255) is supported");
  if (pos >= bytes.size() || !std::isspace(bytes[pos])) throw FormatError(K::kCorrupt, "malformed PPM header");
  ++pos;
  std::size_t need = w * h * 3;
  if (bytes.size() - pos < need) throw FormatError(K::kTruncated, "truncated PPM pixel data");
  Tensor t(Shape{1, h, w, 3});
  for (std::size_t i = 0; i < need; ++i) t[i] = static_cast<float>(bytes[pos + i]) / 255.0f * 2.0f - 1.0f;
  return t;
}

inline Tensor load_ppm(const std::string& path) { return decode_ppm(read_file_bytes(path)); }

inline std::vector<std::uint8_t> encode_ppm(std::size_t width, std::size_t height, std::span<const std::uint8_t> rgb) {
  std::string header = "P6\n" + std::to_string(width) + " " + std::to_string(height) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.insert(out.end(), rgb.begin(), rgb.end());
  return out;
}

}  // namespace mbnet
