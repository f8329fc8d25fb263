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

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mbnet/error.hpp"
#include "mbnet/tensor.hpp"

namespace mbnet {

// Little-endian byte sink.
class ByteWriter {
 public:
  void u8(std::uint8_t v) { buf_.push_back(v); }
  void u16(std::uint16_t v) { put(v, 2); }
  void u32(std::uint32_t v) { put(v, 4); }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void bytes(std::string_view s) { buf_.insert(buf_.end(), s.begin(), s.end()); }

  const std::vector<std::uint8_t>& buffer() const { return buf_; }

 private:
  void put(std::uint64_t v, int n) {
    for (int i = 0; i < n; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  std::vector<std::uint8_t> buf_;
};

// Little-endian byte source; every read past the end raises kTruncated.
class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> data) : data_(data) {}

  std::uint8_t u8() { return static_cast<std::uint8_t>(get(1)); }
  std::uint16_t u16() { return static_cast<std::uint16_t>(get(2)); }
  std::uint32_t u32() { return static_cast<std::uint32_t>(get(4)); }
  float f32() { return std::bit_cast<float>(u32()); }
  std::string bytes(std::size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(data_.data() + pos_), n);
    pos_ += n;
    return s;
  }

  std::size_t remaining() const { return data_.size() - pos_; }
  std::size_t position() const { return pos_; }

  void need(std::size_t n) const {
    if (remaining() < n) {
      throw FormatError(FormatError::Kind::kTruncated,
                        "truncated input: need " + std::to_string(n) + " bytes at offset " +
                            std::to_string(pos_) + ", have " + std::to_string(remaining()));
    }
  }

 private:
  std::uint64_t get(int n) {
    need(static_cast<std::size_t>(n));
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) v |= std::uint64_t(data_[pos_ + i]) << (8 * i);
    pos_ += static_cast<std::size_t>(n);
    return v;
  }

  std::span<const std::uint8_t> data_;
  std::size_t pos_ = 0;
};

inline std::vector<std::uint8_t> read_file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError(FormatError::Kind::kIo, "cannot open " + path);
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), {});
}

inline void write_file_bytes(const std::string& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError(FormatError::Kind::kIo, "cannot write " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw FormatError(FormatError::Kind::kIo, "write failed for " + path);
}

// Raw tensor file: "MBT1", u32 rank, rank x u32 dims, count x f32.
inline constexpr std::string_view kRawTensorMagic = "MBT1";

inline std::vector<std::uint8_t> encode_raw_tensor(const Tensor& t) {
  ByteWriter w;
  w.bytes(kRawTensorMagic);
  w.u32(static_cast<std::uint32_t>(t.shape().rank()));
  for (std::size_t d : t.shape().dims()) w.u32(static_cast<std::uint32_t>(d));
  for (float v : t.data()) w.f32(v);
  return w.buffer();
}

inline Tensor decode_raw_tensor(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  if (r.remaining() < 4 || r.bytes(4) != kRawTensorMagic) {
    throw FormatError(FormatError::Kind::kBadMagic, "not an MBT1 tensor file");
  }
  std::uint32_t rank = r.u32();
  if (rank < 1 || rank > Shape::kMaxRank) {
    throw FormatError(FormatError::Kind::kCorrupt, "bad tensor rank " + std::to_string(rank));
  }
  std::vector<std::size_t> dims(rank);
  for (auto& d : dims) d = r.u32();
  Shape shape;
  try {
    shape = Shape(dims);
  } catch (const Error& e) {
    throw FormatError(FormatError::Kind::kCorrupt, std::string("bad tensor dims: ") + e.what());
  }
  if (shape.count() > r.remaining() / 4) {
    throw FormatError(FormatError::Kind::kTruncated, "tensor payload is truncated");
  }
  std::vector<float> data(shape.count());
  for (auto& v : data) v = r.f32();
  if (r.remaining() != 0) {
    throw FormatError(FormatError::Kind::kCorrupt, "trailing bytes after tensor payload");
  }
  return Tensor(std::move(shape), std::move(data));
}

inline void save_raw_tensor(const std::string& path, const Tensor& t) {
  write_file_bytes(path, encode_raw_tensor(t));
}

inline Tensor load_raw_tensor(const std::string& path) {
  return decode_raw_tensor(read_file_bytes(path));
}

}  // namespace mbnet
