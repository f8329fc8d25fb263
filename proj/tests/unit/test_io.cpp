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

#include <cstring>
#include <random>

#include "mbnet/binary_io.hpp"
#include "mbnet/model.hpp"
#include "mbnet/ppm.hpp"
#include "mbnet/weights.hpp"
#include "test_util.hpp"

namespace mbnet {
namespace {

ArchDescriptor small_arch(double alpha = 0.25) { return build_mobilenet_prefix(alpha, 32, 5, 10); }

FormatError::Kind decode_kind(const std::vector<std::uint8_t>& bytes) {
  try {
    decode_weights(bytes);
  } catch (const FormatError& e) {
    return e.kind();
  }
  ADD_FAILURE() << "expected FormatError";
  return FormatError::Kind::kIo;
}

TEST(WeightFile, HeaderLayout) {
  WeightStore s;
  s.insert("ab", Tensor(Shape{2, 3}, 1.0f));
  auto bytes = encode_weights(s);
  ASSERT_GE(bytes.size(), 12u);
  EXPECT_EQ(std::memcmp(bytes.data(), "MBNW", 4), 0);
  auto u32 = [&](std::size_t at) {
    return std::uint32_t(bytes[at]) | std::uint32_t(bytes[at + 1]) << 8 | std::uint32_t(bytes[at + 2]) << 16 |
           std::uint32_t(bytes[at + 3]) << 24;
  };
  EXPECT_EQ(u32(4), 1u);
  EXPECT_EQ(u32(8), 1u);
  EXPECT_EQ(bytes[12], 2);  // u16 name length, little-endian
  EXPECT_EQ(bytes[13], 0);
  EXPECT_EQ(bytes[14], 'a');
  EXPECT_EQ(bytes[16], 0);  // dtype f32
  EXPECT_EQ(bytes[17], 2);  // rank
  EXPECT_EQ(u32(18), 2u);
  EXPECT_EQ(u32(22), 3u);
  EXPECT_EQ(bytes.size(), 26u + 6 * 4);
  float one = 1.0f;
  EXPECT_EQ(std::memcmp(bytes.data() + 26, &one, 4), 0);
}

TEST(WeightFile, SaveLoadSaveIsByteIdentical) {
  auto dir = testutil::temp_dir("weights_roundtrip");
  auto store = init_weights(small_arch(), 3);
  save_weights((dir / "a.mbnw").string(), store);
  auto loaded = load_weights((dir / "a.mbnw").string(), small_arch());
  EXPECT_TRUE(loaded == store);
  save_weights((dir / "b.mbnw").string(), loaded);
  EXPECT_EQ(read_file_bytes((dir / "a.mbnw").string()), read_file_bytes((dir / "b.mbnw").string()));
}

TEST(WeightFile, TruncationByOneByte) {
  auto bytes = encode_weights(init_weights(small_arch(), 3));
  bytes.pop_back();
  EXPECT_EQ(decode_kind(bytes), FormatError::Kind::kTruncated);
}

TEST(WeightFile, EveryTruncationIsTyped) {
  WeightStore s;
  s.insert("w", Tensor(Shape{3, 2}, 0.5f));
  s.insert("b", Tensor(Shape{2}, 0.25f));
  auto bytes = encode_weights(s);
  for (std::size_t n = 0; n < bytes.size(); ++n) {
    std::vector<std::uint8_t> cut(bytes.begin(), bytes.begin() + static_cast<long>(n));
    EXPECT_THROW(decode_weights(cut), FormatError) << "length " << n;
  }
}

TEST(WeightFile, CorruptHeaders) {
  WeightStore s;
  s.insert("w", Tensor(Shape{2}, 1.0f));
  auto good = encode_weights(s);

  auto bad = good;
  bad[0] = 'X';
  EXPECT_EQ(decode_kind(bad), FormatError::Kind::kBadMagic);

  bad = good;
  bad[4] = 9;
  EXPECT_EQ(decode_kind(bad), FormatError::Kind::kVersion);

  bad = good;
  bad[12 + 2 + 1] = 7;  // dtype
  EXPECT_EQ(decode_kind(bad), FormatError::Kind::kCorrupt);

  bad = good;
  bad[12 + 2 + 2] = 9;  // rank
  EXPECT_EQ(decode_kind(bad), FormatError::Kind::kCorrupt);

  bad = good;
  bad.push_back(0);
  EXPECT_EQ(decode_kind(bad), FormatError::Kind::kCorrupt);
}

TEST(WeightFile, RandomCorruptionNeverCrashes) {
  auto good = encode_weights(init_weights(build_mobilenet_prefix(0.25, 8, 3, 3), 1));
  std::mt19937_64 rng(5);
  for (int i = 0; i < 300; ++i) {
    auto bad = good;
    std::size_t flips = testutil::pick(rng, 1, 4);
    for (std::size_t f = 0; f < flips; ++f) bad[testutil::pick(rng, 0, bad.size() - 1)] ^= 0xff;
    try {
      decode_weights(bad);
    } catch (const Error&) {
    }
  }
  SUCCEED();
}

TEST(WeightFile, AlphaMismatchNamesFirstTensor) {
  auto dir = testutil::temp_dir("weights_alpha");
  auto path = (dir / "w.mbnw").string();
  save_weights(path, init_weights(build_mobilenet(Hyperparams{0.5, 224, false, 1000}), 1));
  try {
    load_weights(path, build_mobilenet(Hyperparams{}));
    FAIL() << "expected shape mismatch";
  } catch (const FormatError& e) {
    EXPECT_EQ(e.kind(), FormatError::Kind::kShapeMismatch);
    EXPECT_NE(std::string(e.what()).find("conv0/kernel"), std::string::npos) << e.what();
  }
}

TEST(WeightFile, MissingFileIsIoError) {
  try {
    load_weights("/nonexistent/dir/w.mbnw");
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_EQ(e.kind(), FormatError::Kind::kIo);
  }
}

TEST(RawTensor, Roundtrip) {
  std::mt19937_64 rng(1);
  Tensor t = testutil::random_tensor(Shape{1, 4, 5, 3}, rng);
  auto bytes = encode_raw_tensor(t);
  EXPECT_EQ(std::memcmp(bytes.data(), "MBT1", 4), 0);
  EXPECT_EQ(bytes.size(), 4u + 4 + 4 * 4 + t.size() * 4);
  EXPECT_TRUE(decode_raw_tensor(bytes) == t);
}

TEST(RawTensor, CorruptionIsTyped) {
  auto bytes = encode_raw_tensor(Tensor(Shape{2, 2}, 1.0f));
  for (std::size_t n = 0; n < bytes.size(); ++n) {
    std::vector<std::uint8_t> cut(bytes.begin(), bytes.begin() + static_cast<long>(n));
    EXPECT_THROW(decode_raw_tensor(cut), FormatError);
  }
  auto zero_dim = bytes;
  zero_dim[8] = 0;
  EXPECT_THROW(decode_raw_tensor(zero_dim), FormatError);
}

TEST(Ppm, DecodeScalesToSymmetricRange) {
  std::vector<std::uint8_t> rgb = {0, 255, 51, 0, 0, 0};
  auto t = decode_ppm(encode_ppm(2, 1, rgb));
  EXPECT_EQ(t.shape(), (Shape{1, 1, 2, 3}));
  EXPECT_FLOAT_EQ(t[0], -1.0f);
  EXPECT_FLOAT_EQ(t[1], 1.0f);
  EXPECT_NEAR(t[2], 51.0 / 255.0 * 2 - 1, 1e-6);
}

TEST(Ppm, CommentsAndErrors) {
  std::string text = "P6\n# comment\n1 1\n255\n";
  std::vector<std::uint8_t> bytes(text.begin(), text.end());
  bytes.insert(bytes.end(), {10, 20, 30});
  EXPECT_EQ(decode_ppm(bytes).size(), 3u);

  std::string p3 = "P3\n1 1\n255\n";
  EXPECT_THROW(decode_ppm(std::vector<std::uint8_t>(p3.begin(), p3.end())), FormatError);
  std::string deep = "P6\n1 1\n65535\n";
  EXPECT_THROW(decode_ppm(std::vector<std::uint8_t>(deep.begin(), deep.end())), FormatError);
  bytes.pop_back();
  EXPECT_THROW(decode_ppm(bytes), FormatError);
}

}  // namespace
}  // namespace mbnet
