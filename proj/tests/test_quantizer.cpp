// Copyright 2026 The vecfl Authors. All rights reserved.
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
#include <vector>

#include "vecfl/quantizer.hpp"
#include "vecfl/random.hpp"

using namespace vecfl;

namespace {

GradientVector gv(std::vector<double> v) { return GradientVector(std::move(v)); }

}  // namespace

TEST(GradientVector, RejectsEmptyAndNonFinite) {
  EXPECT_THROW(gv({}), ValidationError);
  EXPECT_THROW(gv({1.0, std::nan("")}), ValidationError);
  EXPECT_THROW(gv({INFINITY}), ValidationError);
}

TEST(GradientVector, NormMatchesSumOfSquares) {
  const GradientVector g = gv({3.0, -4.0, 12.0});
  EXPECT_NEAR(g.norm(), 13.0, 1e-12);
  EXPECT_NEAR(g.squared_norm(), 169.0, 1e-12);
}

TEST(Quantize, TwoElementLevelFrequencies) {
  // a = (0.6, 0.8), q = 2: element 0 is 2 w.p. 0.2 else 1; element 1 is 2 w.p. 0.6 else 1.
  Rng rng = make_stream(7, 0, StreamPurpose::kQuantizer);
  const GradientVector g = gv({0.6, -0.8});
  const int n = 200000;
  int hi0 = 0, hi1 = 0;
  for (int i = 0; i < n; ++i) {
    const QuantizedGradient qg = quantize(g, 2, rng);
    ASSERT_DOUBLE_EQ(qg.norm, 1.0);
    ASSERT_EQ(qg.signs[0], 1);
    ASSERT_EQ(qg.signs[1], -1);
    ASSERT_TRUE(qg.levels[0] == 1 || qg.levels[0] == 2);
    ASSERT_TRUE(qg.levels[1] == 1 || qg.levels[1] == 2);
    hi0 += qg.levels[0] == 2;
    hi1 += qg.levels[1] == 2;
  }
  const double se0 = std::sqrt(0.2 * 0.8 / n), se1 = std::sqrt(0.6 * 0.4 / n);
  EXPECT_NEAR(hi0 / double(n), 0.2, 5 * se0);
  EXPECT_NEAR(hi1 / double(n), 0.6, 5 * se1);
}

TEST(Quantize, ZeroVectorEncodesToZeros) {
  Rng rng(1);
  for (std::uint32_t q : {1u, 2u, 10u}) {
    const QuantizedGradient qg = quantize(gv({0.0, 0.0, 0.0}), q, rng);
    EXPECT_EQ(qg.norm, 0.0);
    for (auto l : qg.levels) EXPECT_EQ(l, 0u);
    for (auto s : qg.signs) EXPECT_EQ(s, 0);
    const GradientVector back = dequantize(qg);
    for (double x : back.values()) EXPECT_EQ(x, 0.0);
  }
}

TEST(Quantize, UnitElementHitsTopLevelDeterministically) {
  Rng rng(3);
  for (int i = 0; i < 1000; ++i) {
    const QuantizedGradient qg = quantize(gv({1.0}), 4, rng);
    ASSERT_EQ(qg.levels[0], 4u);
    ASSERT_EQ(dequantize(qg)[0], 1.0);
  }
}

TEST(Quantize, ExactGridPointIsNotPromoted) {
  // a = 0.5 with q = 4 lands on level 2 exactly.
  Rng rng(5);
  const GradientVector g = gv({3.0, 0.0, 0.0, 0.0, std::sqrt(27.0)});  // norm 6, a0 = 0.5
  for (int i = 0; i < 1000; ++i) ASSERT_EQ(quantize(g, 4, rng).levels[0], 2u);
}

TEST(Quantize, ZeroEntryKeepsZeroSign) {
  Rng rng(9);
  const QuantizedGradient qg = quantize(gv({0.0, 2.0, -1.0}), 3, rng);
  EXPECT_EQ(qg.signs[0], 0);
  EXPECT_EQ(qg.levels[0], 0u);
  EXPECT_EQ(qg.signs[1], 1);
  EXPECT_EQ(qg.signs[2], -1);
}

TEST(Quantize, RejectsZeroLevels) {
  Rng rng(1);
  EXPECT_THROW(quantize(gv({1.0}), 0, rng), ValidationError);
}

TEST(Quantize, SameSeedSameEncoding) {
  std::vector<double> v(50);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = std::sin(double(i)) * (i % 3 ? 1.0 : -2.0);
  Rng a = make_stream(11, 4, StreamPurpose::kQuantizer);
  Rng b = make_stream(11, 4, StreamPurpose::kQuantizer);
  const GradientVector g = gv(v);
  for (int i = 0; i < 20; ++i) EXPECT_EQ(quantize(g, 6, a), quantize(g, 6, b));
}

TEST(Dequantize, Formula) {
  QuantizedGradient a{1.0, {1}, {1}, 2};
  EXPECT_DOUBLE_EQ(dequantize(a)[0], 0.5);
  QuantizedGradient b{2.0, {-1}, {3}, 4};
  EXPECT_DOUBLE_EQ(dequantize(b)[0], -1.5);
  QuantizedGradient z{0.0, {0, 0}, {0, 0}, 5};
  EXPECT_EQ(dequantize(z)[0], 0.0);
  EXPECT_EQ(dequantize(z)[1], 0.0);
}

TEST(Dequantize, RejectsMalformed) {
  QuantizedGradient over{1.0, {1}, {5}, 4};
  EXPECT_THROW(dequantize(over), ValidationError);
  QuantizedGradient ragged{1.0, {1, 1}, {1}, 4};
  EXPECT_THROW(dequantize(ragged), ValidationError);
  QuantizedGradient negative{-1.0, {1}, {1}, 4};
  EXPECT_THROW(dequantize(negative), ValidationError);
}

TEST(PayloadBits, Values) {
  EXPECT_EQ(payload_bits(3, 269722), 809166.0);
  EXPECT_EQ(payload_bits(1, 1), 2.0);
  EXPECT_NEAR(payload_bits(2, 269722), 697221.2556195117, 1e-6);
}

TEST(PayloadBits, IncreasingInLevelLinearInDimension) {
  for (std::uint32_t q = 1; q < 10; ++q) EXPECT_LT(payload_bits(q, 269722), payload_bits(q + 1, 269722));
  for (std::uint32_t q = 1; q <= 10; ++q) EXPECT_NEAR(payload_bits(q, 2000), 2.0 * payload_bits(q, 1000), 1e-9);
}

TEST(ErrorBound, Values) {
  EXPECT_DOUBLE_EQ(quantization_error_bound(4, 1.0, 2), 1.0);
  EXPECT_DOUBLE_EQ(quantization_error_bound(100, 2.0, 10), 2.0);
  EXPECT_EQ(quantization_error_bound(gv({0.0, 0.0}), 3), 0.0);
  EXPECT_TRUE(in_error_bound_regime(100, 10));
  EXPECT_FALSE(in_error_bound_regime(99, 10));
}
