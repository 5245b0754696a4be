// SPDX-FileCopyrightText: © 2026 The mulut Authors
//
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "mulut/transfer.hpp"
#include "support/oracles.hpp"

namespace mulut {
namespace {

TEST(Grid, EnumerationOrderAndSize) {
  const GridRange g = enumerate_grid(4, 4);
  ASSERT_EQ(g.size(), 83'521u);
  EXPECT_EQ(g[0], (GridTuple{0, 0, 0, 0}));
  EXPECT_EQ(g[1], (GridTuple{0, 0, 0, 16}));
  EXPECT_EQ(g[17], (GridTuple{0, 0, 16, 0}));
  EXPECT_EQ(g[g.size() - 1], (GridTuple{256, 256, 256, 256}));

  const GridRange c = enumerate_grid(3, 8);
  ASSERT_EQ(c.size(), 8u);
  std::size_t i = 0;
  for (const GridTuple& t : c) {
    EXPECT_EQ(t, c[i]);
    for (int d = 0; d < 3; ++d) EXPECT_TRUE(t[static_cast<std::size_t>(d)] == 0 || t[static_cast<std::size_t>(d)] == 256);
    ++i;
  }
  EXPECT_EQ(i, 8u);
  EXPECT_EQ(c[7], (GridTuple{256, 256, 256, 0}));
}

TEST(Grid, IndexMatchesTableLayout) {
  const LutTable t(5, 4, 1);
  const GridRange g = enumerate_grid(4, 5);
  for (std::size_t e : {std::size_t{0}, std::size_t{5}, std::size_t{1234}, g.size() - 1}) {
    int idx[4];
    for (int d = 0; d < 4; ++d) idx[d] = g[e][static_cast<std::size_t>(d)] >> 5;
    EXPECT_EQ(t.entry_index(idx), e);
  }
}

TEST(Encode, RoundHalfUpAndClamp) {
  EXPECT_EQ(encode_value(127.5), 128);
  EXPECT_EQ(encode_value(127.49), 127);
  EXPECT_EQ(encode_value(-3.0), 0);
  EXPECT_EQ(encode_value(300.0), 255);
  try {
    (void)encode_value(std::numeric_limits<double>::quiet_NaN());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::kNumeric);
  }
}

TEST(Cache, ThreadedEqualsSerial) {
  const auto f = builtin_function("bilinear", 3);
  EXPECT_EQ(cache_function(f.fn, 4, f.m, 4, 3), cache_function(f.fn, 4, f.m, 4, 1));
  const auto m = builtin_function("mean");
  EXPECT_EQ(cache_function(m.fn, 4, 1, 5, 7), cache_function(m.fn, 4, 1, 5, 1));
}

TEST(Cache, StoresFunctionAtGridPoints) {
  const auto f = builtin_function("bilinear", 2);
  const LutTable t = cache_function(f.fn, 4, f.m, 4);
  const int idx[4] = {1, 2, 3, 4};  // pixel values 16 32 48 64
  const std::size_t e = t.entry_index(idx);
  EXPECT_EQ(t.at(e, 0), 16);
  EXPECT_EQ(t.at(e, 1), 24);  // (16 + 32) / 2
  EXPECT_EQ(t.at(e, 2), 32);  // (16 + 48) / 2
  EXPECT_EQ(t.at(e, 3), 40);  // mean of four

  // The 256 level is evaluated at 255.
  const LutTable c = cache_function(builtin_function("copy-anchor").fn, 4, 1, 4);
  const int top[4] = {16, 0, 0, 0};
  EXPECT_EQ(c.at(c.entry_index(top), 0), 255);

  const LutTable k = cache_function(builtin_function("constant-128", 2).fn, 4, 4, 6);
  for (auto v : k.values()) EXPECT_EQ(v, 128);
}

TEST(Builtins, NamesAndErrors) {
  for (const auto& id : builtin_function_names()) EXPECT_NO_THROW((void)builtin_function(id));
  EXPECT_THROW((void)builtin_function("sharpen"), Error);
  EXPECT_THROW((void)builtin_function("identity-rgb", 2), Error);
  EXPECT_EQ(builtin_function("swap-rgb").n, 3);
  EXPECT_EQ(builtin_function("mean", 4).m, 16);
}

TEST(ValidateImport, CleanFileHasNoDiagnostics) {
  const BlockSpec b = BlockSpec::spatial(patterns::D(), 2, 1, 4);
  const auto bytes = write_lut(testing::random_table(4, 4, 4, 1), patterns::D(), LutRole::kSpatialOutput, 2);
  EXPECT_TRUE(validate_import(bytes, b, LutRole::kSpatialOutput).empty());
}

TEST(ValidateImport, ReportsEachMismatchByField) {
  const BlockSpec b = BlockSpec::spatial(patterns::D(), 2, 1, 4);
  const auto bytes = write_lut(testing::random_table(4, 4, 1, 1), patterns::S(), LutRole::kSpatialIntermediate, 1);
  const auto d = validate_import(bytes, b, LutRole::kSpatialOutput);
  auto has = [&](const std::string& field) {
    for (const auto& s : d)
      if (s.rfind(field + ":", 0) == 0) return true;
    return false;
  };
  EXPECT_TRUE(has("m"));
  EXPECT_TRUE(has("r"));
  EXPECT_TRUE(has("role"));
  EXPECT_TRUE(has("pattern"));
  EXPECT_FALSE(has("q"));
}

TEST(ValidateImport, ReadErrorsAndConstantPayload) {
  const BlockSpec b = BlockSpec::spatial(patterns::S(), 1, 1, 8);
  std::vector<std::uint8_t> junk(80, 7);
  auto d = validate_import(junk, b);
  ASSERT_EQ(d.size(), 1u);
  EXPECT_EQ(d[0].rfind("bad-magic:", 0), 0u) << d[0];

  auto bytes = write_lut(LutTable(8, 4, 1), patterns::S(), LutRole::kSpatialOutput);
  bytes.pop_back();
  d = validate_import(bytes, b);
  ASSERT_EQ(d.size(), 1u);
  EXPECT_EQ(d[0].rfind("length-mismatch:", 0), 0u) << d[0];

  const auto flat = write_lut(LutTable(8, 4, 1), patterns::S(), LutRole::kSpatialOutput);
  d = validate_import(flat, b);
  ASSERT_EQ(d.size(), 1u);
  EXPECT_EQ(d[0].rfind("payload:", 0), 0u) << d[0];
  EXPECT_TRUE(validate_import(flat, b, std::nullopt, true).empty());
}

TEST(Transfer, CachedMeanReproducesAffineOffGrid) {
  // Away from the top cell the cached mean is exact at every input.
  PipelineSpec spec = preset("MuLUT-S", 1, 4);
  testing::bind_all(spec, [](const BlockSpec& b) { return cache_function(builtin_function("mean").fn, 4, b.m(), b.q); });
  const LutTable& t = *spec.stages[0].blocks[0].luts[0];
  std::mt19937_64 rng(3);
  for (int i = 0; i < 2000; ++i) {
    const std::array<std::uint8_t, 4> x{std::uint8_t(rng() % 240), std::uint8_t(rng() % 240), std::uint8_t(rng() % 240),
                                        std::uint8_t(rng() % 240)};
    const auto r = simplex_interp_4d(t, x);
    const double want = (x[0] + x[1] + x[2] + x[3]) / 4.0;
    // Grid values of the mean are rounded; the error is bounded by that rounding.
    EXPECT_LE(std::abs(static_cast<double>(r.numerator[0]) / r.denominator - want), 0.5 + 1e-12);
  }
}

}  // namespace
}  // namespace mulut
