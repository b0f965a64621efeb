#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <cstring>
#include <string>
#include <random>
#include <vector>

#include "cascade/simd.hpp"
#include "cascade/stats.hpp"

using namespace cascade::simd;

namespace {

bool have_avx2() { return detected_level() == Level::Avx2; }

}  // namespace

TEST(Draws, ThresholdEndpoints) {
  EXPECT_EQ(probability_threshold(0.0), 0u);
  EXPECT_EQ(probability_threshold(-0.5), 0u);
  EXPECT_EQ(probability_threshold(1.0), std::uint64_t{1} << 53);
  EXPECT_EQ(probability_threshold(0.5), std::uint64_t{1} << 52);
  EXPECT_FALSE(agrees(7, 3, 0));
  EXPECT_TRUE(agrees(7, 3, probability_threshold(1.0)));
}

TEST(Draws, FrequencyTracksProbability) {
  for (double p : {0.1, 0.5, 0.93}) {
    const std::size_t n = 200000;
    const double hits = static_cast<double>(scalar::count_agreements(42, probability_threshold(p), 0, n));
    EXPECT_NEAR(hits / n, p, 4.0 * std::sqrt(p * (1 - p) / n));
  }
}

TEST(Draws, ScalarMaskMatchesPointwise) {
  std::vector<std::uint8_t> mask(1000);
  const auto t = probability_threshold(0.37);
  scalar::agreement_mask(99, t, 12345, mask);
  std::uint64_t count = 0;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    EXPECT_EQ(mask[i] != 0, agrees(99, 12345 + i, t));
    count += mask[i];
  }
  EXPECT_EQ(count, scalar::count_agreements(99, t, 12345, mask.size()));
}

TEST(Avx2, AgreementMaskIsBitIdentical) {
  if (!have_avx2()) GTEST_SKIP() << "no AVX2";
  std::mt19937_64 rng(5);
  for (std::size_t len : {0u, 1u, 3u, 4u, 5u, 31u, 1000u, 4097u}) {
    const std::uint64_t ns = rng(), first = rng() % 1000000;
    const auto t = probability_threshold(std::uniform_real_distribution<>(0, 1)(rng));
    std::vector<std::uint8_t> a(len), b(len);
    scalar::agreement_mask(ns, t, first, a);
    avx2::agreement_mask(ns, t, first, b);
    EXPECT_EQ(a, b) << len;
    EXPECT_EQ(scalar::count_agreements(ns, t, first, len), avx2::count_agreements(ns, t, first, len));
  }
}

TEST(Avx2, IncBetaBatchIsBitIdentical) {
  if (!have_avx2()) GTEST_SKIP() << "no AVX2";
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<> unit(0, 1);
  for (auto [a, b] : std::vector<std::pair<double, double>>{
           {0.5, 0.5}, {1, 1}, {3, 5}, {19, 2}, {200, 15}, {4000, 300}, {1, 37}}) {
    std::vector<double> xs(257);
    for (auto& x : xs) x = unit(rng);
    xs[0] = 0.0;
    xs[1] = 1.0;
    xs[2] = a / (a + b);
    std::vector<double> s(xs.size()), v(xs.size());
    scalar::inc_beta_batch(a, b, xs, s);
    avx2::inc_beta_batch(a, b, xs, v);
    EXPECT_EQ(0, std::memcmp(s.data(), v.data(), s.size() * sizeof(double))) << a << " " << b;
  }
}

TEST(Scalar, IncBetaBatchMatchesPointwise) {
  std::vector<double> xs{0.0, 0.1, 0.4, 0.93, 1.0}, out(xs.size());
  scalar::inc_beta_batch(3, 5, xs, out);
  for (std::size_t i = 0; i < xs.size(); ++i) {
    EXPECT_DOUBLE_EQ(out[i], cascade::stats::reg_inc_beta(3, 5, xs[i]));
  }
  EXPECT_NEAR(out[2], 0.580096, 1e-12);
}

TEST(Dispatch, EnvironmentSelectsScalar) {
  const char* env = std::getenv("CASCADE_SIMD");
  if (env == nullptr || std::string(env) != "scalar") GTEST_SKIP() << "CASCADE_SIMD not set";
  EXPECT_EQ(active_level(), Level::Scalar);
}

TEST(Dispatch, ForceLevelIsClampedAndRestorable) {
  const Level initial = active_level();
  force_level(Level::Scalar);
  EXPECT_EQ(active_level(), Level::Scalar);
  force_level(Level::Avx2);
  EXPECT_EQ(active_level(), detected_level());
  force_level(initial);
  EXPECT_EQ(level_name(Level::Scalar), "scalar");
  EXPECT_EQ(level_name(Level::Avx2), "avx2");
}

TEST(Dispatch, BothLevelsGiveSameCounts) {
  const Level initial = active_level();
  const auto t = probability_threshold(0.8);
  force_level(Level::Scalar);
  const auto s = count_agreements(3, t, 0, 50001);
  force_level(Level::Avx2);
  const auto v = count_agreements(3, t, 0, 50001);
  force_level(initial);
  EXPECT_EQ(s, v);
}
