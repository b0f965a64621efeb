#pragma once

// Per-lane setup shared by the scalar and AVX2 incomplete beta kernels. Both
// variants call these same functions so their results match bit for bit.

#include <cmath>

namespace cascade::simd::detail {

inline constexpr double kCfTiny = 1e-300;
inline constexpr double kCfEps = 1e-15;
inline constexpr int kCfMaxIter = 200000;

inline double log_beta(double a, double b) {
  const long double la = std::lgamma(static_cast<long double>(a));
  const long double lb = std::lgamma(static_cast<long double>(b));
  const long double lab = std::lgamma(static_cast<long double>(a) + static_cast<long double>(b));
  return static_cast<double>(la + lb - lab);
}

struct LaneSetup {
  double front;  // x^a (1-x)^b / B(a, b)
  bool swapped;  // evaluate 1 - I_{1-x}(b, a)
  double cf_a;
  double cf_b;
  double cf_x;
};

// Requires 0 < x < 1.
inline LaneSetup setup_lane(double a, double b, double x, double log_beta) {
  LaneSetup s;
  s.front = std::exp(a * std::log(x) + b * std::log1p(-x) - log_beta);
  s.swapped = x >= (a + 1.0) / (a + b + 2.0);
  if (s.swapped) {
    s.cf_a = b;
    s.cf_b = a;
    s.cf_x = 1.0 - x;
  } else {
    s.cf_a = a;
    s.cf_b = b;
    s.cf_x = x;
  }
  return s;
}

inline double finish_lane(const LaneSetup& s, double cf) {
  const double part = s.front * cf / s.cf_a;
  if (!s.swapped) return part;
  return 1.0 - part;
}

}  // namespace cascade::simd::detail
