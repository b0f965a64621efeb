#include <cmath>

#include "cascade/errors.hpp"
#include "cascade/simd.hpp"
#include "inc_beta_detail.hpp"

namespace cascade::simd::scalar {

void agreement_mask(std::uint64_t ns, std::uint64_t threshold, std::uint64_t first_id,
                    std::span<std::uint8_t> out) {
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = agrees(ns, first_id + i, threshold) ? 1 : 0;
  }
}

std::uint64_t count_agreements(std::uint64_t ns, std::uint64_t threshold,
                               std::uint64_t first_id, std::size_t count) {
  std::uint64_t total = 0;
  for (std::size_t i = 0; i < count; ++i) {
    total += agrees(ns, first_id + i, threshold) ? 1 : 0;
  }
  return total;
}

namespace {

// Modified Lentz evaluation of the incomplete beta continued fraction.
double continued_fraction(double a, double b, double x) {
  using detail::kCfEps;
  using detail::kCfMaxIter;
  using detail::kCfTiny;
  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < kCfTiny) d = kCfTiny;
  d = 1.0 / d;
  double h = d;
  for (int it = 1; it <= kCfMaxIter; ++it) {
    const double m = it;
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kCfTiny) d = kCfTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kCfTiny) c = kCfTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kCfTiny) d = kCfTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kCfTiny) c = kCfTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < kCfEps) return h;
  }
  throw ConvergenceError("incomplete beta continued fraction did not converge");
}

}  // namespace

double inc_beta(double a, double b, double x, double log_beta) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const detail::LaneSetup s = detail::setup_lane(a, b, x, log_beta);
  return detail::finish_lane(s, continued_fraction(s.cf_a, s.cf_b, s.cf_x));
}

void inc_beta_batch(double a, double b, std::span<const double> xs, std::span<double> out) {
  const double log_beta = detail::log_beta(a, b);
  for (std::size_t i = 0; i < xs.size(); ++i) {
    out[i] = inc_beta(a, b, xs[i], log_beta);
  }
}

}  // namespace cascade::simd::scalar
