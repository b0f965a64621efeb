#include "cascade/stats.hpp"

#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <string>

#include "cascade/errors.hpp"
#include "cascade/simd.hpp"
#include "simd/inc_beta_detail.hpp"

namespace cascade::stats {

namespace {

constexpr double kQuantileTol = 1e-12;
constexpr int kQuantileMaxIter = 2000;

void check_beta_params(double a, double b) {
  if (!(a > 0.0) || !(b > 0.0) || !std::isfinite(a) || !std::isfinite(b)) {
    throw DomainError("incomplete beta requires a > 0 and b > 0, got a=" + std::to_string(a) +
                      " b=" + std::to_string(b));
  }
}

void check_unit(double x, const char* what) {
  if (!(x >= 0.0 && x <= 1.0)) {
    throw DomainError(std::string(what) + " must lie in [0, 1], got " + std::to_string(x));
  }
}

void check_confidence(double gamma) {
  if (!(gamma > 0.0 && gamma < 1.0)) {
    throw DomainError("confidence must lie in (0, 1), got " + std::to_string(gamma));
  }
}

void check_counts(std::int64_t n, std::int64_t e) {
  if (n < 0 || e < 0 || e > n) {
    throw DomainError("binomial counts require 0 <= e <= n, got n=" + std::to_string(n) +
                      " e=" + std::to_string(e));
  }
}

}  // namespace

double reg_inc_beta(double a, double b, double x) {
  check_beta_params(a, b);
  check_unit(x, "x");
  if (x == 0.0) return 0.0;
  if (x == 1.0) return 1.0;
  return simd::scalar::inc_beta(a, b, x, simd::detail::log_beta(a, b));
}

double beta_quantile(double a, double b, double p) {
  check_beta_params(a, b);
  check_unit(p, "p");
  if (p == 0.0) return 0.0;
  if (p == 1.0) return 1.0;
  const double log_beta = simd::detail::log_beta(a, b);
  double lo = 0.0;
  double hi = 1.0;
  double best_x = 0.5;
  double best_err = 2.0;
  for (int it = 0; it < kQuantileMaxIter; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    const double v = simd::scalar::inc_beta(a, b, mid, log_beta);
    const double err = std::fabs(v - p);
    if (err < best_err) {
      best_err = err;
      best_x = mid;
    }
    if (err <= kQuantileTol) return mid;
    if (v < p) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  if (best_err <= kQuantileTol) return best_x;
  throw ConvergenceError("beta quantile did not reach tolerance for a=" + std::to_string(a) +
                         " b=" + std::to_string(b) + " p=" + std::to_string(p));
}

BinomInterval binom_ci(std::int64_t n, std::int64_t e, double gamma) {
  check_counts(n, e);
  check_confidence(gamma);
  BinomInterval ci;
  ci.confidence = gamma;
  if (n == 0) return ci;
  const double tail = (1.0 - gamma) / 2.0;
  const auto nd = static_cast<double>(n);
  const auto ed = static_cast<double>(e);
  ci.lower = e > 0 ? beta_quantile(ed, nd - ed + 1.0, tail) : 0.0;
  ci.upper = e < n ? beta_quantile(ed + 1.0, nd - ed, 1.0 - tail) : 1.0;
  return ci;
}

bool ci_lower_at_least(std::int64_t n, std::int64_t e, double gamma, double threshold) {
  check_counts(n, e);
  check_confidence(gamma);
  if (threshold <= 0.0) return true;
  if (e == 0 || threshold >= 1.0) return false;
  // lower >= t  <=>  I_t(e, n - e + 1) <= (1 - gamma) / 2, since I is increasing in x.
  const auto nd = static_cast<double>(n);
  const auto ed = static_cast<double>(e);
  return reg_inc_beta(ed, nd - ed + 1.0, threshold) <= (1.0 - gamma) / 2.0;
}

double binom_cdf(std::int64_t k, double a, std::int64_t x) {
  if (k < 0) throw DomainError("binomial trial count must be non-negative");
  check_unit(a, "success probability");
  if (x < 0) return 0.0;
  if (x >= k) return 1.0;
  if (a == 0.0) return 1.0;
  if (a == 1.0) return 0.0;
  const auto kd = static_cast<double>(k);
  const auto xd = static_cast<double>(x);
  return reg_inc_beta(kd - xd, xd + 1.0, 1.0 - a);
}

double binom_tail_at_least(std::int64_t k, double a, std::int64_t x) {
  if (k < 0) throw DomainError("binomial trial count must be non-negative");
  check_unit(a, "success probability");
  if (x <= 0) return 1.0;
  if (x > k) return 0.0;
  if (a == 0.0) return 0.0;
  if (a == 1.0) return 1.0;
  const auto kd = static_cast<double>(k);
  const auto xd = static_cast<double>(x);
  return reg_inc_beta(xd, kd - xd + 1.0, a);
}

double normal_pdf(double x, double mean, double sd) {
  const double z = (x - mean) / sd;
  return std::exp(-0.5 * z * z) / (sd * std::sqrt(2.0 * std::numbers::pi));
}

double students_t_cdf(double t, double dof) {
  if (!(dof > 0.0)) throw DomainError("degrees of freedom must be positive");
  if (std::isinf(t)) return t > 0 ? 1.0 : 0.0;
  const double x = dof / (dof + t * t);
  const double tail = 0.5 * reg_inc_beta(dof / 2.0, 0.5, x);
  return t > 0.0 ? 1.0 - tail : tail;
}

namespace {

QuadratureRule build_gauss_legendre(std::size_t n) {
  QuadratureRule rule;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  const auto nd = static_cast<double>(n);
  for (std::size_t i = 0; i < (n + 1) / 2; ++i) {
    double z = std::cos(std::numbers::pi * (static_cast<double>(i) + 0.75) / (nd + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p1 = 1.0;
      double p2 = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        const double p3 = p2;
        p2 = p1;
        const auto jd = static_cast<double>(j);
        p1 = ((2.0 * jd + 1.0) * z * p2 - jd * p3) / (jd + 1.0);
      }
      dp = nd * (z * p1 - p2) / (z * z - 1.0);
      const double dz = p1 / dp;
      z -= dz;
      if (std::fabs(dz) < 1e-16) break;
    }
    const double w = 2.0 / ((1.0 - z * z) * dp * dp);
    // Map [-1, 1] to [0, 1], ascending.
    rule.nodes[i] = 0.5 * (1.0 - z);
    rule.nodes[n - 1 - i] = 0.5 * (1.0 + z);
    rule.weights[i] = 0.5 * w;
    rule.weights[n - 1 - i] = 0.5 * w;
  }
  return rule;
}

}  // namespace

std::shared_ptr<const QuadratureRule> gauss_legendre(std::size_t nodes) {
  static std::mutex mu;
  static std::map<std::size_t, std::shared_ptr<const QuadratureRule>> cache;
  std::lock_guard lock(mu);
  auto& slot = cache[nodes];
  if (!slot) slot = std::make_shared<const QuadratureRule>(build_gauss_legendre(nodes));
  return slot;
}

double integrate_interval(const std::function<double(double)>& f, double lo, double hi,
                          std::size_t nodes) {
  if (nodes < 64) throw DomainError("quadrature requires at least 64 nodes");
  const auto rule = gauss_legendre(nodes);
  const double width = hi - lo;
  double sum = 0.0;
  for (std::size_t i = 0; i < nodes; ++i) {
    sum += rule->weights[i] * f(lo + width * rule->nodes[i]);
  }
  return sum * width;
}

double integrate_unit(const std::function<double(double)>& f, std::size_t nodes) {
  return integrate_interval(f, 0.0, 1.0, nodes);
}

}  // namespace cascade::stats
