#pragma once

// Special functions and interval/quadrature primitives behind every
// certification decision: regularized incomplete beta, beta quantiles,
// Clopper-Pearson intervals, binomial tails and Gauss-Legendre quadrature.

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <vector>

namespace cascade::stats {

/// Two-sided exact binomial confidence interval on a success probability.
struct BinomInterval {
  double lower = 0.0;
  double upper = 1.0;
  double confidence = 0.0;
};

/// Regularized incomplete beta I_x(a, b).
/// Throws DomainError for a <= 0, b <= 0 or x outside [0, 1].
double reg_inc_beta(double a, double b, double x);

/// Smallest x with I_x(a, b) = p, to |I_x - p| <= 1e-12, by bracketed bisection.
/// Throws ConvergenceError if the bracket collapses before the tolerance is met.
double beta_quantile(double a, double b, double p);

/// Clopper-Pearson interval for e successes in n trials at confidence gamma.
/// Conventions: e == 0 gives lower 0, e == n gives upper 1, n == 0 gives (0, 1).
BinomInterval binom_ci(std::int64_t n, std::int64_t e, double gamma);

/// True iff binom_ci(n, e, gamma).lower >= threshold, decided with a single
/// incomplete-beta evaluation instead of a quantile search.
bool ci_lower_at_least(std::int64_t n, std::int64_t e, double gamma, double threshold);

/// Pr(X <= x) for X ~ Binom(k, a).
double binom_cdf(std::int64_t k, double a, std::int64_t x);

/// Pr(X >= x) for X ~ Binom(k, a), computed without cancellation.
double binom_tail_at_least(std::int64_t k, double a, std::int64_t x);

double normal_pdf(double x, double mean, double sd);

/// Student t cumulative distribution with `dof` degrees of freedom.
double students_t_cdf(double t, double dof);

/// Gauss-Legendre nodes and weights on [0, 1].
struct QuadratureRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

/// Cached rule for the given node count (thread-safe).
std::shared_ptr<const QuadratureRule> gauss_legendre(std::size_t nodes);

inline constexpr std::size_t kDefaultQuadratureNodes = 256;

/// Fixed-node Gauss-Legendre estimate of the integral of f over [0, 1].
/// Throws DomainError when nodes < 64.
double integrate_unit(const std::function<double(double)>& f,
                      std::size_t nodes = kDefaultQuadratureNodes);

/// Same rule mapped onto [lo, hi].
double integrate_interval(const std::function<double(double)>& f, double lo, double hi,
                          std::size_t nodes = kDefaultQuadratureNodes);

}  // namespace cascade::stats
