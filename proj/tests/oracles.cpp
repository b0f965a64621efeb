#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace oracle {

double binom_log_pmf(std::int64_t n, std::int64_t x, double p) {
  const double lc = std::lgamma(n + 1.0) - std::lgamma(x + 1.0) - std::lgamma(n - x + 1.0);
  return lc + x * std::log(p) + (n - x) * std::log1p(-p);
}

namespace {

// Sum of PMF terms j = from..to, stepping each term from the previous one by
// the ratio (n - j) / (j + 1) * p / (1 - p). Falls back to per-term lgamma when
// the first term would underflow.
double pmf_sum(std::int64_t n, std::int64_t from, std::int64_t to, double p) {
  const double first = binom_log_pmf(n, from, p);
  long double sum = 0.0L;
  if (first < -11000.0) {
    for (std::int64_t j = from; j <= to; ++j) sum += std::exp(static_cast<long double>(binom_log_pmf(n, j, p)));
  } else {
    const long double odds = static_cast<long double>(p) / (1.0L - static_cast<long double>(p));
    long double term = std::exp(static_cast<long double>(first));
    for (std::int64_t j = from; j <= to; ++j) {
      sum += term;
      term *= static_cast<long double>(n - j) / static_cast<long double>(j + 1) * odds;
    }
  }
  return static_cast<double>(std::min(sum, 1.0L));
}

}  // namespace

double binom_tail_ge(std::int64_t n, std::int64_t x, double p) {
  if (x <= 0) return 1.0;
  if (x > n) return 0.0;
  if (p <= 0.0) return 0.0;
  if (p >= 1.0) return 1.0;
  return pmf_sum(n, x, n, p);
}

double binom_cdf_le(std::int64_t n, std::int64_t x, double p) {
  if (x < 0) return 0.0;
  if (x >= n) return 1.0;
  if (p <= 0.0) return 1.0;
  if (p >= 1.0) return 0.0;
  return pmf_sum(n, 0, x, p);
}

namespace {

template <typename F>
double bisect_increasing(F&& f, double target) {
  double lo = 0.0, hi = 1.0;
  for (int i = 0; i < 200 && hi - lo > 1e-16; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (f(mid) < target) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

}  // namespace

double cp_lower(std::int64_t n, std::int64_t e, double gamma) {
  if (n == 0 || e == 0) return 0.0;
  const double half = (1.0 - gamma) / 2.0;
  return bisect_increasing([&](double p) { return binom_tail_ge(n, e, p); }, half);
}

double cp_upper(std::int64_t n, std::int64_t e, double gamma) {
  if (n == 0 || e == n) return 1.0;
  const double half = (1.0 - gamma) / 2.0;
  // cdf decreases in p, so bisect on its complement.
  return bisect_increasing([&](double p) { return 1.0 - binom_cdf_le(n, e, p); }, 1.0 - half);
}

namespace {

double simpson_rec(const std::function<double(double)>& f, double a, double b, double fa,
                   double fm, double fb, double whole, double tol, int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  const double flm = f(lm), frm = f(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  const double diff = left + right - whole;
  if (depth <= 0 || std::fabs(diff) <= 15.0 * tol) return left + right + diff / 15.0;
  return simpson_rec(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) +
         simpson_rec(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1);
}

}  // namespace

double adaptive_simpson(const std::function<double(double)>& f, double a, double b, double tol,
                        int max_depth) {
  const double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
  const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  return simpson_rec(f, a, b, fa, fm, fb, whole, tol, max_depth);
}

double prob_valid(std::int64_t k, std::int64_t e_star, double a_hat, double sd) {
  if (e_star < 0) return 0.0;
  if (e_star == 0) return 1.0;
  const auto integrand = [&](double a) {
    const double z = (a - a_hat) / sd;
    const double pdf = std::exp(-0.5 * z * z) / (sd * std::sqrt(2.0 * M_PI));
    return binom_tail_ge(k, e_star, a) * pdf;
  };
  const double lo = std::max(0.0, a_hat - 10.0 * sd);
  const double hi = std::min(1.0, a_hat + 10.0 * sd);
  constexpr int kPanels = 64;
  double sum = 0.0;
  for (int i = 0; i < kPanels; ++i) {
    const double a = lo + (hi - lo) * i / kPanels;
    const double b = lo + (hi - lo) * (i + 1) / kPanels;
    sum += adaptive_simpson(integrand, a, b, 1e-13);
  }
  return sum;
}

double lp_dual_optimum(const std::vector<LpModel>& models, double alpha) {
  double best_l = -1.0;
  for (const auto& m : models) best_l = std::max(best_l, m.lower);
  if (best_l < alpha) return std::numeric_limits<double>::infinity();
  std::vector<double> lambdas{0.0};
  for (std::size_t i = 0; i < models.size(); ++i) {
    for (std::size_t j = i + 1; j < models.size(); ++j) {
      const double dl = models[i].lower - models[j].lower;
      if (dl == 0.0) continue;
      const double lam = (models[i].cost - models[j].cost) / dl;
      if (lam >= 0.0) lambdas.push_back(lam);
    }
  }
  double best = -std::numeric_limits<double>::infinity();
  for (double lam : lambdas) {
    double inner = std::numeric_limits<double>::infinity();
    for (const auto& m : models) inner = std::min(inner, m.cost - lam * m.lower);
    best = std::max(best, inner + lam * alpha);
  }
  return best;
}

double lp_grid_optimum(const std::vector<LpModel>& models, double alpha, int resolution) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& m : models) {
    if (m.lower >= alpha) best = std::min(best, m.cost);
  }
  for (std::size_t i = 0; i < models.size(); ++i) {
    for (std::size_t j = 0; j < models.size(); ++j) {
      if (i == j) continue;
      const auto& a = models[i];
      const auto& b = models[j];
      const auto acc = [&](double x) { return a.lower * x + b.lower * (1.0 - x); };
      const auto cost = [&](double x) { return a.cost * x + b.cost * (1.0 - x); };
      // Grid scan for the first feasible x (feasibility is monotone in x when
      // a is the more accurate model), then bisection to refine it.
      if (!(a.lower > b.lower)) continue;
      int first = -1;
      for (int t = 0; t <= resolution; ++t) {
        if (acc(static_cast<double>(t) / resolution) >= alpha) {
          first = t;
          break;
        }
      }
      if (first < 0) continue;
      double lo = first == 0 ? 0.0 : static_cast<double>(first - 1) / resolution;
      double hi = static_cast<double>(first) / resolution;
      if (first == 0) {
        best = std::min(best, cost(0.0));
        continue;
      }
      for (int it = 0; it < 200 && hi - lo > 0.0; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (mid == lo || mid == hi) break;
        if (acc(mid) >= alpha) {
          hi = mid;
        } else {
          lo = mid;
        }
      }
      best = std::min(best, cost(hi));
    }
  }
  return best;
}

double mix_brute_force(const std::vector<std::vector<double>>& lower,
                       const std::vector<double>& levels, const std::vector<double>& costs,
                       double alpha, double gamma, int grid_resolution) {
  const std::size_t m = costs.size();
  const std::size_t radix = levels.size() + 1;  // digit 0 = no level
  std::vector<std::size_t> digit(m, 0);
  double best = std::numeric_limits<double>::infinity();
  const double budget = std::log(gamma);
  while (true) {
    double spent = 0.0;
    std::vector<LpModel> lp(m);
    for (std::size_t i = 0; i < m; ++i) {
      lp[i].cost = costs[i];
      if (digit[i] > 0) {
        spent += std::log(levels[digit[i] - 1]);
        lp[i].lower = lower[i][digit[i] - 1];
      }
    }
    if (spent >= budget) {
      const double v = grid_resolution > 0 ? lp_grid_optimum(lp, alpha, grid_resolution)
                                           : lp_dual_optimum(lp, alpha);
      best = std::min(best, v);
    }
    std::size_t pos = 0;
    while (pos < m && ++digit[pos] == radix) digit[pos++] = 0;
    if (pos == m) break;
  }
  return best;
}

}  // namespace oracle
