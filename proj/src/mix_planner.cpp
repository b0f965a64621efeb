#include "cascade/mix_planner.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <nlohmann/json.hpp>

#include "cascade/errors.hpp"

namespace cascade {

ConfidenceGrid ConfidenceGrid::from(double gamma, double step) {
  if (!(gamma > 0.0 && gamma < 1.0)) throw DomainError("grid base confidence must lie in (0, 1)");
  if (!(step > 0.0)) throw DomainError("grid step must be positive");
  ConfidenceGrid grid;
  grid.levels.push_back(gamma);
  for (int j = 1;; ++j) {
    double v = gamma + j * step;
    v = std::round(v * 1e12) / 1e12;
    if (v >= 1.0 - 1e-9) break;
    grid.levels.push_back(v);
  }
  grid.levels.push_back(1.0);
  return grid;
}

double refined_alpha(double delta, double r) {
  if (!(r >= 0.0 && r < 1.0)) {
    throw DomainError("profiled ratio must lie in [0, 1) for planning, got " + std::to_string(r));
  }
  return std::max(0.0, 1.0 - delta / (1.0 - r));
}

MixProgram build_mix_program(std::span<const ModelProfile> profiles, const ConfidenceGrid& grid,
                             const AccuracySpec& spec, double r) {
  MixProgram prog;
  prog.grid = grid;
  prog.alpha = refined_alpha(spec.delta, r);
  prog.gamma = spec.gamma;
  for (const auto& p : profiles) {
    MixCandidate cand;
    cand.name = p.model.name;
    cand.is_reference = p.is_reference;
    cand.unit_cost = p.c;
    for (double level : grid.levels) {
      double l = 0.0;
      if (p.is_reference) {
        l = 1.0;
      } else if (level < 1.0) {
        l = stats::binom_ci(p.n, p.e, level).lower;
      }
      cand.lower_bounds.push_back(l);
    }
    prog.models.push_back(std::move(cand));
  }
  for (std::size_t i = 0; i < prog.models.size(); ++i) {
    for (std::size_t j = 0; j < grid.levels.size(); ++j) {
      prog.terms.push_back(BilinearTerm{i, j, prog.models[i].lower_bounds[j]});
    }
  }
  return prog;
}

double MixPlan::ratio(const std::string& name) const {
  for (const auto& e : entries) {
    if (e.name == name) return e.ratio;
  }
  return 0.0;
}

double plan_accuracy(const MixPlan& plan) {
  double acc = 0.0;
  for (const auto& e : plan.entries) acc += e.lower_bound * e.ratio;
  return acc;
}

double plan_log_confidence(const MixPlan& plan) {
  double sum = 0.0;
  for (const auto& e : plan.entries) {
    if (e.level) sum += std::log(*e.level);
  }
  return sum;
}

bool plan_is_feasible(const MixPlan& plan, const MixProgram& program) {
  double total = 0.0;
  for (const auto& e : plan.entries) {
    if (e.ratio < 0.0 || e.ratio > 1.0) return false;
    if (e.ratio > 0.0 && !e.level) return false;
    total += e.ratio;
  }
  if (std::fabs(total - 1.0) > 1e-9) return false;
  if (plan_accuracy(plan) < program.alpha) return false;
  return plan_log_confidence(plan) >= std::log(program.gamma);
}

namespace {

struct LevelOption {
  std::size_t level = 0;
  double lower = 0.0;
  double log_level = 0.0;
};

// Levels worth considering for one model. The reference always runs at
// gamma = 1 with bound 1. For other models a level is dropped when a higher
// (cheaper in budget) level offers at least the same bound.
std::vector<LevelOption> options_for(const MixCandidate& m, const ConfidenceGrid& grid) {
  const std::size_t last = grid.levels.size() - 1;
  if (m.is_reference) return {LevelOption{last, 1.0, 0.0}};
  std::vector<LevelOption> opts;
  double best_above = -1.0;
  for (std::size_t j = grid.levels.size(); j-- > 0;) {
    const double l = j == last ? 0.0 : m.lower_bounds[j];
    if (l > best_above) {
      opts.push_back(LevelOption{j, l, std::log(grid.levels[j])});
      best_above = l;
    }
  }
  std::ranges::reverse(opts);
  return opts;
}

struct Support {
  double objective = std::numeric_limits<double>::infinity();
  std::size_t first = 0;
  LevelOption first_level;
  double first_ratio = 0.0;
  std::optional<std::size_t> second;
  LevelOption second_level;
};

MixPlan materialize(const MixProgram& prog, const Support& s) {
  MixPlan plan;
  plan.refined_alpha = prog.alpha;
  for (const auto& m : prog.models) {
    MixAssignment a;
    a.name = m.name;
    a.is_reference = m.is_reference;
    a.unit_cost = m.unit_cost;
    plan.entries.push_back(std::move(a));
  }
  const auto assign = [&](std::size_t i, const LevelOption& opt, double ratio) {
    auto& a = plan.entries[i];
    a.ratio = ratio;
    a.level = prog.grid.levels[opt.level];
    a.lower_bound = opt.lower;
  };
  assign(s.first, s.first_level, s.first_ratio);
  if (s.second) assign(*s.second, s.second_level, 1.0 - s.first_ratio);

  // Push the high-accuracy ratio up by ulps until the accuracy constraint
  // holds in floating point exactly as plan_is_feasible evaluates it.
  if (s.second) {
    for (int guard = 0; guard < 1000 && plan_accuracy(plan) < prog.alpha; ++guard) {
      auto& hi = plan.entries[s.first];
      hi.ratio = std::nextafter(hi.ratio, 2.0);
      plan.entries[*s.second].ratio = 1.0 - hi.ratio;
    }
  }
  plan.objective = 0.0;
  for (const auto& e : plan.entries) plan.objective += e.unit_cost * e.ratio;
  return plan;
}

}  // namespace

MixPlan solve_mix_exact(const MixProgram& prog) {
  if (prog.models.empty()) throw DomainError("mix program has no models");
  if (std::ranges::count_if(prog.models, &MixCandidate::is_reference) != 1) {
    throw DomainError("mix program needs exactly one reference model");
  }
  const double budget = std::log(prog.gamma);
  const double alpha = prog.alpha;

  std::vector<std::vector<LevelOption>> options;
  for (const auto& m : prog.models) options.push_back(options_for(m, prog.grid));

  Support best;
  const auto consider = [&](const Support& cand) {
    if (cand.objective < best.objective) best = cand;
  };

  // Single-model vertices.
  for (std::size_t i = 0; i < prog.models.size(); ++i) {
    for (const auto& o : options[i]) {
      if (o.log_level >= budget && o.lower >= alpha) {
        Support s;
        s.objective = prog.models[i].unit_cost;
        s.first = i;
        s.first_level = o;
        s.first_ratio = 1.0;
        consider(s);
      }
    }
  }

  // Two-model vertices: the accuracy constraint binds, one model above alpha
  // and one below.
  for (std::size_t i = 0; i < prog.models.size(); ++i) {
    for (std::size_t j = i + 1; j < prog.models.size(); ++j) {
      for (const auto& oi : options[i]) {
        for (const auto& oj : options[j]) {
          if (oi.log_level + oj.log_level < budget) continue;
          const bool i_high = oi.lower > alpha && oj.lower < alpha;
          const bool j_high = oj.lower > alpha && oi.lower < alpha;
          if (!i_high && !j_high) continue;
          const std::size_t hi = i_high ? i : j;
          const std::size_t lo = i_high ? j : i;
          const LevelOption& ohi = i_high ? oi : oj;
          const LevelOption& olo = i_high ? oj : oi;
          if (prog.models[lo].unit_cost >= prog.models[hi].unit_cost) continue;
          const double x_hi = (alpha - olo.lower) / (ohi.lower - olo.lower);
          Support s;
          s.objective = x_hi * prog.models[hi].unit_cost + (1.0 - x_hi) * prog.models[lo].unit_cost;
          s.first = hi;
          s.first_level = ohi;
          s.first_ratio = x_hi;
          s.second = lo;
          s.second_level = olo;
          consider(s);
        }
      }
    }
  }

  if (!std::isfinite(best.objective)) {
    throw std::logic_error("mix program infeasible; the reference alone should always be feasible");
  }
  return materialize(prog, best);
}

std::vector<PartitionSlice> partition_by_ratios(std::size_t count, const MixPlan& plan) {
  const std::size_t m = plan.entries.size();
  std::vector<std::size_t> sizes(m, 0);
  std::vector<double> frac(m, 0.0);
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < m; ++i) {
    double q = plan.entries[i].ratio * static_cast<double>(count);
    if (std::fabs(q - std::round(q)) < 1e-9) q = std::round(q);
    const double fl = std::floor(q);
    sizes[i] = static_cast<std::size_t>(fl);
    frac[i] = q - fl;
    assigned += sizes[i];
  }
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::ranges::stable_sort(order, [&](std::size_t a, std::size_t b) {
    const auto& ea = plan.entries[a];
    const auto& eb = plan.entries[b];
    if (ea.lower_bound != eb.lower_bound) return ea.lower_bound > eb.lower_bound;
    if (frac[a] != frac[b]) return frac[a] > frac[b];
    return ea.name < eb.name;
  });
  std::size_t leftover = count > assigned ? count - assigned : 0;
  for (std::size_t pass = 0; leftover > 0; ++pass) {
    bool progressed = false;
    for (std::size_t i : order) {
      if (leftover == 0) break;
      const bool eligible = pass == 0 ? frac[i] > 0.0 : plan.entries[i].ratio > 0.0;
      if (!eligible) continue;
      ++sizes[i];
      --leftover;
      progressed = true;
    }
    if (!progressed && pass > 0) {
      sizes[order.front()] += leftover;
      leftover = 0;
    }
  }
  for (std::size_t over = assigned > count ? assigned - count : 0; over > 0;) {
    for (auto it = order.rbegin(); it != order.rend() && over > 0; ++it) {
      if (sizes[*it] > 0) {
        --sizes[*it];
        --over;
      }
    }
  }
  std::vector<PartitionSlice> slices;
  std::size_t begin = 0;
  for (std::size_t i = 0; i < m; ++i) {
    slices.push_back(PartitionSlice{plan.entries[i].name, begin, begin + sizes[i]});
    begin += sizes[i];
  }
  return slices;
}

std::string plan_to_json(const MixPlan& plan) {
  nlohmann::ordered_json j;
  j["refined_alpha"] = plan.refined_alpha;
  nlohmann::ordered_json models = nlohmann::ordered_json::object();
  for (const auto& e : plan.entries) {
    nlohmann::ordered_json row;
    row["ratio"] = e.ratio;
    row["level"] = e.level ? nlohmann::ordered_json(*e.level) : nlohmann::ordered_json(nullptr);
    row["lower_bound"] = e.lower_bound;
    row["unit_cost"] = e.unit_cost;
    row["reference"] = e.is_reference;
    models[e.name] = std::move(row);
  }
  j["models"] = std::move(models);
  j["objective"] = plan.objective;
  return j.dump(2);
}

}  // namespace cascade
