#include "cascade/profiler.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <nlohmann/json.hpp>

#include "cascade/errors.hpp"
#include "cascade/simd.hpp"

namespace cascade {

std::string_view to_string(ModelStatus status) {
  switch (status) {
    case ModelStatus::Unknown:
      return "Unknown";
    case ModelStatus::Valid:
      return "Valid";
    case ModelStatus::Invalid:
      return "Invalid";
  }
  return "?";
}

void AccuracySpec::validate() const {
  if (!(delta > 0.0 && delta < 1.0)) throw DomainError("delta must lie in (0, 1)");
  if (!(gamma > 0.0 && gamma < 1.0)) throw DomainError("gamma must lie in (0, 1)");
}

ModelProfile ModelProfile::reference(ModelId model, double initial_unit_cost) {
  ModelProfile p;
  p.model = std::move(model);
  p.is_reference = true;
  p.status = ModelStatus::Valid;
  p.c = initial_unit_cost;
  return p;
}

ModelProfile ModelProfile::candidate(ModelId model, double initial_unit_cost) {
  ModelProfile p;
  p.model = std::move(model);
  p.c = initial_unit_cost;
  return p;
}

void ModelProfile::record(bool equivalent, double cost) {
  ++n;
  if (equivalent) ++e;
  billed += cost;
  c = billed / static_cast<double>(n);
}

// ---------------------------------------------------------------------------

std::vector<std::optional<stats::BinomInterval>> eval_models(std::span<ModelProfile> profiles,
                                                             const AccuracySpec& spec) {
  std::vector<std::optional<stats::BinomInterval>> intervals(profiles.size());
  const double threshold = spec.threshold();
  for (std::size_t i = 0; i < profiles.size(); ++i) {
    ModelProfile& m = profiles[i];
    if (m.status != ModelStatus::Unknown) continue;
    const auto ci = stats::binom_ci(m.n, m.e, spec.gamma);
    intervals[i] = ci;
    if (ci.upper < threshold) m.status = ModelStatus::Invalid;
    if (ci.lower >= threshold) m.status = ModelStatus::Valid;
  }
  return intervals;
}

std::optional<std::int64_t> min_conforming_count(std::int64_t k, const ModelProfile& profile,
                                                 const AccuracySpec& spec) {
  if (k < 1) throw DomainError("min_conforming_count requires k >= 1");
  const std::int64_t total = k + profile.n;
  const auto certifies = [&](std::int64_t extra) {
    return stats::ci_lower_at_least(total, profile.e + extra, spec.gamma, spec.threshold());
  };
  if (!certifies(k)) return std::nullopt;
  std::int64_t lo = 0;
  std::int64_t hi = k;  // certifies(hi) holds
  if (certifies(lo)) return lo;
  while (hi - lo > 1) {
    const std::int64_t mid = lo + (hi - lo) / 2;
    if (certifies(mid)) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  return hi;
}

namespace {

constexpr double kWindowSigmas = 8.0;

// Gauss-Legendre on [lo, hi] of w(a) * Pr(Binom(k, a) >= e_star), where the
// binomial tail is evaluated for all nodes in one batched kernel call.
double weighted_tail_integral(std::int64_t k, std::int64_t e_star, double lo, double hi,
                              std::size_t nodes, double mean, double sd) {
  if (!(hi > lo)) return 0.0;
  const auto rule = stats::gauss_legendre(nodes);
  const double width = hi - lo;
  std::vector<double> xs(nodes);
  std::vector<double> tail(nodes);
  for (std::size_t i = 0; i < nodes; ++i) xs[i] = lo + width * rule->nodes[i];
  simd::inc_beta_batch(static_cast<double>(e_star), static_cast<double>(k - e_star + 1), xs,
                       tail);
  double sum = 0.0;
  for (std::size_t i = 0; i < nodes; ++i) {
    sum += rule->weights[i] * tail[i] * stats::normal_pdf(xs[i], mean, sd);
  }
  return sum * width;
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

}  // namespace

double prob_valid(std::int64_t k, const ModelProfile& profile, const AccuracySpec& spec,
                  const ProbValidOptions& opts) {
  if (profile.n < 1) throw DomainError("prob_valid requires a profiled model (n >= 1)");
  const auto e_star = min_conforming_count(k, profile, spec);
  if (!e_star) return 0.0;
  if (*e_star == 0) return 1.0;

  const double a_hat = static_cast<double>(profile.e) / static_cast<double>(profile.n);
  if (a_hat == 0.0 || a_hat == 1.0) {
    return stats::binom_tail_at_least(k, a_hat, *e_star);
  }

  // The density is negligible outside mean +- 8 sd, so integrating over that
  // window (clipped to [0, 1]) equals the integral over [0, 1]. The window is
  // split where the binomial tail steps from 0 to 1 so each panel sees a
  // smooth integrand.
  const double sd = std::sqrt(a_hat * (1.0 - a_hat) / static_cast<double>(profile.n));
  const double lo = std::max(0.0, a_hat - kWindowSigmas * sd);
  const double hi = std::min(1.0, a_hat + kWindowSigmas * sd);
  const double step = std::clamp((static_cast<double>(*e_star) - 0.5) / static_cast<double>(k),
                                 lo, hi);
  const std::size_t half = std::max<std::size_t>(opts.nodes / 2, 64);
  double p = weighted_tail_integral(k, *e_star, lo, step, half, a_hat, sd) +
             weighted_tail_integral(k, *e_star, step, hi, opts.nodes - half < 64 ? 64 : opts.nodes - half,
                                    a_hat, sd);
  if (opts.renormalize) {
    const double mass = normal_cdf((1.0 - a_hat) / sd) - normal_cdf(-a_hat / sd);
    if (mass > 0.0) p /= mass;
  }
  return std::clamp(p, 0.0, 1.0);
}

CostEstimate expected_cost_with(std::int64_t k, double reference_cost,
                                std::span<const double> unknown_costs, std::span<const double> p,
                                double fallback_cost, std::int64_t n_remaining) {
  CostEstimate est;
  est.k = k;
  double per_item_profile = reference_cost;
  for (double c : unknown_costs) per_item_profile += c;
  est.profiling_cost = static_cast<double>(k) * per_item_profile;

  // A newly Valid model pricier than the fallback would never be chosen.
  double none_valid_yet = 1.0;
  double per_item_apply = 0.0;
  for (std::size_t i = 0; i < unknown_costs.size(); ++i) {
    per_item_apply += none_valid_yet * p[i] * std::min(unknown_costs[i], fallback_cost);
    none_valid_yet *= 1.0 - p[i];
  }
  per_item_apply += none_valid_yet * fallback_cost;
  est.application_cost = static_cast<double>(n_remaining - k) * per_item_apply;
  est.total = est.profiling_cost + est.application_cost;
  return est;
}

std::vector<const ModelProfile*> unknown_by_cost(std::span<const ModelProfile> profiles) {
  std::vector<const ModelProfile*> out;
  for (const auto& m : profiles) {
    if (m.status == ModelStatus::Unknown) out.push_back(&m);
  }
  std::ranges::sort(out, [](const ModelProfile* a, const ModelProfile* b) {
    if (a->c != b->c) return a->c < b->c;
    return a->model.name < b->model.name;
  });
  return out;
}

const ModelProfile* cheapest_valid(std::span<const ModelProfile> profiles) {
  const ModelProfile* best = nullptr;
  for (const auto& m : profiles) {
    if (m.status != ModelStatus::Valid) continue;
    if (best == nullptr || m.c < best->c || (m.c == best->c && m.model.name < best->model.name)) {
      best = &m;
    }
  }
  return best;
}

const ModelProfile& reference_profile(std::span<const ModelProfile> profiles) {
  for (const auto& m : profiles) {
    if (m.is_reference) return m;
  }
  throw DomainError("profile set has no reference model");
}

CostEstimate expected_cost(std::int64_t k, std::span<const ModelProfile> profiles,
                           const ModelProfile& ref, const ModelProfile& cheapest,
                           const AccuracySpec& spec, std::int64_t n_remaining,
                           const ProbValidOptions& opts) {
  if (k < 1 || k > n_remaining) throw DomainError("expected_cost requires 1 <= k <= n_remaining");
  const auto unknown = unknown_by_cost(profiles);
  std::vector<double> costs;
  std::vector<double> p;
  for (const ModelProfile* m : unknown) {
    costs.push_back(m->c);
    p.push_back(prob_valid(k, *m, spec, opts));
  }
  return expected_cost_with(k, ref.c, costs, p, cheapest.c, n_remaining);
}

std::vector<std::int64_t> doubling_grid(std::int64_t n_remaining) {
  std::vector<std::int64_t> ks;
  for (std::int64_t k = 1; k <= n_remaining; k *= 2) ks.push_back(k);
  return ks;
}

bool terminate_profile_all(std::span<const ModelProfile> profiles) {
  const ModelProfile* valid = cheapest_valid(profiles);
  const double valid_cost = valid ? valid->c : std::numeric_limits<double>::infinity();
  double unknown_cost = std::numeric_limits<double>::infinity();
  for (const auto& m : profiles) {
    if (m.status == ModelStatus::Unknown) unknown_cost = std::min(unknown_cost, m.c);
  }
  return valid_cost <= unknown_cost;
}

bool terminate_profile_smart(std::span<const ModelProfile> profiles, const AccuracySpec& spec,
                             std::int64_t n_remaining, const ProbValidOptions& opts) {
  if (terminate_profile_all(profiles)) return true;
  if (n_remaining <= 0) return true;
  const ModelProfile& ref = reference_profile(profiles);
  const ModelProfile* valid = cheapest_valid(profiles);
  const ModelProfile& fallback = valid ? *valid : ref;
  const double stop_now = static_cast<double>(n_remaining) * fallback.c;
  // Terminate iff stop_now <= min_k total, so any cheaper k settles it. The
  // k that settled the previous call on this thread is tried first; the
  // order of evaluation cannot change the answer.
  thread_local std::int64_t last_winner = 0;
  const auto beats = [&](std::int64_t k) {
    return expected_cost(k, profiles, ref, fallback, spec, n_remaining, opts).total < stop_now;
  };
  if (last_winner >= 1 && last_winner <= n_remaining && beats(last_winner)) return false;
  for (std::int64_t k : doubling_grid(n_remaining)) {
    if (k != last_winner && beats(k)) {
      last_winner = k;
      return false;
    }
  }
  return true;
}

std::vector<CostEstimate> expected_cost_curve(std::span<const ModelProfile> profiles,
                                              const AccuracySpec& spec, std::int64_t n_remaining,
                                              const ProbValidOptions& opts) {
  const ModelProfile& ref = reference_profile(profiles);
  const ModelProfile* valid = cheapest_valid(profiles);
  const ModelProfile& fallback = valid ? *valid : ref;
  std::vector<CostEstimate> rows;
  CostEstimate base;
  base.application_cost = static_cast<double>(n_remaining) * fallback.c;
  base.total = base.application_cost;
  rows.push_back(base);
  for (std::int64_t k : doubling_grid(n_remaining)) {
    rows.push_back(expected_cost(k, profiles, ref, fallback, spec, n_remaining, opts));
  }
  return rows;
}

// ---------------------------------------------------------------------------

std::string trace_to_json_line(const TraceRecord& record) {
  nlohmann::ordered_json j;
  j["item_id"] = record.item_id;
  j["reference_output"] = record.reference_output;
  auto models = nlohmann::ordered_json::array();
  for (const auto& m : record.models) {
    nlohmann::ordered_json row;
    row["model"] = m.model;
    row["output"] = m.output;
    row["equivalent"] = m.equivalent;
    row["n"] = m.n;
    row["e"] = m.e;
    row["c"] = m.c;
    row["lower"] = m.lower;
    row["upper"] = m.upper;
    row["status"] = std::string(to_string(m.status));
    models.push_back(std::move(row));
  }
  j["models"] = std::move(models);
  return j.dump();
}

std::vector<std::string> ModelPool::names() const {
  std::vector<std::string> out{reference->model().name};
  for (const auto& c : candidates) out.push_back(c->model().name);
  return out;
}

ModelBackend& ModelPool::backend(const std::string& name) const {
  if (reference->model().name == name) return *reference;
  for (const auto& c : candidates) {
    if (c->model().name == name) return *c;
  }
  throw UnknownModelError("no backend registered for model " + name);
}

ProfileOutcome profile(const ModelPool& pool, std::string_view question,
                       std::span<const TaskItem> items, const AccuracySpec& spec,
                       Termination termination, CostLedger& ledger, const ProfileOptions& opts,
                       const TraceSink& sink) {
  spec.validate();
  if (items.empty()) throw DomainError("profiling requires at least one item");
  if (!pool.reference) throw DomainError("profiling requires a reference backend");

  double mean_tokens = 0.0;
  for (const auto& it : items) mean_tokens += static_cast<double>(it.token_count);
  mean_tokens /= static_cast<double>(items.size());
  const auto initial_cost = [&](const ModelId& m) {
    return mean_tokens / 1000.0 * m.price_per_1k_tokens;
  };

  ProfileOutcome out;
  out.profiles.push_back(
      ModelProfile::reference(pool.reference->model(), initial_cost(pool.reference->model())));
  for (const auto& c : pool.candidates) {
    out.profiles.push_back(ModelProfile::candidate(c->model(), initial_cost(c->model())));
  }

  std::vector<ModelBackend*> backends{pool.reference.get()};
  for (const auto& c : pool.candidates) backends.push_back(c.get());

  for (std::size_t idx = 0; idx < items.size(); ++idx) {
    const TaskItem& item = items[idx];
    const Invocation ref_out = backends[0]->invoke(question, item);
    ledger.charge(out.profiles[0].model.name, ref_out.cost);
    out.profiles[0].record(true, ref_out.cost);
    out.outputs.push_back(ref_out.output);
    out.items_profiled = idx + 1;

    TraceRecord trace;
    trace.item_id = item.item_id;
    trace.reference_output = ref_out.output;
    std::vector<std::size_t> invoked;
    for (std::size_t m = 1; m < out.profiles.size(); ++m) {
      ModelProfile& prof = out.profiles[m];
      if (prof.status != ModelStatus::Unknown) continue;
      const Invocation res = backends[m]->invoke(question, item);
      ledger.charge(prof.model.name, res.cost);
      const bool same = outputs_equivalent(res.output, ref_out.output);
      prof.record(same, res.cost);
      invoked.push_back(m);
      if (sink) {
        TraceEntry entry;
        entry.model = prof.model.name;
        entry.output = res.output;
        entry.equivalent = same;
        trace.models.push_back(std::move(entry));
      }
    }

    const auto intervals = eval_models(out.profiles, spec);

    if (sink) {
      for (std::size_t t = 0; t < invoked.size(); ++t) {
        const ModelProfile& prof = out.profiles[invoked[t]];
        TraceEntry& entry = trace.models[t];
        entry.n = prof.n;
        entry.e = prof.e;
        entry.c = prof.c;
        entry.status = prof.status;
        if (intervals[invoked[t]]) {
          entry.lower = intervals[invoked[t]]->lower;
          entry.upper = intervals[invoked[t]]->upper;
        }
      }
      sink(trace);
    }

    const auto remaining = static_cast<std::int64_t>(items.size() - idx - 1);
    const bool stop = termination == Termination::ProfileAll
                          ? terminate_profile_all(out.profiles)
                          : terminate_profile_smart(out.profiles, spec, remaining, opts.prob);
    if (stop) break;
  }
  return out;
}

}  // namespace cascade
