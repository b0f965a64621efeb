#include "cascade/bench_sim.hpp"

#include <algorithm>
#include <array>
#include <limits>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <map>
#include <memory>
#include <numbers>
#include <numeric>
#include <thread>

#include "cascade/errors.hpp"
#include "cascade/simd.hpp"
#include "cascade/stats.hpp"

namespace cascade {

void BenchmarkSpec::validate() const {
  if (instance_count < 1) throw DomainError("benchmark " + name + " needs at least one instance");
  if (!(mean_tokens > 0.0)) throw DomainError("benchmark " + name + " needs a positive token mean");
  if (!(token_dispersion >= 0.0)) throw DomainError("token dispersion must be non-negative");
  if (label_count < 1) throw DomainError("benchmark " + name + " needs at least one label");
}

namespace {

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

constexpr double kTwoPow53 = 9007199254740992.0;

}  // namespace

std::vector<TaskItem> generate_benchmark(const BenchmarkSpec& spec, std::uint64_t seed) {
  spec.validate();
  std::vector<TaskItem> items(spec.instance_count);
  if (spec.token_dispersion == 0.0) {
    // Integer spreading on a micro-token scale: item i gets
    // floor((i+1) m) - floor(i m), so prefixes sum to floor(N m) exactly.
    const auto micro = static_cast<std::uint64_t>(std::llround(spec.mean_tokens * 1e6));
    for (std::uint64_t i = 0; i < spec.instance_count; ++i) {
      const std::uint64_t t = ((i + 1) * micro) / 1000000 - (i * micro) / 1000000;
      items[i] = TaskItem{i, std::max<std::uint64_t>(t, 1), {}};
    }
    return items;
  }
  const std::uint64_t ns = simd::splitmix64(seed ^ fnv1a(spec.name) ^ fnv1a("tokens"));
  const double sd = spec.token_dispersion * spec.mean_tokens;
  for (std::uint64_t i = 0; i < spec.instance_count; ++i) {
    const double u1 = (static_cast<double>(simd::draw_bits(ns, 2 * i)) + 1.0) / kTwoPow53;
    const double u2 = static_cast<double>(simd::draw_bits(ns, 2 * i + 1)) / kTwoPow53;
    const double z = std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    const double t = std::round(spec.mean_tokens + sd * z);
    items[i] = TaskItem{i, t < 1.0 ? 1 : static_cast<std::uint64_t>(t), {}};
  }
  return items;
}

void ScenarioSpec::validate() const {
  benchmark.validate();
  if (reference.name.empty()) throw ConfigError("scenario " + name + " has no reference model");
  for (const auto& c : candidates) {
    if (!(c.accuracy >= 0.0 && c.accuracy <= 1.0)) {
      throw DomainError("accuracy of " + c.model.name + " must lie in [0, 1]");
    }
    if (c.model.name == reference.name) {
      throw ConfigError("candidate " + c.model.name + " duplicates the reference");
    }
  }
  for (double d : deltas) {
    if (!(d > 0.0 && d < 1.0)) throw DomainError("delta values must lie in (0, 1)");
  }
  if (!(gamma > 0.0 && gamma < 1.0)) throw DomainError("gamma must lie in (0, 1)");
  if (!(grid_step > 0.0)) throw DomainError("grid_step must be positive");
}

std::uint64_t simulation_namespace(const std::string& benchmark, std::uint64_t seed,
                                   const std::string& model) {
  std::uint64_t h = simd::splitmix64(fnv1a(benchmark));
  h = simd::splitmix64(h ^ seed);
  return simd::splitmix64(h ^ fnv1a(model));
}

ModelPool simulated_pool(const ScenarioSpec& scenario, std::uint64_t seed) {
  const auto& bench = scenario.benchmark;
  ModelPool pool;
  pool.reference = std::make_shared<SimulatedBackend>(
      SimModelSpec{scenario.reference, 1.0,
                   simulation_namespace(bench.name, seed, scenario.reference.name)},
      bench.label_count);
  for (const auto& c : scenario.candidates) {
    pool.candidates.push_back(std::make_shared<SimulatedBackend>(
        SimModelSpec{c.model, c.accuracy, simulation_namespace(bench.name, seed, c.model.name)},
        bench.label_count));
  }
  return pool;
}

// ---------------------------------------------------------------------------

namespace presets {

ModelId gpt4() { return {"gpt-4-0613", 0.03}; }
ModelId gpt35_instruct() { return {"gpt-3.5-turbo-instruct", 0.0015}; }
ModelId gpt35_1106() { return {"gpt-3.5-turbo-1106", 0.001}; }
ModelId davinci() { return {"davinci-002", 0.002}; }
ModelId babbage() { return {"babbage-002", 0.0004}; }

std::vector<BenchmarkSpec> benchmarks(std::uint64_t scale_divisor) {
  if (scale_divisor < 1) throw DomainError("scale divisor must be at least 1");
  const auto scaled = [&](std::uint64_t n) { return std::max<std::uint64_t>(1, n / scale_divisor); };
  return {
      BenchmarkSpec{"IMDB", scaled(50000), 293.7, 2},
      BenchmarkSpec{"SMS-Spam", scaled(5574), 22.9, 2},
      BenchmarkSpec{"AgNews", scaled(127600), 51.2, 4},
  };
}

BenchmarkSpec benchmark(const std::string& name, std::uint64_t scale_divisor) {
  for (auto& b : benchmarks(scale_divisor)) {
    if (b.name == name) return b;
  }
  throw ConfigError("unknown benchmark preset '" + name + "'");
}

std::vector<double> delta_grid() {
  std::vector<double> d;
  for (int i = 1; i <= 10; ++i) d.push_back(i / 50.0);
  return d;
}

std::vector<std::uint64_t> seeds(std::size_t count) {
  std::vector<std::uint64_t> s(count);
  std::iota(s.begin(), s.end(), std::uint64_t{0});
  return s;
}

ScenarioSpec benchmark_scenario(const std::string& name, std::uint64_t scale_divisor) {
  // instruct, 1106, davinci, babbage
  static const std::map<std::string, std::array<double, 4>> accuracies = {
      {"IMDB", {0.965, 0.955, 0.89, 0.80}},
      {"SMS-Spam", {0.96, 0.93, 0.86, 0.75}},
      {"AgNews", {0.94, 0.905, 0.86, 0.72}},
  };
  const auto it = accuracies.find(name);
  if (it == accuracies.end()) throw ConfigError("unknown benchmark preset '" + name + "'");
  ScenarioSpec s;
  s.name = name;
  s.benchmark = benchmark(name, scale_divisor);
  s.reference = gpt4();
  s.candidates = {{gpt35_instruct(), it->second[0]},
                  {gpt35_1106(), it->second[1]},
                  {davinci(), it->second[2]},
                  {babbage(), it->second[3]}};
  s.variants = {Variant::ModelMix};
  s.deltas = delta_grid();
  s.seeds = seeds();
  return s;
}

ScenarioSpec accuracy_grid_scenario(int id, std::uint64_t scale_divisor) {
  // instruct, 1106, babbage
  static constexpr std::array<std::array<double, 3>, 10> grid = {{
      {0.88, 0.88, 0.88},
      {0.90, 0.88, 0.88},
      {0.90, 0.90, 0.88},
      {0.90, 0.90, 0.90},
      {0.92, 0.88, 0.88},
      {0.92, 0.90, 0.88},
      {0.92, 0.90, 0.90},
      {0.92, 0.92, 0.88},
      {0.92, 0.92, 0.90},
      {0.92, 0.92, 0.92},
  }};
  if (id < 0 || id >= static_cast<int>(grid.size())) {
    throw ConfigError("accuracy grid scenario id must be 0..9");
  }
  const auto& acc = grid[static_cast<std::size_t>(id)];
  ScenarioSpec s;
  s.name = "ID" + std::to_string(id);
  s.benchmark = benchmark("IMDB", scale_divisor);
  s.reference = gpt4();
  s.candidates = {{gpt35_instruct(), acc[0]}, {gpt35_1106(), acc[1]}, {babbage(), acc[2]}};
  s.variants = {Variant::ReferenceOnly, Variant::ProfileAll, Variant::ProfileSmart,
                Variant::ModelMix};
  s.deltas = {0.1};
  s.seeds = seeds();
  return s;
}

}  // namespace presets

// ---------------------------------------------------------------------------

double reference_only_cost(std::span<const TaskItem> items, const ModelId& reference) {
  double total = 0.0;
  for (const auto& it : items) total += billed_cost(it.token_count, reference.price_per_1k_tokens);
  return total;
}

double realized_agreement(const ScenarioSpec& scenario, std::uint64_t seed,
                          std::span<const ItemOutput> outputs) {
  if (outputs.empty()) return 1.0;
  std::map<std::string, std::uint64_t> thresholds;
  for (const auto& c : scenario.candidates) {
    thresholds[c.model.name] = simd::probability_threshold(c.accuracy);
  }
  std::uint64_t agreed = 0;
  std::size_t i = 0;
  while (i < outputs.size()) {
    // Maximal run of consecutive ids served by one model.
    std::size_t j = i + 1;
    while (j < outputs.size() && outputs[j].processed_by == outputs[i].processed_by &&
           outputs[j].item_id == outputs[j - 1].item_id + 1) {
      ++j;
    }
    const std::string& model = outputs[i].processed_by;
    if (model == scenario.reference.name) {
      agreed += j - i;
    } else {
      const auto th = thresholds.find(model);
      if (th == thresholds.end()) throw UnknownModelError("output from unknown model " + model);
      const std::uint64_t ns = simulation_namespace(scenario.benchmark.name, seed, model);
      agreed += simd::count_agreements(ns, th->second, outputs[i].item_id, j - i);
    }
    i = j;
  }
  return static_cast<double>(agreed) / static_cast<double>(outputs.size());
}

SweepCell run_cell(const ScenarioSpec& scenario, Variant variant, double delta,
                   std::uint64_t seed, std::span<const TaskItem> items, bool collect_ci_trace) {
  SweepCell cell;
  cell.benchmark = scenario.benchmark.name;
  cell.variant = variant;
  cell.delta = delta;
  cell.seed = seed;
  cell.baseline_cost = reference_only_cost(items, scenario.reference);

  RunConfig cfg;
  cfg.variant = variant;
  cfg.spec = AccuracySpec{delta, scenario.gamma};
  cfg.grid_step = scenario.grid_step;
  TraceSink sink;
  std::size_t profiled = 0;
  if (collect_ci_trace) {
    sink = [&](const TraceRecord& rec) {
      ++profiled;
      for (const auto& m : rec.models) {
        cell.ci_trace.push_back(CiTraceRow{profiled, m.model, m.lower, m.upper});
      }
    };
  }

  try {
    const ModelPool pool = simulated_pool(scenario, seed);
    RunResult res = smart_run(cfg, pool, scenario.question, items, sink);
    cell.total_cost = res.total_cost;
    cell.items_profiled = res.items_profiled;
    cell.breakdown = res.ledger.entries();
    cell.plan = std::move(res.plan);
    cell.savings = cell.total_cost > 0.0 ? cell.baseline_cost / cell.total_cost : 0.0;
    cell.agreement = realized_agreement(scenario, seed, res.outputs);
    cell.violation = cell.agreement < 1.0 - delta;
  } catch (const RunFailure& f) {
    cell.failed = true;
    cell.error = f.what();
    cell.breakdown = f.ledger().entries();
    cell.total_cost = f.ledger().total();
  } catch (const std::exception& ex) {
    cell.failed = true;
    cell.error = ex.what();
  }
  return cell;
}

SweepResult run_sweep(const ScenarioSpec& scenario, const SweepOptions& opts) {
  scenario.validate();
  std::map<std::uint64_t, std::shared_ptr<const std::vector<TaskItem>>> items;
  for (std::uint64_t seed : scenario.seeds) {
    if (!items.contains(seed)) {
      items[seed] = std::make_shared<const std::vector<TaskItem>>(
          generate_benchmark(scenario.benchmark, seed));
    }
  }

  struct Job {
    Variant variant;
    double delta;
    std::uint64_t seed;
  };
  std::vector<Job> jobs;
  for (Variant v : scenario.variants) {
    for (double d : scenario.deltas) {
      for (std::uint64_t s : scenario.seeds) jobs.push_back(Job{v, d, s});
    }
  }

  SweepResult out;
  out.cells.resize(jobs.size());
  const auto run = [&](std::size_t i) {
    const Job& job = jobs[i];
    out.cells[i] = run_cell(scenario, job.variant, job.delta, job.seed, *items.at(job.seed),
                            opts.collect_ci_trace);
  };
  const std::size_t workers = std::clamp<std::size_t>(opts.parallel, 1, std::max<std::size_t>(jobs.size(), 1));
  if (workers == 1) {
    for (std::size_t i = 0; i < jobs.size(); ++i) run(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> threads;
    for (std::size_t w = 0; w < workers; ++w) {
      threads.emplace_back([&] {
        for (std::size_t i = next++; i < jobs.size(); i = next++) run(i);
      });
    }
    for (auto& t : threads) t.join();
  }
  return out;
}

std::vector<SummaryRow> summarize(std::span<const SweepCell> cells) {
  std::vector<SummaryRow> rows;
  const auto find_row = [&](const SweepCell& c) -> SummaryRow& {
    for (auto& r : rows) {
      if (r.benchmark == c.benchmark && r.variant == c.variant && r.delta == c.delta) return r;
    }
    SummaryRow r;
    r.benchmark = c.benchmark;
    r.variant = c.variant;
    r.delta = c.delta;
    r.min_cost = std::numeric_limits<double>::infinity();
    r.min_savings = std::numeric_limits<double>::infinity();
    rows.push_back(r);
    return rows.back();
  };
  for (const auto& c : cells) {
    SummaryRow& r = find_row(c);
    if (c.failed) {
      ++r.failed;
      continue;
    }
    ++r.runs;
    r.violations += c.violation ? 1 : 0;
    r.mean_cost += c.total_cost;
    r.mean_savings += c.savings;
    r.min_cost = std::min(r.min_cost, c.total_cost);
    r.min_savings = std::min(r.min_savings, c.savings);
  }
  for (auto& r : rows) {
    if (r.runs > 0) {
      r.mean_cost /= static_cast<double>(r.runs);
      r.mean_savings /= static_cast<double>(r.runs);
    } else {
      r.min_cost = 0.0;
      r.min_savings = 0.0;
    }
  }
  return rows;
}

std::string format_number(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

namespace {

std::string cell_key(const SweepCell& c) {
  return c.benchmark + "," + std::string(to_string(c.variant)) + "," + format_number(c.delta) +
         "," + std::to_string(c.seed);
}

}  // namespace

void write_sweep_csv(std::ostream& out, std::span<const SweepCell> cells) {
  out << "benchmark,variant,delta,seed,total_cost,savings,agreement,violation,status\n";
  for (const auto& c : cells) {
    out << cell_key(c) << ',' << format_number(c.total_cost) << ',' << format_number(c.savings)
        << ',' << format_number(c.agreement) << ',' << (c.violation ? 1 : 0) << ','
        << (c.failed ? "failed" : "ok") << '\n';
  }
}

void write_breakdown_csv(std::ostream& out, std::span<const SweepCell> cells) {
  out << "benchmark,variant,delta,seed,model,items,cost\n";
  for (const auto& c : cells) {
    for (const auto& e : c.breakdown) {
      out << cell_key(c) << ',' << e.model << ',' << e.items << ',' << format_number(e.cost)
          << '\n';
    }
  }
}

void write_ci_trace_csv(std::ostream& out, std::span<const SweepCell> cells) {
  out << "benchmark,variant,delta,seed,items_profiled,model,lower,upper\n";
  for (const auto& c : cells) {
    for (const auto& r : c.ci_trace) {
      out << cell_key(c) << ',' << r.items_profiled << ',' << r.model << ','
          << format_number(r.lower) << ',' << format_number(r.upper) << '\n';
    }
  }
}

void write_summary_csv(std::ostream& out, std::span<const SummaryRow> rows) {
  out << "benchmark,variant,delta,runs,failed,violations,mean_cost,min_cost,mean_savings,"
         "min_savings\n";
  for (const auto& r : rows) {
    out << r.benchmark << ',' << to_string(r.variant) << ',' << format_number(r.delta) << ','
        << r.runs << ',' << r.failed << ',' << r.violations << ',' << format_number(r.mean_cost)
        << ',' << format_number(r.min_cost) << ',' << format_number(r.mean_savings) << ','
        << format_number(r.min_savings) << '\n';
  }
}

void write_expected_cost_csv(std::ostream& out, std::span<const CostEstimate> rows) {
  out << "k,profiling_cost,application_cost,total\n";
  for (const auto& r : rows) {
    out << r.k << ',' << format_number(r.profiling_cost) << ','
        << format_number(r.application_cost) << ',' << format_number(r.total) << '\n';
  }
}

std::vector<CostEstimate> expected_cost_trace(std::span<const ModelProfile> snapshot,
                                              const AccuracySpec& spec, std::int64_t n_remaining,
                                              const ProbValidOptions& opts) {
  return expected_cost_curve(snapshot, spec, n_remaining, opts);
}

// ---------------------------------------------------------------------------

double binomial_test_greater(std::int64_t k, std::int64_t n, double p) {
  if (k <= 0) return 1.0;
  if (k > n) return 0.0;
  return stats::binom_tail_at_least(n, p, k);
}

double paired_t_test_less(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size() || a.size() < 2) {
    throw DomainError("paired t-test needs two equal-length samples of size >= 2");
  }
  const auto n = static_cast<double>(a.size());
  std::vector<double> d(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
  const double mean = std::accumulate(d.begin(), d.end(), 0.0) / n;
  double ss = 0.0;
  for (double x : d) ss += (x - mean) * (x - mean);
  const double sd = std::sqrt(ss / (n - 1.0));
  if (sd == 0.0) {
    if (mean < 0.0) return 0.0;
    return mean == 0.0 ? 0.5 : 1.0;
  }
  return stats::students_t_cdf(mean / (sd / std::sqrt(n)), n - 1.0);
}

namespace {

std::vector<double> average_ranks(std::span<const double> v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::ranges::stable_sort(idx, [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double r = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t t = i; t <= j; ++t) ranks[idx[t]] = r;
    i = j + 1;
  }
  return ranks;
}

}  // namespace

double spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) {
    throw DomainError("spearman needs two equal-length samples of size >= 2");
  }
  const auto rx = average_ranks(x);
  const auto ry = average_ranks(y);
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace cascade
