#pragma once

// Synthetic benchmarks and seeded sweeps over (variant, delta, seed).
//
// Agreement draws are keyed on (benchmark, seed, model) only, so every
// variant and delta in a sweep sees the same simulated world for a given
// seed. Comparisons between variants are therefore paired.

#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "cascade/orchestrator.hpp"

namespace cascade {

struct BenchmarkSpec {
  std::string name;
  std::uint64_t instance_count = 1;
  double mean_tokens = 1.0;
  std::uint32_t label_count = 2;
  /// Token-count standard deviation as a fraction of the mean. Zero spreads
  /// tokens so the population total is exactly floor(N * mean).
  double token_dispersion = 0.3;

  /// Throws DomainError on an empty benchmark or non-positive mean.
  void validate() const;
};

std::vector<TaskItem> generate_benchmark(const BenchmarkSpec& spec, std::uint64_t seed);

struct CandidateSetup {
  ModelId model;
  double accuracy = 1.0;
};

struct ScenarioSpec {
  std::string name;
  BenchmarkSpec benchmark;
  ModelId reference;
  std::vector<CandidateSetup> candidates;
  std::vector<Variant> variants;
  std::vector<double> deltas;
  double gamma = 0.95;
  std::vector<std::uint64_t> seeds;
  double grid_step = 0.01;
  std::string question = "Classify the input.";

  void validate() const;
};

/// Namespace for one model's agreement draws in one simulated world.
std::uint64_t simulation_namespace(const std::string& benchmark, std::uint64_t seed,
                                   const std::string& model);

ModelPool simulated_pool(const ScenarioSpec& scenario, std::uint64_t seed);

// Presets ---------------------------------------------------------------------

namespace presets {

ModelId gpt4();
ModelId gpt35_instruct();
ModelId gpt35_1106();
ModelId davinci();
ModelId babbage();

/// IMDB, SMS-Spam and AgNews shapes; instance counts divided by `scale_divisor`.
std::vector<BenchmarkSpec> benchmarks(std::uint64_t scale_divisor = 1);
BenchmarkSpec benchmark(const std::string& name, std::uint64_t scale_divisor = 1);

/// delta = 0.02, 0.04, ..., 0.20.
std::vector<double> delta_grid();
std::vector<std::uint64_t> seeds(std::size_t count = 10);

/// Per-benchmark scenario with all four cheaper models. Their accuracies are
/// illustrative, not measured values.
ScenarioSpec benchmark_scenario(const std::string& benchmark, std::uint64_t scale_divisor = 1);

/// The ten accuracy combinations over {0.88, 0.90, 0.92} on the IMDB shape at
/// delta = 0.1, for instruct, 1106 and babbage.
ScenarioSpec accuracy_grid_scenario(int id, std::uint64_t scale_divisor = 1);

}  // namespace presets

// Sweeps ----------------------------------------------------------------------

struct CiTraceRow {
  std::size_t items_profiled = 0;
  std::string model;
  double lower = 0.0;
  double upper = 1.0;
};

struct SweepCell {
  std::string benchmark;
  Variant variant = Variant::ModelMix;
  double delta = 0.0;
  std::uint64_t seed = 0;
  bool failed = false;
  std::string error;
  double total_cost = 0.0;
  double baseline_cost = 0.0;  // reference-only cost of the same items
  double savings = 0.0;
  double agreement = 0.0;  // realized, from the full agreement table
  bool violation = false;
  std::size_t items_profiled = 0;
  std::vector<CostLedger::Entry> breakdown;
  std::optional<MixPlan> plan;
  std::vector<CiTraceRow> ci_trace;
};

struct SweepOptions {
  std::size_t parallel = 1;  // concurrent cells
  bool collect_ci_trace = false;
};

struct SweepResult {
  std::vector<SweepCell> cells;  // scenario order: variant, delta, seed
};

/// One cell. Backend failures mark the cell failed instead of throwing.
SweepCell run_cell(const ScenarioSpec& scenario, Variant variant, double delta,
                   std::uint64_t seed, std::span<const TaskItem> items, bool collect_ci_trace);

SweepResult run_sweep(const ScenarioSpec& scenario, const SweepOptions& opts = {});

/// Fraction of outputs that agree with the reference under the simulated
/// agreement table. Outputs must be in item-id order.
double realized_agreement(const ScenarioSpec& scenario, std::uint64_t seed,
                          std::span<const ItemOutput> outputs);

double reference_only_cost(std::span<const TaskItem> items, const ModelId& reference);

struct SummaryRow {
  std::string benchmark;
  Variant variant = Variant::ModelMix;
  double delta = 0.0;
  std::size_t runs = 0;
  std::size_t failed = 0;
  std::size_t violations = 0;
  double mean_cost = 0.0;
  double min_cost = 0.0;
  double mean_savings = 0.0;
  double min_savings = 0.0;
};

/// One row per (benchmark, variant, delta) over successful cells.
std::vector<SummaryRow> summarize(std::span<const SweepCell> cells);

void write_sweep_csv(std::ostream& out, std::span<const SweepCell> cells);
void write_breakdown_csv(std::ostream& out, std::span<const SweepCell> cells);
void write_ci_trace_csv(std::ostream& out, std::span<const SweepCell> cells);
void write_summary_csv(std::ostream& out, std::span<const SummaryRow> rows);
void write_expected_cost_csv(std::ostream& out, std::span<const CostEstimate> rows);

/// Fixed-format number used in every CSV.
std::string format_number(double v);

/// Expected-cost rows for k = 0 (stop now) and every doubling k.
std::vector<CostEstimate> expected_cost_trace(std::span<const ModelProfile> snapshot,
                                              const AccuracySpec& spec, std::int64_t n_remaining,
                                              const ProbValidOptions& opts = {});

// Analysis --------------------------------------------------------------------

/// Pr(X >= k) for X ~ Binom(n, p): p-value of a one-sided exact test.
double binomial_test_greater(std::int64_t k, std::int64_t n, double p);

/// One-sided paired t-test p-value for mean(a - b) < 0.
double paired_t_test_less(std::span<const double> a, std::span<const double> b);

/// Spearman rank correlation with average ranks for ties.
double spearman(std::span<const double> x, std::span<const double> y);

}  // namespace cascade
