#pragma once

// Profiling phase: joint evaluation of candidate models against the
// reference, Clopper-Pearson status evaluation, and the two termination
// criteria (cheapest-valid found, and expected-cost based early stop).

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cascade/backends.hpp"
#include "cascade/stats.hpp"

namespace cascade {

enum class ModelStatus { Unknown, Valid, Invalid };

std::string_view to_string(ModelStatus status);

/// User contract: agree with the reference on >= 1 - delta of outputs, at confidence gamma.
struct AccuracySpec {
  double delta = 0.1;
  double gamma = 0.95;

  double threshold() const { return 1.0 - delta; }
  /// Throws DomainError unless 0 < delta < 1 and 0 < gamma < 1.
  void validate() const;
};

struct ModelProfile {
  ModelId model;
  bool is_reference = false;
  std::int64_t n = 0;  // items processed
  std::int64_t e = 0;  // items agreeing with the reference
  double c = 0.0;      // average billed cost per item
  ModelStatus status = ModelStatus::Unknown;
  double billed = 0.0;  // total billed while profiling

  static ModelProfile reference(ModelId model, double initial_unit_cost);
  static ModelProfile candidate(ModelId model, double initial_unit_cost);

  /// Tally one profiled item and refresh the running unit cost.
  void record(bool equivalent, double cost);
};

struct CostEstimate {
  std::int64_t k = 0;
  double profiling_cost = 0.0;
  double application_cost = 0.0;
  double total = 0.0;
};

struct ProbValidOptions {
  std::size_t nodes = stats::kDefaultQuadratureNodes;
  /// Divide by the Gaussian mass inside [0, 1] (off: integrate the density as-is).
  bool renormalize = false;
};

/// Status update for every Unknown profile. Returns the interval computed for
/// each profile that was evaluated (nullopt for the ones left untouched).
std::vector<std::optional<stats::BinomInterval>> eval_models(std::span<ModelProfile> profiles,
                                                             const AccuracySpec& spec);

/// Smallest number of agreements among k more items that certifies the
/// profile as Valid; nullopt when even k agreements are not enough.
/// Throws DomainError for k < 1.
std::optional<std::int64_t> min_conforming_count(std::int64_t k, const ModelProfile& profile,
                                                 const AccuracySpec& spec);

/// Probability that the profile is Valid after k more items, integrating the
/// binomial tail against a Gaussian model of the true accuracy.
double prob_valid(std::int64_t k, const ModelProfile& profile, const AccuracySpec& spec,
                  const ProbValidOptions& opts = {});

/// Expected-cost arithmetic given explicit validation probabilities.
/// unknown_costs / p are ordered by ascending unit cost.
CostEstimate expected_cost_with(std::int64_t k, double reference_cost,
                                 std::span<const double> unknown_costs,
                                 std::span<const double> p, double fallback_cost,
                                 std::int64_t n_remaining);

/// Expected total cost of profiling exactly k more items, then applying.
CostEstimate expected_cost(std::int64_t k, std::span<const ModelProfile> profiles,
                           const ModelProfile& ref, const ModelProfile& cheapest_valid,
                           const AccuracySpec& spec, std::int64_t n_remaining,
                           const ProbValidOptions& opts = {});

/// Unknown profiles ordered by unit cost, ties by name.
std::vector<const ModelProfile*> unknown_by_cost(std::span<const ModelProfile> profiles);

/// Cheapest Valid profile, ties by name; nullptr if none is Valid.
const ModelProfile* cheapest_valid(std::span<const ModelProfile> profiles);

const ModelProfile& reference_profile(std::span<const ModelProfile> profiles);

/// k = 1, 2, 4, ... while k <= n_remaining.
std::vector<std::int64_t> doubling_grid(std::int64_t n_remaining);

/// Stop once a Valid model is no more expensive than every Unknown one.
bool terminate_profile_all(std::span<const ModelProfile> profiles);

/// terminate_profile_all, or stopping now is expected to be no more costly
/// than profiling any k more items.
bool terminate_profile_smart(std::span<const ModelProfile> profiles, const AccuracySpec& spec,
                             std::int64_t n_remaining, const ProbValidOptions& opts = {});

/// Baseline (k = 0) followed by every doubling k.
std::vector<CostEstimate> expected_cost_curve(std::span<const ModelProfile> profiles,
                                              const AccuracySpec& spec, std::int64_t n_remaining,
                                              const ProbValidOptions& opts = {});

// ---------------------------------------------------------------------------

enum class Termination { ProfileAll, ProfileSmart };

struct TraceEntry {
  std::string model;
  std::string output;
  bool equivalent = false;
  std::int64_t n = 0;
  std::int64_t e = 0;
  double c = 0.0;
  double lower = 0.0;
  double upper = 1.0;
  ModelStatus status = ModelStatus::Unknown;
};

/// One profiled item.
struct TraceRecord {
  std::uint64_t item_id = 0;
  std::string reference_output;
  std::vector<TraceEntry> models;
};

std::string trace_to_json_line(const TraceRecord& record);

using TraceSink = std::function<void(const TraceRecord&)>;

/// Reference model first, then candidates.
struct ModelPool {
  std::shared_ptr<ModelBackend> reference;
  std::vector<std::shared_ptr<ModelBackend>> candidates;

  std::vector<std::string> names() const;
  ModelBackend& backend(const std::string& name) const;
};

struct ProfileOutcome {
  std::vector<ModelProfile> profiles;  // reference first
  std::vector<std::string> outputs;    // reference output per profiled item
  std::size_t items_profiled = 0;
};

struct ProfileOptions {
  ProbValidOptions prob;
};

/// Profile items in order until the termination criterion fires or items
/// run out. Every billed call is charged to `ledger` before any error
/// propagates.
ProfileOutcome profile(const ModelPool& pool, std::string_view question,
                       std::span<const TaskItem> items, const AccuracySpec& spec,
                       Termination termination, CostLedger& ledger,
                       const ProfileOptions& opts = {}, const TraceSink& sink = {});

}  // namespace cascade
