#pragma once

// End-to-end run: profile, then process the remaining items with the
// cheapest valid model or a cost-optimal mix. Every billed call lands in the
// run's ledger, including calls made before a failure.

#include <cstdint>
#include <exception>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "cascade/backends.hpp"
#include "cascade/mix_planner.hpp"
#include "cascade/profiler.hpp"

namespace cascade {

enum class Variant { ProfileAll, ProfileSmart, ModelMix, ReferenceOnly };

std::string_view to_string(Variant v);
/// Accepts the names printed by to_string. Throws ConfigError otherwise.
Variant parse_variant(std::string_view name);

struct RunConfig {
  Variant variant = Variant::ModelMix;
  AccuracySpec spec;
  double grid_step = 0.01;
  /// Concurrent application-phase calls per model partition.
  std::size_t parallelism = 1;
  ProfileOptions profiling;
};

struct ItemOutput {
  std::uint64_t item_id = 0;
  std::string output;
  std::string processed_by;
};

struct RunResult {
  std::vector<ItemOutput> outputs;  // input order
  CostLedger ledger;
  double total_cost = 0.0;
  std::size_t items_profiled = 0;
  double profiled_ratio = 0.0;
  std::vector<ModelProfile> profiles;  // empty for ReferenceOnly
  std::optional<MixPlan> plan;
  std::vector<PartitionSlice> partition;  // offsets into the remaining items
  std::optional<std::string> single_model;
};

/// A run aborted by a backend error. Carries everything billed before it.
class RunFailure : public std::runtime_error {
 public:
  RunFailure(const std::string& what, CostLedger ledger, std::exception_ptr cause)
      : std::runtime_error(what), ledger_(std::move(ledger)), cause_(std::move(cause)) {}

  const CostLedger& ledger() const { return ledger_; }
  std::exception_ptr cause() const { return cause_; }

 private:
  CostLedger ledger_;
  std::exception_ptr cause_;
};

RunResult smart_run(const RunConfig& config, const ModelPool& pool, std::string_view question,
                    std::span<const TaskItem> items, const TraceSink& sink = {});

/// Cheapest Valid profile processes every item (ties by name).
std::vector<ItemOutput> apply_single(const ModelPool& pool, std::span<const ModelProfile> profiles,
                                     std::string_view question, std::span<const TaskItem> items,
                                     CostLedger& ledger, std::size_t parallelism = 1);

struct MixApplication {
  MixPlan plan;
  std::vector<PartitionSlice> partition;
  std::vector<ItemOutput> outputs;
};

/// Solves the mix program for the remaining items and runs each partition.
/// An empty item set makes no calls and returns an empty plan.
MixApplication apply_mix(const ModelPool& pool, std::span<const ModelProfile> profiles,
                         std::string_view question, std::span<const TaskItem> items,
                         const AccuracySpec& spec, double r, double grid_step, CostLedger& ledger,
                         std::size_t parallelism = 1);

/// Invokes one backend on every item, up to `parallelism` calls at a time.
/// Costs are charged in item order after all calls finish; on failure the
/// successful calls are charged and the first error is rethrown.
std::vector<Invocation> invoke_batch(ModelBackend& backend, std::string_view question,
                                     std::span<const TaskItem> items, std::size_t parallelism,
                                     CostLedger& ledger);

/// 64-bit FNV-1a over (item_id, output, processed_by) records.
std::uint64_t outputs_digest(std::span<const ItemOutput> outputs);

nlohmann::ordered_json profiles_to_json(std::span<const ModelProfile> profiles);
nlohmann::ordered_json ledger_to_json(const CostLedger& ledger);

/// Run log document. `config` is echoed verbatim; `trace_ref` names the
/// per-item profiling timeline file, if one was written.
nlohmann::ordered_json run_log(const nlohmann::ordered_json& config, const RunResult& result,
                               const std::string& trace_ref, std::optional<bool> violation);

}  // namespace cascade
