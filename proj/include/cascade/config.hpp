#pragma once

// Strict JSON configuration for runs and sweeps, plus the profile snapshot
// format consumed by `plan` and `trace-expected-cost`. Unknown fields are
// rejected with their JSON pointer and source line.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "cascade/bench_sim.hpp"
#include "cascade/orchestrator.hpp"

namespace cascade {

struct BackendConfig {
  std::string kind = "simulated";  // simulated | remote | replay
  std::optional<double> accuracy;
  std::string endpoint;
  std::string path = "/v1/chat/completions";
  std::string prompt_template = "{text}";
  std::string fixture;
  std::size_t max_in_flight = 4;
  int max_attempts = 3;
  int timeout_ms = 30000;
};

struct ModelConfig {
  ModelId model;
  BackendConfig backend;
};

struct BenchmarkConfig {
  BenchmarkSpec spec;
  /// Per-benchmark simulated accuracies, overriding the model backends.
  std::map<std::string, double> accuracies;
};

struct CascadeConfig {
  std::vector<ModelConfig> models;
  std::string reference;
  std::vector<double> deltas{0.1};
  double gamma = 0.95;
  std::vector<Variant> variants{Variant::ModelMix};
  std::vector<std::uint64_t> seeds{0};
  std::vector<BenchmarkConfig> benchmarks;
  std::string question = "Classify the input.";
  double grid_step = 0.01;
  std::size_t parallel = 1;
  /// JSONL items {item_id, token_count, payload} for `run`; generated from the
  /// first benchmark when absent.
  std::string items;
  bool ci_trace = false;
  std::filesystem::path base_dir = ".";

  const ModelConfig& model(const std::string& name) const;
  bool all_simulated() const;
};

/// Throws ConfigError with "line N" and the JSON pointer of the offending field.
CascadeConfig parse_config(std::string_view text, const std::filesystem::path& base_dir = ".");
CascadeConfig load_config(const std::filesystem::path& path);

/// Semantic checks (ranges, reference membership, backend fields). Called by
/// parse_config and again after command-line overrides.
void validate_config(const CascadeConfig& config);

nlohmann::ordered_json config_to_json(const CascadeConfig& config);

/// Simulated scenario for one benchmark of a config. Requires all_simulated().
ScenarioSpec scenario_for(const CascadeConfig& config, std::size_t benchmark_index);

/// Backends for a single run. Remote backends read their key from `api_key`.
ModelPool build_pool(const CascadeConfig& config, std::uint64_t seed, const std::string& api_key);

std::vector<TaskItem> load_items(const std::filesystem::path& path);

// Snapshots ------------------------------------------------------------------

struct ProfileSnapshot {
  AccuracySpec spec;
  double profiled_ratio = 0.0;
  std::int64_t n_remaining = 0;
  double grid_step = 0.01;
  std::vector<ModelProfile> profiles;
};

nlohmann::ordered_json snapshot_to_json(const ProfileSnapshot& snapshot);
ProfileSnapshot parse_snapshot(std::string_view text);
ProfileSnapshot load_snapshot(const std::filesystem::path& path);

}  // namespace cascade
