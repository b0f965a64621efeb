#pragma once

// Uniform invocation surface over models: deterministic simulation,
// record/replay fixtures and an OpenAI-compatible remote client.

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <ostream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace cascade {

struct ModelId {
  std::string name;
  double price_per_1k_tokens = 0.0;
};

struct TaskItem {
  std::uint64_t item_id = 0;
  std::uint64_t token_count = 1;
  std::string payload;
};

struct Invocation {
  std::string output;
  double cost = 0.0;
};

inline double billed_cost(std::uint64_t tokens, double price_per_1k_tokens) {
  return static_cast<double>(tokens) / 1000.0 * price_per_1k_tokens;
}

/// Trim surrounding whitespace and ASCII case-fold, then compare.
bool outputs_equivalent(std::string_view lhs, std::string_view rhs);

class ModelBackend {
 public:
  virtual ~ModelBackend() = default;
  virtual const ModelId& model() const = 0;
  /// Must be safe to call concurrently for distinct items.
  virtual Invocation invoke(std::string_view question, const TaskItem& item) = 0;
};

// ---------------------------------------------------------------------------

struct SimModelSpec {
  ModelId model;
  double true_accuracy = 1.0;
  std::uint64_t seed_namespace = 0;
};

/// Label every simulated backend reports when it agrees with the reference.
std::string simulated_reference_label(std::uint64_t item_id, std::uint32_t label_count);

inline constexpr std::string_view kDisagreeLabel = "__DISAGREE__";

/// Agreement with the reference is a pure function of (namespace, item_id,
/// accuracy), so call order and concurrency never change results.
class SimulatedBackend final : public ModelBackend {
 public:
  explicit SimulatedBackend(SimModelSpec spec, std::uint32_t label_count = 2);

  const ModelId& model() const override { return spec_.model; }
  const SimModelSpec& spec() const { return spec_; }
  std::uint64_t threshold() const { return threshold_; }
  Invocation invoke(std::string_view question, const TaskItem& item) override;

 private:
  SimModelSpec spec_;
  std::uint32_t label_count_;
  std::uint64_t threshold_;
};

// ---------------------------------------------------------------------------

/// JSON-lines fixture: {"model", "item_id", "output", "cost"} per line.
class ReplayFixture {
 public:
  struct Record {
    std::string output;
    double cost = 0.0;
  };

  static ReplayFixture load(const std::filesystem::path& path);
  static ReplayFixture parse(std::string_view jsonl);

  void add(const std::string& model, std::uint64_t item_id, Record record);
  const Record& lookup(const std::string& model, std::uint64_t item_id) const;
  std::size_t size() const { return records_.size(); }

 private:
  std::map<std::pair<std::string, std::uint64_t>, Record> records_;
};

class ReplayBackend final : public ModelBackend {
 public:
  ReplayBackend(ModelId model, std::shared_ptr<const ReplayFixture> fixture);
  const ModelId& model() const override { return model_; }
  Invocation invoke(std::string_view question, const TaskItem& item) override;

 private:
  ModelId model_;
  std::shared_ptr<const ReplayFixture> fixture_;
};

/// Forwards to an inner backend and appends one fixture line per call.
class RecordingBackend final : public ModelBackend {
 public:
  RecordingBackend(std::shared_ptr<ModelBackend> inner, std::shared_ptr<std::ostream> sink);
  const ModelId& model() const override { return inner_->model(); }
  Invocation invoke(std::string_view question, const TaskItem& item) override;

 private:
  std::shared_ptr<ModelBackend> inner_;
  std::shared_ptr<std::ostream> sink_;
  std::mutex mu_;
};

// ---------------------------------------------------------------------------

/// Caps concurrent requests; shared by every backend pointed at one endpoint.
class InFlightLimiter {
 public:
  explicit InFlightLimiter(std::size_t limit) : available_(limit == 0 ? 1 : limit) {}
  void acquire();
  void release();

 private:
  std::mutex mu_;
  std::condition_variable cv_;
  std::size_t available_;
};

struct RemoteConfig {
  std::string endpoint;  // scheme://host[:port]
  std::string path = "/v1/chat/completions";
  std::string api_key;
  /// User message; "{text}" is replaced by the item payload.
  std::string prompt_template = "{text}";
  int max_attempts = 3;
  std::chrono::milliseconds initial_backoff{200};
  std::chrono::milliseconds max_backoff{2000};
  std::chrono::milliseconds timeout{30000};
  std::shared_ptr<InFlightLimiter> limiter;
};

class RemoteBackend final : public ModelBackend {
 public:
  RemoteBackend(ModelId model, RemoteConfig config);
  const ModelId& model() const override { return model_; }
  Invocation invoke(std::string_view question, const TaskItem& item) override;

  /// Request body sent for one item (exposed for tests).
  std::string request_body(std::string_view question, const TaskItem& item) const;

 private:
  ModelId model_;
  RemoteConfig config_;
};

// ---------------------------------------------------------------------------

/// Per-model spend, in registration order.
class CostLedger {
 public:
  struct Entry {
    std::string model;
    std::uint64_t items = 0;
    double cost = 0.0;
  };

  CostLedger() = default;
  explicit CostLedger(const std::vector<std::string>& models);

  void charge(const std::string& model, double cost);
  double total() const;
  const std::vector<Entry>& entries() const { return entries_; }
  const Entry* find(const std::string& model) const;

 private:
  std::vector<Entry> entries_;
};

}  // namespace cascade
