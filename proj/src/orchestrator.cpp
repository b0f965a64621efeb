#include "cascade/orchestrator.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <mutex>
#include <thread>

#include "cascade/errors.hpp"

namespace cascade {

using nlohmann::ordered_json;

std::string_view to_string(Variant v) {
  switch (v) {
    case Variant::ProfileAll: return "ProfileAll";
    case Variant::ProfileSmart: return "ProfileSmart";
    case Variant::ModelMix: return "ModelMix";
    case Variant::ReferenceOnly: return "ReferenceOnly";
  }
  return "?";
}

Variant parse_variant(std::string_view name) {
  for (Variant v : {Variant::ProfileAll, Variant::ProfileSmart, Variant::ModelMix,
                    Variant::ReferenceOnly}) {
    if (to_string(v) == name) return v;
  }
  throw ConfigError("unknown variant '" + std::string(name) +
                    "' (expected ProfileAll, ProfileSmart, ModelMix or ReferenceOnly)");
}

std::vector<Invocation> invoke_batch(ModelBackend& backend, std::string_view question,
                                     std::span<const TaskItem> items, std::size_t parallelism,
                                     CostLedger& ledger) {
  const std::string& name = backend.model().name;
  std::vector<Invocation> results(items.size());
  std::vector<char> done(items.size(), 0);
  std::exception_ptr error;

  const std::size_t workers = std::clamp<std::size_t>(parallelism, 1, std::max<std::size_t>(items.size(), 1));
  if (workers == 1) {
    for (std::size_t i = 0; i < items.size(); ++i) {
      try {
        results[i] = backend.invoke(question, items[i]);
        done[i] = 1;
      } catch (...) {
        error = std::current_exception();
        break;
      }
    }
  } else {
    std::atomic<std::size_t> next{0};
    std::atomic<bool> failed{false};
    std::mutex error_mu;
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < items.size() && !failed; i = next++) {
          try {
            results[i] = backend.invoke(question, items[i]);
            done[i] = 1;
          } catch (...) {
            std::lock_guard lock(error_mu);
            if (!error) error = std::current_exception();
            failed = true;
          }
        }
      });
    }
    for (auto& t : pool) t.join();
  }

  for (std::size_t i = 0; i < items.size(); ++i) {
    if (done[i]) ledger.charge(name, results[i].cost);
  }
  if (error) std::rethrow_exception(error);
  return results;
}

namespace {

void append_outputs(std::vector<ItemOutput>& out, std::span<const TaskItem> items,
                    const std::vector<Invocation>& calls, const std::string& model) {
  for (std::size_t i = 0; i < items.size(); ++i) {
    out.push_back(ItemOutput{items[i].item_id, calls[i].output, model});
  }
}

}  // namespace

std::vector<ItemOutput> apply_single(const ModelPool& pool, std::span<const ModelProfile> profiles,
                                     std::string_view question, std::span<const TaskItem> items,
                                     CostLedger& ledger, std::size_t parallelism) {
  const ModelProfile* chosen = cheapest_valid(profiles);
  if (chosen == nullptr) throw DomainError("no Valid profile; the reference should always be Valid");
  std::vector<ItemOutput> out;
  if (items.empty()) return out;
  ModelBackend& backend = pool.backend(chosen->model.name);
  append_outputs(out, items, invoke_batch(backend, question, items, parallelism, ledger),
                 chosen->model.name);
  return out;
}

MixApplication apply_mix(const ModelPool& pool, std::span<const ModelProfile> profiles,
                         std::string_view question, std::span<const TaskItem> items,
                         const AccuracySpec& spec, double r, double grid_step, CostLedger& ledger,
                         std::size_t parallelism) {
  MixApplication app;
  if (items.empty()) return app;
  const MixProgram program =
      build_mix_program(profiles, ConfidenceGrid::from(spec.gamma, grid_step), spec, r);
  app.plan = solve_mix_exact(program);
  app.partition = partition_by_ratios(items.size(), app.plan);
  for (const auto& slice : app.partition) {
    if (slice.size() == 0) continue;
    const auto part = items.subspan(slice.begin, slice.size());
    append_outputs(app.outputs, part,
                   invoke_batch(pool.backend(slice.name), question, part, parallelism, ledger),
                   slice.name);
  }
  return app;
}

RunResult smart_run(const RunConfig& config, const ModelPool& pool, std::string_view question,
                    std::span<const TaskItem> items, const TraceSink& sink) {
  config.spec.validate();
  if (items.empty()) throw DomainError("a run needs at least one item");
  if (!pool.reference) throw DomainError("a run needs a reference backend");

  RunResult result;
  result.ledger = CostLedger(pool.names());
  const std::string& ref_name = pool.reference->model().name;
  try {
    if (config.variant == Variant::ReferenceOnly) {
      append_outputs(result.outputs, items,
                     invoke_batch(*pool.reference, question, items, config.parallelism,
                                  result.ledger),
                     ref_name);
      result.single_model = ref_name;
    } else {
      const Termination term = config.variant == Variant::ProfileAll ? Termination::ProfileAll
                                                                      : Termination::ProfileSmart;
      ProfileOutcome prof =
          profile(pool, question, items, config.spec, term, result.ledger, config.profiling, sink);
      result.items_profiled = prof.items_profiled;
      result.profiled_ratio =
          static_cast<double>(prof.items_profiled) / static_cast<double>(items.size());
      for (std::size_t i = 0; i < prof.items_profiled; ++i) {
        result.outputs.push_back(ItemOutput{items[i].item_id, prof.outputs[i], ref_name});
      }
      result.profiles = std::move(prof.profiles);

      const auto rest = items.subspan(result.items_profiled);
      std::vector<ItemOutput> applied;
      if (config.variant == Variant::ModelMix) {
        MixApplication app = apply_mix(pool, result.profiles, question, rest, config.spec,
                                       result.profiled_ratio, config.grid_step, result.ledger,
                                       config.parallelism);
        if (!rest.empty()) {
          result.plan = std::move(app.plan);
          result.partition = std::move(app.partition);
        }
        applied = std::move(app.outputs);
      } else {
        result.single_model = cheapest_valid(result.profiles)->model.name;
        applied = apply_single(pool, result.profiles, question, rest, result.ledger,
                               config.parallelism);
      }
      std::ranges::move(applied, std::back_inserter(result.outputs));
    }
  } catch (const std::exception& ex) {
    throw RunFailure(ex.what(), result.ledger, std::current_exception());
  }
  result.total_cost = result.ledger.total();
  return result;
}

std::uint64_t outputs_digest(std::span<const ItemOutput> outputs) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  const auto mix = [&h](std::string_view s) {
    for (unsigned char c : s) {
      h ^= c;
      h *= 0x100000001b3ULL;
    }
  };
  for (const auto& o : outputs) {
    mix(std::to_string(o.item_id));
    mix("\t");
    mix(o.output);
    mix("\t");
    mix(o.processed_by);
    mix("\n");
  }
  return h;
}

ordered_json profiles_to_json(std::span<const ModelProfile> profiles) {
  ordered_json arr = ordered_json::array();
  for (const auto& p : profiles) {
    arr.push_back({{"model", p.model.name},
                   {"reference", p.is_reference},
                   {"n", p.n},
                   {"e", p.e},
                   {"unit_cost", p.c},
                   {"status", std::string(to_string(p.status))},
                   {"billed", p.billed}});
  }
  return arr;
}

ordered_json ledger_to_json(const CostLedger& ledger) {
  ordered_json arr = ordered_json::array();
  for (const auto& e : ledger.entries()) {
    arr.push_back({{"model", e.model}, {"items", e.items}, {"cost", e.cost}});
  }
  return arr;
}

ordered_json run_log(const ordered_json& config, const RunResult& result,
                     const std::string& trace_ref, std::optional<bool> violation) {
  ordered_json j;
  j["config"] = config;
  j["items"] = result.outputs.size();
  j["items_profiled"] = result.items_profiled;
  j["profiled_ratio"] = result.profiled_ratio;
  j["profiles"] = profiles_to_json(result.profiles);
  j["timeline"] = trace_ref.empty() ? ordered_json(nullptr) : ordered_json(trace_ref);
  if (result.plan) {
    j["plan"] = ordered_json::parse(plan_to_json(*result.plan));
    ordered_json parts = ordered_json::array();
    for (const auto& s : result.partition) {
      parts.push_back({{"model", s.name}, {"begin", s.begin}, {"end", s.end}});
    }
    j["partition"] = std::move(parts);
  } else {
    j["plan"] = nullptr;
  }
  j["single_model"] = result.single_model ? ordered_json(*result.single_model) : ordered_json(nullptr);
  j["ledger"] = ledger_to_json(result.ledger);
  j["total_cost"] = result.total_cost;
  char digest[17];
  std::snprintf(digest, sizeof digest, "%016llx",
                static_cast<unsigned long long>(outputs_digest(result.outputs)));
  j["outputs_digest"] = digest;
  j["violation"] = violation ? ordered_json(*violation) : ordered_json(nullptr);
  return j;
}

}  // namespace cascade
