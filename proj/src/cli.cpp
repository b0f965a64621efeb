#include "cascade/cli.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "cascade/bench_sim.hpp"
#include "cascade/config.hpp"
#include "cascade/errors.hpp"
#include "cascade/orchestrator.hpp"

namespace cascade {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<double> delta;
  std::optional<std::string> variant;
  std::optional<std::size_t> parallel;
};

void apply(CascadeConfig& cfg, const Overrides& o) {
  if (o.seed) cfg.seeds = {*o.seed};
  if (o.delta) cfg.deltas = {*o.delta};
  if (o.variant) cfg.variants = {parse_variant(*o.variant)};
  if (o.parallel) cfg.parallel = *o.parallel;
  validate_config(cfg);
}

std::ofstream open_out(const fs::path& dir, const std::string& name) {
  fs::create_directories(dir);
  std::ofstream f(dir / name, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot write " + (dir / name).string());
  return f;
}

void write_ledger_csv(std::ostream& out, const CostLedger& ledger) {
  out << "model,items,cost\n";
  for (const auto& e : ledger.entries()) {
    out << e.model << ',' << e.items << ',' << format_number(e.cost) << '\n';
  }
  out << "total," << "," << format_number(ledger.total()) << '\n';
}

int cmd_run(const fs::path& config_path, const fs::path& out_dir, const Overrides& o,
            std::ostream& out) {
  CascadeConfig cfg = load_config(config_path);
  apply(cfg, o);
  const std::uint64_t seed = cfg.seeds.front();
  RunConfig rc;
  rc.variant = cfg.variants.front();
  rc.spec = AccuracySpec{cfg.deltas.front(), cfg.gamma};
  rc.grid_step = cfg.grid_step;
  rc.parallelism = cfg.parallel;

  std::vector<TaskItem> items;
  if (!cfg.items.empty()) {
    items = load_items(cfg.base_dir / cfg.items);
  } else if (!cfg.benchmarks.empty()) {
    items = generate_benchmark(cfg.benchmarks.front().spec, seed);
  } else {
    throw ConfigError("field /items: a run needs an items file or a benchmark");
  }

  const char* key = std::getenv("CASCADE_REMOTE_KEY");
  const ModelPool pool = build_pool(cfg, seed, key ? key : "");

  auto trace = open_out(out_dir, "trace.jsonl");
  const TraceSink sink = [&](const TraceRecord& rec) { trace << trace_to_json_line(rec) << '\n'; };

  ordered_json echo = config_to_json(cfg);
  echo["run"] = {{"seed", seed},
                 {"delta", rc.spec.delta},
                 {"variant", std::string(to_string(rc.variant))},
                 {"items", items.size()}};

  RunResult result;
  try {
    result = smart_run(rc, pool, cfg.question, items, sink);
  } catch (const RunFailure& f) {
    auto ledger = open_out(out_dir, "ledger.csv");
    write_ledger_csv(ledger, f.ledger());
    throw;
  }

  std::optional<bool> violation;
  std::optional<double> agreement;
  if (cfg.items.empty() && cfg.all_simulated()) {
    agreement = realized_agreement(scenario_for(cfg, 0), seed, result.outputs);
    violation = *agreement < 1.0 - rc.spec.delta;
  }
  ordered_json log = run_log(echo, result, "trace.jsonl", violation);
  if (agreement) log["agreement"] = *agreement;
  open_out(out_dir, "run.json") << log.dump(2) << '\n';
  auto ledger = open_out(out_dir, "ledger.csv");
  write_ledger_csv(ledger, result.ledger);
  auto outputs = open_out(out_dir, "outputs.jsonl");
  for (const auto& o2 : result.outputs) {
    outputs << ordered_json{{"item_id", o2.item_id}, {"output", o2.output}, {"model", o2.processed_by}}.dump()
            << '\n';
  }
  if (!result.profiles.empty()) {
    ProfileSnapshot snap;
    snap.spec = rc.spec;
    snap.profiled_ratio = result.profiled_ratio;
    snap.n_remaining = static_cast<std::int64_t>(items.size() - result.items_profiled);
    snap.grid_step = rc.grid_step;
    snap.profiles = result.profiles;
    open_out(out_dir, "snapshot.json") << snapshot_to_json(snap).dump(2) << '\n';
  }
  out << to_string(rc.variant) << ": " << items.size() << " items, " << result.items_profiled
      << " profiled, total cost " << format_number(result.total_cost);
  if (violation) out << (*violation ? ", VIOLATION" : ", within tolerance");
  out << '\n';
  return 0;
}

int cmd_sweep(const fs::path& config_path, const fs::path& out_dir, const Overrides& o,
              bool ci_trace, std::ostream& out) {
  CascadeConfig cfg = load_config(config_path);
  apply(cfg, o);
  if (cfg.benchmarks.empty()) throw ConfigError("field /benchmarks: a sweep needs at least one benchmark");
  SweepOptions opts;
  opts.parallel = cfg.parallel;
  opts.collect_ci_trace = ci_trace || cfg.ci_trace;
  std::vector<SweepCell> cells;
  for (std::size_t b = 0; b < cfg.benchmarks.size(); ++b) {
    SweepResult r = run_sweep(scenario_for(cfg, b), opts);
    std::ranges::move(r.cells, std::back_inserter(cells));
  }
  auto sweep = open_out(out_dir, "sweep.csv");
  write_sweep_csv(sweep, cells);
  auto breakdown = open_out(out_dir, "breakdown.csv");
  write_breakdown_csv(breakdown, cells);
  const auto rows = summarize(cells);
  auto summary = open_out(out_dir, "summary.csv");
  write_summary_csv(summary, rows);
  if (opts.collect_ci_trace) {
    auto ci = open_out(out_dir, "ci_trace.csv");
    write_ci_trace_csv(ci, cells);
  }
  std::size_t failed = 0, violations = 0;
  for (const auto& c : cells) {
    failed += c.failed ? 1 : 0;
    violations += c.violation ? 1 : 0;
  }
  out << cells.size() << " runs, " << violations << " violations, " << failed << " failed\n";
  return failed == 0 ? 0 : 1;
}

int cmd_trace(const fs::path& snapshot_path, const fs::path& out_dir, std::optional<double> delta,
              std::optional<std::int64_t> n_remaining, std::ostream& out) {
  ProfileSnapshot snap = load_snapshot(snapshot_path);
  if (delta) snap.spec.delta = *delta;
  if (n_remaining) snap.n_remaining = *n_remaining;
  snap.spec.validate();
  const auto rows = expected_cost_trace(snap.profiles, snap.spec, snap.n_remaining);
  if (!out_dir.empty()) {
    auto f = open_out(out_dir, "expected_cost.csv");
    write_expected_cost_csv(f, rows);
  }
  write_expected_cost_csv(out, rows);
  const bool stop = terminate_profile_smart(snap.profiles, snap.spec, snap.n_remaining);
  out << "# smart termination: " << (stop ? "stop" : "continue") << '\n';
  return 0;
}

int cmd_plan(const fs::path& snapshot_path, const fs::path& out_dir, std::optional<double> delta,
             std::ostream& out) {
  ProfileSnapshot snap = load_snapshot(snapshot_path);
  if (delta) snap.spec.delta = *delta;
  snap.spec.validate();
  const MixProgram program = build_mix_program(
      snap.profiles, ConfidenceGrid::from(snap.spec.gamma, snap.grid_step), snap.spec,
      snap.profiled_ratio);
  const std::string json = plan_to_json(solve_mix_exact(program));
  if (!out_dir.empty()) open_out(out_dir, "plan.json") << json << '\n';
  out << json << '\n';
  return 0;
}

int cmd_validate(const fs::path& config_path, std::ostream& out) {
  const CascadeConfig cfg = load_config(config_path);
  out << "ok: " << cfg.models.size() << " models, reference " << cfg.reference << ", "
      << cfg.benchmarks.size() << " benchmarks, " << cfg.variants.size() << " variants x "
      << cfg.deltas.size() << " deltas x " << cfg.seeds.size() << " seeds\n";
  return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Cost-aware model cascade with accuracy guarantees"};
  app.require_subcommand(1);

  fs::path config_path, out_dir, snapshot_path;
  Overrides o;
  bool ci_trace = false;
  std::optional<std::int64_t> n_remaining;

  const auto add_overrides = [&](CLI::App* cmd) {
    cmd->add_option("--seed", o.seed, "Override the seed list with one seed");
    cmd->add_option("--delta", o.delta, "Override the delta list with one value");
    cmd->add_option("--variant", o.variant,
                    "ProfileAll, ProfileSmart, ModelMix or ReferenceOnly");
    cmd->add_option("--parallel", o.parallel, "Concurrent calls (run) or cells (sweep)");
  };

  auto* run = app.add_subcommand("run", "Process one item set and write the run log");
  run->add_option("--config", config_path)->required();
  run->add_option("--out", out_dir)->required();
  add_overrides(run);

  auto* sweep = app.add_subcommand("sweep", "Simulated sweep over variants, deltas and seeds");
  sweep->add_option("--config", config_path)->required();
  sweep->add_option("--out", out_dir)->required();
  sweep->add_flag("--ci-trace", ci_trace, "Also write ci_trace.csv");
  add_overrides(sweep);

  auto* trace = app.add_subcommand("trace-expected-cost", "Expected cost of profiling k more items");
  trace->add_option("--snapshot", snapshot_path)->required();
  trace->add_option("--out", out_dir);
  trace->add_option("--delta", o.delta);
  trace->add_option("--n-remaining", n_remaining);

  auto* plan = app.add_subcommand("plan", "Solve the model-mix program for a saved snapshot");
  plan->add_option("--snapshot", snapshot_path)->required();
  plan->add_option("--out", out_dir);
  plan->add_option("--delta", o.delta);

  auto* validate = app.add_subcommand("validate-config", "Parse and check a configuration");
  validate->add_option("--config", config_path)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*run) return cmd_run(config_path, out_dir, o, out);
    if (*sweep) return cmd_sweep(config_path, out_dir, o, ci_trace, out);
    if (*trace) return cmd_trace(snapshot_path, out_dir, o.delta, n_remaining, out);
    if (*plan) return cmd_plan(snapshot_path, out_dir, o.delta, out);
    if (*validate) return cmd_validate(config_path, out);
  } catch (const ConfigError& ex) {
    err << "config error: " << ex.what() << '\n';
    return 2;
  } catch (const DomainError& ex) {
    err << "invalid input: " << ex.what() << '\n';
    return 2;
  } catch (const std::exception& ex) {
    err << "error: " << ex.what() << '\n';
    return 1;
  }
  return 2;
}

}  // namespace cascade
