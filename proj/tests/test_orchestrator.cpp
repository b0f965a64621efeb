#include <gtest/gtest.h>


#include "cascade/errors.hpp"
#include "cascade/orchestrator.hpp"

using namespace cascade;

namespace {

std::vector<TaskItem> items(std::size_t n, std::uint64_t tokens = 100) {
  std::vector<TaskItem> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(TaskItem{i, tokens + i % 7, ""});
  return out;
}

ModelPool sim_pool(std::uint64_t seed, std::vector<std::pair<double, double>> price_acc) {
  ModelPool pool;
  pool.reference = std::make_shared<SimulatedBackend>(SimModelSpec{{"ref", 0.03}, 1.0, seed}, 2);
  int i = 0;
  for (auto [price, acc] : price_acc) {
    pool.candidates.push_back(std::make_shared<SimulatedBackend>(
        SimModelSpec{{"m" + std::to_string(i), price}, acc, seed * 131 + ++i}, 2));
  }
  return pool;
}

ModelProfile valid(const std::string& name, double c) {
  ModelProfile p = ModelProfile::candidate({name, c}, c);
  p.status = ModelStatus::Valid;
  return p;
}

double sum_billed(const std::vector<TaskItem>& its, double price) {
  double s = 0.0;
  for (const auto& it : its) s += billed_cost(it.token_count, price);
  return s;
}

void expect_complete(const RunResult& r, std::size_t n) {
  ASSERT_EQ(r.outputs.size(), n);
  for (std::size_t i = 0; i < n; ++i) EXPECT_EQ(r.outputs[i].item_id, i);
}

}  // namespace

TEST(Variant, NamesRoundTrip) {
  for (Variant v : {Variant::ProfileAll, Variant::ProfileSmart, Variant::ModelMix,
                    Variant::ReferenceOnly}) {
    EXPECT_EQ(parse_variant(to_string(v)), v);
  }
  EXPECT_THROW(parse_variant("modelmix"), ConfigError);
}

TEST(SmartRun, ReferenceOnlyBillsEveryItemAtReferencePrice) {
  const auto its = items(500);
  ModelPool pool = sim_pool(1, {{0.001, 0.9}});
  RunConfig cfg;
  cfg.variant = Variant::ReferenceOnly;
  const auto r = smart_run(cfg, pool, "q", its);
  expect_complete(r, its.size());
  EXPECT_NEAR(r.total_cost, sum_billed(its, 0.03), 1e-9);
  EXPECT_EQ(r.ledger.find("m0")->items, 0u);
  EXPECT_EQ(r.single_model, "ref");
  EXPECT_TRUE(r.profiles.empty());
}

TEST(SmartRun, EveryVariantCoversItemsAndConservesCost) {
  const auto its = items(3000);
  ModelPool pool = sim_pool(2, {{0.0015, 0.97}, {0.001, 0.93}, {0.0004, 0.8}});
  for (Variant v : {Variant::ProfileAll, Variant::ProfileSmart, Variant::ModelMix,
                    Variant::ReferenceOnly}) {
    RunConfig cfg;
    cfg.variant = v;
    const auto r = smart_run(cfg, pool, "q", its);
    expect_complete(r, its.size());
    EXPECT_DOUBLE_EQ(r.total_cost, r.ledger.total());
    double by_model = 0.0;
    for (const auto& o : r.outputs) {
      by_model += billed_cost(its[o.item_id].token_count, pool.backend(o.processed_by).model().price_per_1k_tokens);
    }
    double profiling_extra = 0.0;
    for (const auto& p : r.profiles) {
      if (!p.is_reference) profiling_extra += p.billed;
    }
    EXPECT_NEAR(r.total_cost, by_model + profiling_extra, 1e-9) << to_string(v);
    for (std::size_t i = 0; i < r.items_profiled; ++i) EXPECT_EQ(r.outputs[i].processed_by, "ref");
  }
}

TEST(SmartRun, ProfiledRatioAndPlan) {
  const auto its = items(2000);
  ModelPool pool = sim_pool(3, {{0.001, 0.95}, {0.0004, 0.85}});
  RunConfig cfg;
  cfg.variant = Variant::ModelMix;
  const auto r = smart_run(cfg, pool, "q", its);
  EXPECT_DOUBLE_EQ(r.profiled_ratio, static_cast<double>(r.items_profiled) / its.size());
  ASSERT_TRUE(r.plan.has_value());
  std::size_t covered = 0;
  for (const auto& s : r.partition) covered += s.size();
  EXPECT_EQ(covered, its.size() - r.items_profiled);
  EXPECT_FALSE(r.single_model.has_value());
}

TEST(SmartRun, CheapPerfectModelApproachesPriceRatio) {
  // 0.03 / 0.0004 = 75; profiling overhead amortizes as the workload grows.
  double prev = 0.0;
  for (std::size_t n : {2000u, 20000u, 100000u}) {
    std::vector<TaskItem> flat;
    for (std::size_t i = 0; i < n; ++i) flat.push_back(TaskItem{i, 300, ""});
    ModelPool pool = sim_pool(4, {{0.0004, 1.0}, {0.0015, 1.0}});
    RunConfig cfg;
    cfg.variant = Variant::ModelMix;
    const auto r = smart_run(cfg, pool, "q", flat);
    const double ratio = sum_billed(flat, 0.03) / r.total_cost;
    EXPECT_GT(ratio, prev);
    EXPECT_LT(ratio, 75.0);
    prev = ratio;
  }
  EXPECT_GT(prev, 70.0);
}

TEST(SmartRun, RejectsEmptyInputs) {
  ModelPool pool = sim_pool(5, {});
  EXPECT_THROW(smart_run(RunConfig{}, pool, "q", {}), DomainError);
  RunConfig bad;
  bad.spec.delta = 0.0;
  EXPECT_THROW(smart_run(bad, pool, "q", items(3)), DomainError);
}

TEST(SmartRun, FailureCarriesPartialLedger) {
  auto fixture = std::make_shared<ReplayFixture>();
  for (std::uint64_t i = 0; i < 5; ++i) fixture->add("ref", i, {"a", 1.0});
  ModelPool pool;
  pool.reference = std::make_shared<ReplayBackend>(ModelId{"ref", 1.0}, fixture);
  RunConfig cfg;
  cfg.variant = Variant::ReferenceOnly;
  try {
    smart_run(cfg, pool, "q", items(8));
    FAIL() << "expected RunFailure";
  } catch (const RunFailure& f) {
    EXPECT_DOUBLE_EQ(f.ledger().total(), 5.0);
    EXPECT_THROW(std::rethrow_exception(f.cause()), ReplayMissError);
  }
}

TEST(SmartRun, ParallelMatchesSerial) {
  const auto its = items(5000);
  ModelPool pool = sim_pool(6, {{0.001, 0.96}, {0.0004, 0.8}});
  for (Variant v : {Variant::ProfileSmart, Variant::ModelMix, Variant::ReferenceOnly}) {
    RunConfig cfg;
    cfg.variant = v;
    const auto serial = smart_run(cfg, pool, "q", its);
    cfg.parallelism = 8;
    const auto parallel = smart_run(cfg, pool, "q", its);
    EXPECT_EQ(outputs_digest(serial.outputs), outputs_digest(parallel.outputs));
    EXPECT_EQ(serial.total_cost, parallel.total_cost) << to_string(v);
  }
}

TEST(ApplySingle, PicksCheapestValidWithNameTieBreak) {
  ModelPool pool = sim_pool(7, {{0.001, 0.9}, {0.001, 0.9}, {0.0015, 0.9}});
  std::vector<ModelProfile> ps{ModelProfile::reference({"ref", 0.03}, 3.0), valid("m2", 0.15),
                               valid("m1", 0.1), valid("m0", 0.1)};
  CostLedger ledger(pool.names());
  const auto out = apply_single(pool, ps, "q", items(10), ledger);
  for (const auto& o : out) EXPECT_EQ(o.processed_by, "m0");
  EXPECT_EQ(ledger.find("m0")->items, 10u);

  std::vector<ModelProfile> only_ref{ModelProfile::reference({"ref", 0.03}, 3.0)};
  for (const auto& o : apply_single(pool, only_ref, "q", items(4), ledger)) EXPECT_EQ(o.processed_by, "ref");
}

TEST(ApplyMix, ReferenceOnlyPlan) {
  ModelPool pool = sim_pool(8, {});
  std::vector<ModelProfile> ps{ModelProfile::reference({"ref", 0.03}, 3.0)};
  CostLedger ledger(pool.names());
  const auto its = items(50);
  const auto app = apply_mix(pool, ps, "q", its, {0.1, 0.95}, 0.0, 0.01, ledger);
  EXPECT_EQ(app.plan.ratio("ref"), 1.0);
  EXPECT_EQ(app.outputs.size(), 50u);
  EXPECT_NEAR(ledger.total(), sum_billed(its, 0.03), 1e-12);
}

TEST(ApplyMix, BilledCostTracksObjective) {
  std::vector<TaskItem> its;
  for (std::uint64_t i = 0; i < 997; ++i) its.push_back(TaskItem{i, 100, ""});
  ModelPool pool = sim_pool(9, {{0.001, 0.9}});
  ModelProfile ref = ModelProfile::reference({"ref", 0.03}, 0.003);
  ModelProfile a = ModelProfile::candidate({"m0", 0.001}, 0.0001);
  a.n = 300;
  a.e = 270;
  std::vector<ModelProfile> ps{ref, a};
  CostLedger ledger(pool.names());
  const auto app = apply_mix(pool, ps, "q", its, {0.1, 0.95}, 0.0, 0.01, ledger);
  ASSERT_GT(app.plan.ratio("m0"), 0.0);
  ASSERT_GT(app.plan.ratio("ref"), 0.0);
  EXPECT_LT(std::fabs(ledger.total() - app.plan.objective * its.size()), 0.003);
  const auto expected = partition_by_ratios(its.size(), app.plan);
  for (std::size_t i = 0; i < expected.size(); ++i) {
    const auto* e = ledger.find(expected[i].name);
    EXPECT_EQ(e ? e->items : 0u, expected[i].size());
  }
}

TEST(ApplyMix, EmptyRemainderMakesNoCalls) {
  ModelPool pool = sim_pool(10, {{0.001, 0.9}});
  std::vector<ModelProfile> ps{ModelProfile::reference({"ref", 0.03}, 3.0)};
  CostLedger ledger(pool.names());
  const auto app = apply_mix(pool, ps, "q", {}, {0.1, 0.95}, 1.0, 0.01, ledger);
  EXPECT_TRUE(app.outputs.empty());
  EXPECT_EQ(ledger.total(), 0.0);
}

TEST(InvokeBatch, ChargesSuccessesBeforeRethrowing) {
  auto fixture = std::make_shared<ReplayFixture>();
  for (std::uint64_t i = 0; i < 100; ++i) {
    if (i != 60) fixture->add("m", i, {"x", 0.5});
  }
  ReplayBackend backend({"m", 1.0}, fixture);
  for (std::size_t par : {1u, 4u}) {
    CostLedger ledger;
    EXPECT_THROW(invoke_batch(backend, "q", items(100), par, ledger), ReplayMissError);
    const auto* e = ledger.find("m");
    ASSERT_NE(e, nullptr);
    EXPECT_GE(e->items, par == 1 ? 60u : 1u);
    EXPECT_LE(e->items, 99u);
    EXPECT_DOUBLE_EQ(e->cost, 0.5 * e->items);
  }
}

TEST(RunLog, RecordsDigestAndStructure) {
  ModelPool pool = sim_pool(11, {{0.001, 0.95}});
  RunConfig cfg;
  const auto r = smart_run(cfg, pool, "q", items(400));
  const auto log = run_log({{"name", "x"}}, r, "trace.jsonl", false);
  for (const char* key : {"config", "items", "items_profiled", "profiled_ratio", "profiles", "timeline",
                          "plan", "single_model", "ledger", "total_cost", "outputs_digest", "violation"}) {
    EXPECT_TRUE(log.contains(key)) << key;
  }
  EXPECT_EQ(log["outputs_digest"].get<std::string>().size(), 16u);
  EXPECT_EQ(log["violation"], false);
  EXPECT_EQ(log["timeline"], "trace.jsonl");

  auto changed = r.outputs;
  changed[3].output += "!";
  EXPECT_NE(outputs_digest(changed), outputs_digest(r.outputs));
  EXPECT_EQ(outputs_digest({}), 0xcbf29ce484222325ULL);
}
