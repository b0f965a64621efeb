#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include <nlohmann/json.hpp>

#include "cascade/errors.hpp"
#include "cascade/mix_planner.hpp"
#include "oracles.hpp"

using namespace cascade;

namespace {

MixProgram two_model_example() {
  MixProgram prog;
  prog.grid.levels = {0.95, 1.0};
  prog.models = {MixCandidate{"ref", true, 0.03, {1.0, 1.0}},
                 MixCandidate{"A", false, 0.001, {0.85, 0.0}}};
  prog.alpha = 0.9;
  prog.gamma = 0.95;
  return prog;
}

ModelProfile profiled(const std::string& name, std::int64_t n, std::int64_t e, double c) {
  ModelProfile p = ModelProfile::candidate({name, c}, c);
  p.n = n;
  p.e = e;
  p.c = c;
  return p;
}

std::vector<ModelProfile> random_profiles(std::mt19937_64& rng, int candidates) {
  std::uniform_real_distribution<> acc(0.55, 1.0);
  std::vector<ModelProfile> ps{ModelProfile::reference({"ref", 0.03}, 0.01 + 0.02 * acc(rng))};
  for (int i = 0; i < candidates; ++i) {
    const std::int64_t n = 5 + rng() % 400;
    const double a = acc(rng);
    std::binomial_distribution<std::int64_t> draws(n, a);
    ps.push_back(profiled("m" + std::to_string(i), n, draws(rng), 0.0002 + 0.01 * acc(rng) * acc(rng)));
  }
  return ps;
}

double brute_force(const MixProgram& prog, int grid_resolution = 0) {
  std::vector<std::vector<double>> lower;
  std::vector<double> costs;
  for (const auto& m : prog.models) {
    lower.push_back(m.lower_bounds);
    costs.push_back(m.unit_cost);
  }
  return oracle::mix_brute_force(lower, prog.grid.levels, costs, prog.alpha, prog.gamma,
                                 grid_resolution);
}

MixPlan plan_with(std::vector<std::pair<double, double>> ratio_lower) {
  MixPlan plan;
  char name = 'A';
  for (auto [x, l] : ratio_lower) {
    MixAssignment a;
    a.name = std::string(1, name++);
    a.ratio = x;
    a.level = 0.95;
    a.lower_bound = l;
    plan.entries.push_back(a);
  }
  return plan;
}

}  // namespace

TEST(ConfidenceGrid, SixLevelsFromNinetyFive) {
  const auto g = ConfidenceGrid::from(0.95, 0.01);
  ASSERT_EQ(g.levels.size(), 6u);
  EXPECT_DOUBLE_EQ(g.levels[0], 0.95);
  EXPECT_DOUBLE_EQ(g.levels[4], 0.99);
  EXPECT_EQ(g.levels[5], 1.0);
  EXPECT_EQ(ConfidenceGrid::from(0.9, 0.05).levels.size(), 3u);
  EXPECT_THROW(ConfidenceGrid::from(1.0, 0.01), DomainError);
  EXPECT_THROW(ConfidenceGrid::from(0.9, 0.0), DomainError);
}

TEST(RefinedAlpha, ClampsAndRejects) {
  EXPECT_DOUBLE_EQ(refined_alpha(0.1, 0.0), 0.9);
  EXPECT_DOUBLE_EQ(refined_alpha(0.1, 0.5), 0.8);
  EXPECT_EQ(refined_alpha(0.1, 0.95), 0.0);
  EXPECT_THROW(refined_alpha(0.1, 1.0), DomainError);
  EXPECT_THROW(refined_alpha(0.1, -0.1), DomainError);
}

TEST(BuildProgram, BoundsPerLevel) {
  std::vector<ModelProfile> ps{ModelProfile::reference({"ref", 0.03}, 0.03),
                               profiled("a", 100, 95, 0.001), profiled("fresh", 0, 0, 0.001)};
  const auto prog = build_mix_program(ps, ConfidenceGrid::from(0.95), {0.1, 0.95}, 0.0);
  ASSERT_EQ(prog.models.size(), 3u);
  for (double l : prog.models[0].lower_bounds) EXPECT_EQ(l, 1.0);
  EXPECT_NEAR(prog.models[1].lower_bounds[0], 0.8871650888945372, 1e-9);
  for (std::size_t j = 1; j < 5; ++j) {
    EXPECT_LT(prog.models[1].lower_bounds[j], prog.models[1].lower_bounds[j - 1]);
  }
  EXPECT_EQ(prog.models[1].lower_bounds[5], 0.0);
  for (double l : prog.models[2].lower_bounds) EXPECT_EQ(l, 0.0);
  EXPECT_EQ(prog.terms.size(), 18u);
  EXPECT_DOUBLE_EQ(prog.alpha, 0.9);
}

TEST(Solve, TwoModelVertex) {
  const auto prog = two_model_example();
  const auto plan = solve_mix_exact(prog);
  EXPECT_NEAR(plan.ratio("A"), 2.0 / 3.0, 1e-12);
  EXPECT_NEAR(plan.ratio("ref"), 1.0 / 3.0, 1e-12);
  EXPECT_NEAR(plan.objective, 0.03 / 3.0 + 0.002 / 3.0, 1e-15);
  EXPECT_TRUE(plan_is_feasible(plan, prog));
  EXPECT_EQ(plan.entries[1].level, 0.95);
  EXPECT_EQ(plan.entries[0].level, 1.0);
}

TEST(Solve, ReferenceOnlyPool) {
  MixProgram prog = two_model_example();
  prog.models.pop_back();
  const auto plan = solve_mix_exact(prog);
  EXPECT_EQ(plan.ratio("ref"), 1.0);
  EXPECT_DOUBLE_EQ(plan.objective, 0.03);
}

TEST(Solve, SufficientCheapModelTakesEverything) {
  MixProgram prog = two_model_example();
  prog.models[1].lower_bounds = {0.93, 0.0};
  const auto plan = solve_mix_exact(prog);
  EXPECT_EQ(plan.ratio("A"), 1.0);
  EXPECT_EQ(plan.ratio("ref"), 0.0);
  EXPECT_FALSE(plan.entries[0].level.has_value());
}

TEST(Solve, ZeroBoundsLeaveOnlyTheSlack) {
  // A zero-bound model contributes nothing to accuracy but may still absorb
  // the 1 - alpha share the reference over-delivers.
  MixProgram prog = two_model_example();
  prog.models[1].lower_bounds = {0.0, 0.0};
  const auto plan = solve_mix_exact(prog);
  EXPECT_NEAR(plan.ratio("ref"), 0.9, 1e-12);
  EXPECT_EQ(plan.entries[1].level, 1.0);
  EXPECT_TRUE(plan_is_feasible(plan, prog));
  prog.alpha = 1.0;
  EXPECT_EQ(solve_mix_exact(prog).ratio("ref"), 1.0);
}

TEST(Solve, ZeroAlphaPicksCheapestModel) {
  MixProgram prog = two_model_example();
  prog.alpha = 0.0;
  const auto plan = solve_mix_exact(prog);
  EXPECT_EQ(plan.ratio("A"), 1.0);
  EXPECT_TRUE(plan_is_feasible(plan, prog));
}

TEST(Solve, BudgetLimitsLevelSpending) {
  // Two cheap models each need gamma = 0.95, which the shared budget cannot
  // cover together, so at most one of them gets a level below 1.
  MixProgram prog;
  prog.grid.levels = {0.95, 1.0};
  prog.models = {MixCandidate{"ref", true, 1.0, {1, 1}}, MixCandidate{"A", false, 0.1, {0.95, 0}},
                 MixCandidate{"B", false, 0.1, {0.95, 0}}};
  prog.alpha = 0.9;
  prog.gamma = 0.95;
  const auto plan = solve_mix_exact(prog);
  EXPECT_GE(plan_log_confidence(plan), std::log(0.95));
  EXPECT_DOUBLE_EQ(plan.objective, 0.1);
}

TEST(Solve, RejectsMalformedPrograms) {
  MixProgram prog = two_model_example();
  prog.models[0].is_reference = false;
  EXPECT_THROW(solve_mix_exact(prog), DomainError);
  EXPECT_THROW(solve_mix_exact(MixProgram{}), DomainError);
}

TEST(Solve, MatchesBruteForceOnRandomInstances) {
  std::mt19937_64 rng(2024);
  for (int t = 0; t < 120; ++t) {
    const auto ps = random_profiles(rng, 1 + static_cast<int>(rng() % 3));
    const AccuracySpec spec{0.02 + 0.2 * (rng() % 100) / 100.0, 0.95};
    const double r = (rng() % 4 == 0) ? 0.0 : 0.05 * (rng() % 10) / 10.0;
    const auto prog = build_mix_program(ps, ConfidenceGrid::from(0.95), spec, r);
    const auto plan = solve_mix_exact(prog);
    EXPECT_TRUE(plan_is_feasible(plan, prog)) << t;
    EXPECT_NEAR(plan.objective, brute_force(prog), 1e-9) << t;
    EXPECT_NEAR(plan.objective, brute_force(prog, 200), 1e-9) << t;
  }
}

TEST(Solve, NeverWorseThanCheapestValidModel) {
  std::mt19937_64 rng(7);
  for (int t = 0; t < 200; ++t) {
    auto ps = random_profiles(rng, 4);
    const AccuracySpec spec{0.05 + 0.2 * (rng() % 100) / 100.0, 0.95};
    eval_models(ps, spec);
    const auto prog = build_mix_program(ps, ConfidenceGrid::from(0.95), spec, 0.0);
    const auto plan = solve_mix_exact(prog);
    EXPECT_LE(plan.objective, cheapest_valid(ps)->c + 1e-15) << t;
  }
}

TEST(Solve, ObjectiveIsMonotoneInDelta) {
  std::mt19937_64 rng(8);
  for (int t = 0; t < 60; ++t) {
    const auto ps = random_profiles(rng, 4);
    double prev = std::numeric_limits<double>::infinity();
    for (int i = 1; i <= 10; ++i) {
      const AccuracySpec spec{i / 50.0, 0.95};
      const auto plan = solve_mix_exact(build_mix_program(ps, ConfidenceGrid::from(0.95), spec, 0.1));
      EXPECT_LE(plan.objective, prev + 1e-15) << t << " " << i;
      prev = plan.objective;
    }
  }
}

TEST(Solve, UnusedModelsSpendNoBudget) {
  std::mt19937_64 rng(9);
  for (int t = 0; t < 100; ++t) {
    const auto ps = random_profiles(rng, 4);
    const auto plan =
        solve_mix_exact(build_mix_program(ps, ConfidenceGrid::from(0.95), {0.1, 0.95}, 0.0));
    for (const auto& e : plan.entries) EXPECT_EQ(e.ratio > 0.0, e.level.has_value()) << e.name;
  }
}

TEST(Feasibility, DetectsEachViolation) {
  const auto prog = two_model_example();
  auto plan = solve_mix_exact(prog);
  ASSERT_TRUE(plan_is_feasible(plan, prog));
  auto low = plan;
  low.entries[1].ratio += 0.01;
  low.entries[0].ratio -= 0.01;
  EXPECT_FALSE(plan_is_feasible(low, prog));
  auto unassigned = plan;
  unassigned.entries[1].level.reset();
  EXPECT_FALSE(plan_is_feasible(unassigned, prog));
  auto overspent = plan;
  overspent.entries[0].level = 0.95;
  EXPECT_FALSE(plan_is_feasible(overspent, prog));
  auto unnormalized = plan;
  unnormalized.entries[0].ratio = 0.5;
  EXPECT_FALSE(plan_is_feasible(unnormalized, prog));
}

TEST(Partition, Examples) {
  const auto whole = partition_by_ratios(17, plan_with({{1.0, 0.9}}));
  ASSERT_EQ(whole.size(), 1u);
  EXPECT_EQ(whole[0].size(), 17u);

  const auto split = partition_by_ratios(10, plan_with({{0.25, 0.9}, {0.75, 0.85}}));
  EXPECT_EQ(split[0].size(), 3u);
  EXPECT_EQ(split[1].size(), 7u);
  EXPECT_EQ(split[0].end, split[1].begin);

  const auto thirds = partition_by_ratios(3, plan_with({{1.0 / 3, 0.9}, {1.0 / 3, 0.8}, {1.0 / 3, 0.7}}));
  for (const auto& s : thirds) EXPECT_EQ(s.size(), 1u);

  const auto empty = partition_by_ratios(0, plan_with({{0.5, 0.9}, {0.5, 0.8}}));
  for (const auto& s : empty) EXPECT_EQ(s.size(), 0u);
}

TEST(Partition, CoversItemsAndStaysWithinOneOfTheRatio) {
  std::mt19937_64 rng(10);
  for (int t = 0; t < 500; ++t) {
    const int m = 1 + rng() % 5;
    std::vector<double> w(m);
    double sum = 0.0;
    for (auto& x : w) sum += (x = static_cast<double>(rng() % 1000));
    if (sum == 0.0) continue;
    std::vector<std::pair<double, double>> rl;
    for (int i = 0; i < m; ++i) rl.emplace_back(w[i] / sum, 0.5 + 0.1 * (rng() % 5));
    const std::size_t count = rng() % 5000;
    const auto plan = plan_with(rl);
    const auto slices = partition_by_ratios(count, plan);
    std::size_t next = 0;
    for (std::size_t i = 0; i < slices.size(); ++i) {
      EXPECT_EQ(slices[i].begin, next);
      next = slices[i].end;
      EXPECT_LT(std::fabs(static_cast<double>(slices[i].size()) - rl[i].first * count), 1.0);
      if (rl[i].first == 0.0) {
        EXPECT_EQ(slices[i].size(), 0u);
      }
    }
    EXPECT_EQ(next, count);
    EXPECT_EQ(partition_by_ratios(count, plan).back().end, slices.back().end);
  }
}

TEST(PlanJson, CarriesEveryField) {
  const auto plan = solve_mix_exact(two_model_example());
  const auto j = nlohmann::json::parse(plan_to_json(plan));
  EXPECT_DOUBLE_EQ(j["refined_alpha"].get<double>(), 0.9);
  EXPECT_DOUBLE_EQ(j["objective"].get<double>(), plan.objective);
  EXPECT_EQ(j["models"]["A"]["level"], 0.95);
  EXPECT_EQ(j["models"]["ref"]["reference"], true);
  EXPECT_DOUBLE_EQ(j["models"]["A"]["lower_bound"].get<double>(), 0.85);
  EXPECT_DOUBLE_EQ(j["models"]["A"]["unit_cost"].get<double>(), 0.001);
}
