#pragma once

// Cost-minimal model mix under an aggregate accuracy constraint and a shared
// confidence budget. Each model gets a processing ratio x_i and at most one
// confidence level gamma_j; the program is
//
//   min  sum_i c_i x_i
//   s.t. sum_ij l_ij x_i y_ij >= alpha         (accuracy)
//        sum_ij y_ij ln gamma_j >= ln gamma     (confidence budget)
//        sum_i x_i = 1,  sum_j y_ij <= 1,  x in [0,1], y binary
//
// where l_ij is the Clopper-Pearson lower bound of model i at level j.

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cascade/profiler.hpp"

namespace cascade {

/// gamma, gamma + step, ... (strictly below 1), then 1.
struct ConfidenceGrid {
  std::vector<double> levels;

  static ConfidenceGrid from(double gamma, double step = 0.01);
};

/// Accuracy threshold for the remaining items once a fraction r was served by
/// the reference: max(0, 1 - delta / (1 - r)). Throws DomainError unless 0 <= r < 1.
double refined_alpha(double delta, double r);

struct MixCandidate {
  std::string name;
  bool is_reference = false;
  double unit_cost = 0.0;
  std::vector<double> lower_bounds;  // one per grid level
};

/// Coefficient of one bilinear x_i * y_ij term in the accuracy constraint.
struct BilinearTerm {
  std::size_t model = 0;
  std::size_t level = 0;
  double coefficient = 0.0;
};

struct MixProgram {
  ConfidenceGrid grid;
  std::vector<MixCandidate> models;
  std::vector<BilinearTerm> terms;
  double alpha = 0.0;
  double gamma = 0.0;
};

MixProgram build_mix_program(std::span<const ModelProfile> profiles, const ConfidenceGrid& grid,
                             const AccuracySpec& spec, double r);

struct MixAssignment {
  std::string name;
  bool is_reference = false;
  double ratio = 0.0;
  std::optional<double> level;  // confidence level spent on this model
  double lower_bound = 0.0;     // accuracy bound at that level
  double unit_cost = 0.0;
};

struct MixPlan {
  std::vector<MixAssignment> entries;  // program order
  double objective = 0.0;              // expected cost per item
  double refined_alpha = 0.0;

  double ratio(const std::string& name) const;
};

/// Sum of lower_bound * ratio over entries, in entry order.
double plan_accuracy(const MixPlan& plan);

/// Sum of ln(level) over entries with a level.
double plan_log_confidence(const MixPlan& plan);

/// Checks ratio sum, accuracy and confidence-budget constraints.
bool plan_is_feasible(const MixPlan& plan, const MixProgram& program);

/// Exact optimum by enumerating budget-feasible level assignments; for each,
/// the residual LP has an optimal vertex using at most two models.
MixPlan solve_mix_exact(const MixProgram& program);

/// Half-open index range [begin, end) of the remaining items for one model.
struct PartitionSlice {
  std::string name;
  std::size_t begin = 0;
  std::size_t end = 0;

  std::size_t size() const { return end - begin; }
};

/// Contiguous split sized by floor(x_i * count); leftover items go one each
/// to models with a fractional remainder, highest lower bound first.
std::vector<PartitionSlice> partition_by_ratios(std::size_t count, const MixPlan& plan);

std::string plan_to_json(const MixPlan& plan);

}  // namespace cascade
