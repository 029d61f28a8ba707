#pragma once

#include <vector>

#include "core/effect.hpp"
#include "core/mcsa.hpp"
#include "core/simplex_lp.hpp"

namespace treatsel {

// One guardrail constraint in normalized units. Band means |x.mu_k| <= threshold.
struct GuardrailSpec {
  enum class Direction { Le, Ge, Band };
  Direction direction = Direction::Band;
  double threshold = 0.0;
};

// Optimizer-ready coefficient matrices built from an effect table. Column
// order per cohort follows `arms`; control (arm 0) columns are exactly zero.
// Cohort weights let population shares enter the objective and constraints,
// and control means convert effects into relative units.
struct AssignmentProblem {
  StochasticProblem stochastic;      // guardrail rows expanded per direction
  DeterministicProblem deterministic;
  std::vector<int> arms;
  std::vector<int> row_metric;  // source guardrail (1..K) per expanded row
};

AssignmentProblem build_assignment_problem(const EffectTable& table,
                                           const std::vector<double>& cohort_weight,
                                           const std::vector<double>& control_means,
                                           const std::vector<GuardrailSpec>& guardrails,
                                           int num_treatments, bool include_control);

}  // namespace treatsel
