#pragma once

#include <vector>

#include "core/common.hpp"

namespace treatsel {

// Sample-average (zero-noise) assignment problem:
//   maximize   mu[0] . x
//   subject to mu[k] . x <= c[k-1]   for k = 1..K
//              sum_j x[i*J+j] = 1    for each cohort i
//              x >= 0
// Constraints needing another direction (>=, bands) are expressed by adding
// negated rows before calling the solver.
struct DeterministicProblem {
  int n = 0;  // cohorts
  int J = 0;  // arms per cohort
  int K = 0;  // coupling constraint rows
  std::vector<std::vector<double>> mu;  // K+1 vectors, each n*J, objective first
  std::vector<double> c;                // K thresholds

  void validate() const;
};

enum class LpStatus { Optimal, Infeasible };

struct LpSolution {
  LpStatus status = LpStatus::Optimal;
  std::vector<double> x;  // n*J, empty when infeasible
  double objective = 0.0;
  // Duals: K coupling rows first, then n cohort rows.
  std::vector<double> duals;
  double gap = 0.0;  // certified duality gap at the reported point
  long iterations = 0;
  double max_violation = 0.0;
};

// Revised simplex exploiting the cohort-block structure: basis solves reduce
// to a K x K system, so cost per iteration is independent of n beyond
// pricing. Every reported optimum is certified (primal feasibility, dual
// feasibility, complementary slackness, duality gap <= 1e-6 * (1 + |obj|));
// certification failure raises an internal error.
LpSolution saa_solve(const DeterministicProblem& p);

}  // namespace treatsel
