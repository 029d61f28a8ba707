#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "core/common.hpp"

namespace treatsel {

// Sufficient statistics for one (cohort, treatment, metric) estimate.
struct BootstrapCell {
  double mu_hat = 0.0;
  double var_treat = 0.0;
  double var_control = 0.0;
  long n_treat = 0;
  long n_control = 0;
};

// Parametric bootstrap over the estimation uncertainty of an effect table.
// Cells are indexed ((cohort * J + (treatment-1)) * (K+1) + metric).
struct BootstrapInput {
  int n = 0;  // cohorts (or members)
  int J = 0;  // treatments (control excluded: it has no estimate)
  int K = 0;  // guardrail metrics; cells also carry metric 0
  std::vector<BootstrapCell> cells;
  int B = 200;
  std::uint64_t seed = 0;
  // The deterministic-solver analog resamples means only.
  bool resample_variances = true;
};

struct ResampledEffects {
  std::vector<double> mu;           // per cell
  std::vector<double> var_treat;    // per cell
  std::vector<double> var_control;  // per cell
};

// Draw replicate b. The mean moves by sqrt((var_treat+var_control)/(n_treat+n_control))
// times a standard normal; each arm variance is rescaled by an independent
// chi-square draw with its arm's degrees of freedom.
ResampledEffects resample_estimates(const BootstrapInput& input, int b);

// Re-solves the assignment problem on resampled effects and returns x.
// Throwing an Error with status Infeasible marks the replicate as failed.
using BootstrapSolver = std::function<std::vector<double>(const ResampledEffects&)>;

struct BootstrapResult {
  std::vector<double> x_hat;       // original assignment
  std::vector<double> x_bar;       // mean over successful replicates
  std::vector<double> bias;        // x_bar - x_hat
  std::vector<double> var_diag;    // per-coordinate sample variance
  std::vector<double> covariance;  // dense, row-major; empty above the size limit
  int resamples_used = 0;
  int failures = 0;
};

struct BootstrapRunConfig {
  double max_failure_fraction = 0.2;
  std::size_t dense_covariance_limit = 10000;  // max assignment length for a dense matrix
};

BootstrapResult bootstrap_assignments(const BootstrapInput& input, const BootstrapSolver& solver,
                                      const std::vector<double>& x_hat,
                                      const BootstrapRunConfig& cfg = {});

// Log-odds bias correction of a row-stochastic assignment: with l(p) the
// centered elementwise log, returns softmax(2 l(x_hat) - l(x_bar)) per cohort.
// eps floors probabilities before taking logs.
std::vector<double> bias_correct(const std::vector<double>& x_hat, const std::vector<double>& bias,
                                 int n, int J, double eps = 1e-6);

}  // namespace treatsel
