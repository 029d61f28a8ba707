#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"

#include "core/assignment_problem.hpp"
#include "core/causal_tree.hpp"
#include "core/dataset.hpp"
#include "core/member_effects.hpp"
#include "core/policy.hpp"

namespace treatsel {

// Synthetic experiment generator. Each unit draws latent traits H_m ~ N(0,1)
// (exposed as features), a common shock U_Y, and per-metric noise shared
// across arms, so individual effects are exactly W[j][k] * H_{m(j)}^2.
struct SimConfig {
  int treatments = 3;   // J
  int guardrails = 2;   // K (metrics are 1 objective + K guardrails)
  int het_dims = 4;     // M latent traits / features
  long units = 20000;
  double uncertainty_weight = 1.0;   // scales both noise sources
  double noise_scale_common = 1.0;   // sd multiplier of the shared shock U_Y
  double noise_scale_metric = 1.0;   // sd multiplier of per-metric noise
  std::vector<double> baseline;      // per-metric control level; empty = all 1.0
  // J x (K+1) effect weights; empty = seeded draw with guardrail sign structure.
  std::vector<std::vector<double>> weights;
  std::vector<int> h_assignment;  // trait index per treatment; empty = (j-1) % het_dims
  std::uint64_t seed = 0;
};

ExperimentDataset generate_dataset(const SimConfig& cfg);

// Uniform(-1,1) magnitudes with a structured sign pattern: every arm has at
// least one guardrail opposing its objective sign, and no guardrail column is
// single-signed across arms (so guardrail impacts can cancel).
std::vector<std::vector<double>> draw_weights(int treatments, int guardrails, std::uint64_t seed);

// True normalized population lift of a policy, from counterfactuals:
// tau_k = mean_i sum_{arm j>0} x_{i,j} * (Y_k(j) - Y_k(0)) / mean_i Y_k(0).
struct PolicyEvaluation {
  std::vector<double> tau;           // per metric
  std::vector<double> control_mean;  // per metric
  long units = 0;
};

PolicyEvaluation evaluate_policy(const AssignmentPolicy& policy, const ExperimentDataset& ds);

// Median-binned cohorts over the given feature columns (2^|columns| cells).
CohortSet heuristic_cohorts(const ExperimentDataset& ds, const std::vector<int>& columns);

// Best single-treatment-for-everyone policy judged on estimated global
// effects; falls back to the least-violating arm (flagged) when none passes
// the guardrails.
AssignmentPolicy global_best_policy(const EffectTable& global_effects,
                                    const std::vector<double>& control_means,
                                    const std::vector<GuardrailSpec>& guardrails,
                                    int num_treatments, int num_features,
                                    const std::vector<std::string>& feature_names,
                                    const std::vector<std::string>& metric_names);

// Five-method comparison across uncertainty weights.
struct ComparisonConfig {
  SimConfig base;                      // units field ignored; see n_train/n_test
  std::vector<double> weights = {0.0, 0.5, 1.0, 2.0, 4.0};
  int repeats = 10;
  long n_train = 20000;
  long n_test = 20000;
  std::vector<std::string> methods = {"Global", "HT.ST", "CT.ST", "CF.DT", "TM.DT"};
  double guardrail_band = 0.0;         // threshold c_k (normalized) for every guardrail
  double violation_flag_level = 0.05;  // |tau_k| level used to flag violations in results
  CausalTreeConfig tree;               // CT.ST trees; depth kept low so merges stay small
  CausalForestConfig forest;           // CF.DT forests
  RegressionForestConfig regressor;    // TM.DT outcome models
  long mcsa_iterations = 8000;
  int mcsa_samples = 50;
  double mcsa_eta0 = 0.02;
  double mcsa_gamma0 = 1.0;
  ProxKind mcsa_prox = ProxKind::Sgd;
  std::uint64_t seed = 0;

  ComparisonConfig() {
    tree.max_depth = 3;
    forest.n_trees = 25;
    forest.tree.max_depth = 4;
    forest.tree.thresholds_per_feature = 16;
    regressor.n_trees = 25;
  }
};

struct ComparisonRow {
  std::string method;
  double weight = 0.0;
  int repeat_idx = 0;
  int metric = 0;
  double tau = 0.0;
  bool guardrail_violated = false;  // any |tau_k| beyond the flag level, k >= 1
  bool least_violating = false;     // Global fallback marker
};

struct ComparisonResult {
  std::vector<ComparisonRow> rows;
  nlohmann::json manifest;
  std::string to_csv() const;       // long format, one row per (method, weight, repeat, metric)
  std::string summary_csv() const;  // one row per (method, weight) with per-metric mean/sd
};

ComparisonResult run_comparison(const ComparisonConfig& cfg);

SimConfig sim_config_from_json(const nlohmann::json& j);
ComparisonConfig comparison_config_from_json(const nlohmann::json& j);

}  // namespace treatsel
