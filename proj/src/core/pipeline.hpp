#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "core/assignment_problem.hpp"
#include "core/bootstrap.hpp"
#include "core/causal_tree.hpp"
#include "core/dataset.hpp"
#include "core/member_effects.hpp"
#include "core/merge.hpp"
#include "core/policy.hpp"

namespace treatsel {

// Estimator output. Exactly one representation is populated, matching the
// method: a cohort-level effect table (Global, HT.ST, merged CT.ST), a causal
// tree collection (CT.ST before merging), causal forests (CF.DT), or paired
// outcome models (TM.DT).
struct CohortEffectsModel {
  CohortSet cohorts;
  EffectTable effects;
};

struct FittedModel {
  std::string method;
  int num_treatments = 0;
  std::vector<std::string> feature_names;
  std::vector<std::string> metric_names;
  std::optional<CohortEffectsModel> cohort;
  std::vector<CausalTree> trees;
  std::vector<CausalForest> forests;
  std::vector<TwoModel> two_models;
};

nlohmann::json fitted_model_to_json(const FittedModel& model);
FittedModel fitted_model_from_json(const nlohmann::json& j);

// Effect table serialization shared by model and policy files.
nlohmann::json effect_table_to_json(const EffectTable& table);
EffectTable effect_table_from_json(const nlohmann::json& j);

// End-to-end configuration, parsed from a single JSON document.
struct PipelineConfig {
  std::string method = "CT.ST";
  std::uint64_t seed = 0;

  std::string data_path;  // CLI-level; core stages receive the dataset
  CsvSchema schema;
  std::vector<GuardrailSpec> guardrails;  // one per non-objective metric

  double honest_fraction = 0.5;
  CausalTreeConfig tree;
  CausalForestConfig forest;
  RegressionForestConfig regressor;
  std::vector<int> heuristic_columns;  // empty: first min(4, M) features

  std::string optimizer = "auto";  // auto | stochastic | deterministic
  bool allow_mismatched_optimizer = false;
  McsaConfig mcsa;

  long bootstrap_replicates = 0;  // 0 disables the bias-correction stage
  bool resample_variances = true;
  bool single_tree_objective = false;  // merge objective trees only; price guardrails per cohort
};

PipelineConfig pipeline_config_from_json(const nlohmann::json& j);
nlohmann::json pipeline_config_to_json(const PipelineConfig& cfg);
std::string config_hash(const nlohmann::json& config);

bool method_is_cohort_level(const std::string& method);
// Resolves "auto" and enforces the estimator/optimizer pairing (cohort
// estimators take the stochastic solver, member estimators the deterministic
// one) unless allow_mismatched_optimizer is set.
std::string resolve_optimizer(const PipelineConfig& cfg);

// Stage 2: estimate effects.
FittedModel fit_effects(const ExperimentDataset& ds, const PipelineConfig& cfg);

// Stage 3a: merge tree partitions into one cohort-level table. Only CT.ST
// models need this; with single_tree_objective set, only the objective trees
// are merged and guardrail columns are priced per merged cohort on the
// estimation half.
FittedModel merge_fitted(const FittedModel& model, const ExperimentDataset& ds,
                         const PipelineConfig& cfg);

// Stage 3b: solve for the assignment.
struct OptimizeOutput {
  AssignmentPolicy policy;
  nlohmann::json summary;
  std::string trace_csv;  // stochastic solver trace; empty otherwise
};

OptimizeOutput optimize_model(const FittedModel& model, const ExperimentDataset& ds,
                              const PipelineConfig& cfg);

// Stage 4: parametric bootstrap and log-odds bias correction. Methods whose
// estimates carry no sampling variance are skipped with a note.
struct BootstrapOutput {
  AssignmentPolicy policy;
  nlohmann::json summary;
  bool applied = false;
};

BootstrapOutput bootstrap_model(const FittedModel& model, const ExperimentDataset& ds,
                                const PipelineConfig& cfg, const AssignmentPolicy& base);

struct PipelineResult {
  FittedModel model;
  nlohmann::json model_json;
  AssignmentPolicy policy;
  nlohmann::json policy_json;
  nlohmann::json report;
  std::string trace_csv;
};

PipelineResult run_pipeline(const ExperimentDataset& ds, const PipelineConfig& cfg);

}  // namespace treatsel
