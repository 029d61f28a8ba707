#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "core/causal_tree.hpp"
#include "core/dataset.hpp"
#include "core/effect.hpp"
#include "core/regression_forest.hpp"

namespace treatsel {

struct CausalForestConfig {
  int n_trees = 50;
  double subsample_fraction = 0.5;  // per-tree subsample, without replacement
  CausalTreeConfig tree;            // tree.mtry == 0 picks ceil(sqrt(M))
  std::uint64_t seed = 0;
};

// Ensemble of honest causal trees, each fit on a fresh subsample with a fresh
// honest split.
struct CausalForest {
  int treatment = 0;
  int metric = 0;
  int num_features = 0;
  CausalForestConfig config;
  std::vector<CausalTree> trees;
};

CausalForest fit_causal_forest(const ExperimentDataset& ds, int treatment, int metric,
                               const CausalForestConfig& cfg);

// Mean of per-tree leaf effects; var is the between-tree sample variance of
// the mean. Count and per-arm variance fields are averaged leaf diagnostics.
EffectEstimate forest_effect(const CausalForest& forest, std::span<const double> features);

// Separate outcome models for one treatment arm and control; the effect is
// the difference of predictions.
struct TwoModelConfig {
  RegressionForestConfig regressor;
  std::uint64_t seed = 0;
};

struct TwoModel {
  int treatment = 0;
  int metric = 0;
  int num_features = 0;
  RegressionForest model_treat;
  RegressionForest model_control;
};

TwoModel fit_two_model(const ExperimentDataset& ds, int treatment, int metric,
                       const TwoModelConfig& cfg);

double two_model_effect(const TwoModel& tm, std::span<const double> features);

}  // namespace treatsel
