#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "core/common.hpp"

namespace treatsel {

// Column roles for CSV ingestion. Metric column order is meaningful: index 0
// is the objective metric, the rest are guardrails.
struct CsvSchema {
  std::string id_column = "unit_id";  // empty: synthesize row ids
  std::string variant_column = "variant";
  std::vector<std::string> feature_columns;
  std::vector<std::string> metric_columns;
  int num_treatments = -1;  // -1: infer from the variant column
  char delimiter = ',';
};

// In-memory randomized experiment: one row per unit, arm label 0 = control,
// outcomes for K+1 metrics, and (for simulated data) the full counterfactual
// outcome grid.
class ExperimentDataset {
 public:
  std::vector<std::string> unit_ids;
  std::vector<std::string> feature_names;
  std::vector<std::string> metric_names;
  std::vector<double> features;  // n x M, row-major
  std::vector<int> variants;     // values in [0, J]
  std::vector<double> outcomes;  // n x (K+1), row-major
  // Optional n x (J+1) x (K+1) grid of potential outcomes.
  std::vector<double> counterfactuals;
  int num_treatments = 0;  // J

  std::size_t n() const { return variants.size(); }
  int num_features() const { return static_cast<int>(feature_names.size()); }
  int num_metrics() const { return static_cast<int>(metric_names.size()); }
  bool has_counterfactuals() const { return !counterfactuals.empty(); }

  double feature(std::size_t i, int f) const { return features[i * feature_names.size() + f]; }
  std::span<const double> feature_row(std::size_t i) const {
    return {features.data() + i * feature_names.size(), feature_names.size()};
  }
  double outcome(std::size_t i, int k) const { return outcomes[i * metric_names.size() + k]; }
  double cf(std::size_t i, int arm, int k) const {
    return counterfactuals[(i * (num_treatments + 1) + arm) * metric_names.size() + k];
  }

  std::map<int, std::size_t> variant_counts() const;
  ExperimentDataset subset(const std::vector<std::size_t>& rows) const;
  void validate() const;
};

// Disjoint halves of a dataset, split stratified by arm. The train half picks
// split structure; the estimate half prices it.
struct HonestSplit {
  ExperimentDataset train;
  ExperimentDataset estimate;
  double fraction = 0.5;
  std::uint64_t seed = 0;
};

HonestSplit honest_split(const ExperimentDataset& ds, double train_fraction, std::uint64_t seed);

ExperimentDataset load_experiment_csv(const std::string& path, const CsvSchema& schema);
void save_experiment_csv(const ExperimentDataset& ds, const std::string& path, char delimiter = ',');

}  // namespace treatsel
