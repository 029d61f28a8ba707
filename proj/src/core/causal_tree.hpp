#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "core/cohort.hpp"
#include "core/dataset.hpp"
#include "core/effect.hpp"

namespace treatsel {

struct CausalTreeConfig {
  double alpha = 0.5;            // variance penalty weight in the split score
  int min_leaf_per_arm = 50;     // per arm, in both halves
  int max_depth = 5;
  int thresholds_per_feature = 32;
  int mtry = 0;                  // features considered per node; 0 = all
  std::uint64_t seed = 0;
};

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  EffectEstimate leaf;
};

// Honest causal tree for one (treatment, metric) pair: structure chosen on the
// train half, leaf effects priced on the estimate half.
struct CausalTree {
  int treatment = 0;
  int metric = 0;
  int num_features = 0;
  CausalTreeConfig config;
  std::vector<TreeNode> nodes;  // node 0 is the root

  const EffectEstimate& leaf_for(std::span<const double> features) const;
  int leaf_index_for(std::span<const double> features) const;
  std::size_t num_leaves() const;
};

CausalTree fit_causal_tree(const HonestSplit& split, int treatment, int metric,
                           const CausalTreeConfig& cfg);

// Re-price the leaves of an existing structure on a (possibly different)
// estimation sample. Used by honesty checks.
void estimate_leaf_effects(CausalTree& tree, const ExperimentDataset& estimate);

// Leaves as a partition of feature space, with effects aligned to cohorts.
std::pair<CohortSet, std::vector<EffectEstimate>> tree_cohorts(const CausalTree& tree,
                                                               const std::string& id_prefix);

}  // namespace treatsel
