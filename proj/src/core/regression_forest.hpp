#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "core/common.hpp"

namespace treatsel {

struct RegressionTreeConfig {
  int max_depth = 8;
  int min_leaf = 5;
  int thresholds_per_feature = 32;
  int mtry = 0;  // 0 = all features
};

struct RegressionForestConfig {
  int n_trees = 50;
  RegressionTreeConfig tree;
  bool bootstrap = true;  // sample n with replacement per tree
  std::uint64_t seed = 0;
};

struct RegressionNode {
  int feature = -1;
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double value = 0.0;
};

struct RegressionTree {
  std::vector<RegressionNode> nodes;
  double predict(std::span<const double> x) const;
};

// Bagged CART regression with squared-error splits.
class RegressionForest {
 public:
  void fit(const std::vector<double>& x, std::size_t num_features, const std::vector<double>& y,
           const RegressionForestConfig& cfg);
  double predict(std::span<const double> x) const;
  bool fitted() const { return !trees_.empty(); }
  const std::vector<RegressionTree>& trees() const { return trees_; }
  void set_trees(std::vector<RegressionTree> trees) { trees_ = std::move(trees); }

 private:
  std::vector<RegressionTree> trees_;
};

}  // namespace treatsel
