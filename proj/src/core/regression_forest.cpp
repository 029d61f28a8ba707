#include "core/regression_forest.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

namespace treatsel {

namespace {

struct TreeBuilder {
  const std::vector<double>& x;
  const std::vector<double>& y;
  std::size_t m;  // features
  const RegressionTreeConfig& cfg;
  std::vector<RegressionNode>& nodes;
  std::mt19937_64& rng;
  std::vector<std::size_t> idx;

  struct Sample {
    double value;
    double y;
  };
  std::vector<Sample> scratch;
  std::vector<int> feature_pool;

  double feat(std::size_t i, int f) const { return x[i * m + f]; }

  std::vector<int> pick_features() {
    int want = cfg.mtry;
    int nf = static_cast<int>(m);
    if (want <= 0 || want >= nf) {
      std::vector<int> all(m);
      std::iota(all.begin(), all.end(), 0);
      return all;
    }
    feature_pool.resize(m);
    std::iota(feature_pool.begin(), feature_pool.end(), 0);
    for (int i = 0; i < want; ++i) {
      std::uniform_int_distribution<int> pick(i, nf - 1);
      std::swap(feature_pool[i], feature_pool[pick(rng)]);
    }
    std::vector<int> chosen(feature_pool.begin(), feature_pool.begin() + want);
    std::sort(chosen.begin(), chosen.end());
    return chosen;
  }

  int build(std::size_t lo, std::size_t hi, int depth) {
    int node_id = static_cast<int>(nodes.size());
    nodes.emplace_back();

    double sum = 0.0;
    for (std::size_t p = lo; p < hi; ++p) sum += y[idx[p]];
    const std::size_t n = hi - lo;
    nodes[node_id].value = sum / static_cast<double>(n);

    if (depth >= cfg.max_depth || n < 2 * static_cast<std::size_t>(cfg.min_leaf)) return node_id;

    // Maximize sum over children of n_child * mean_child^2 (equivalent to
    // minimizing within-child squared error).
    double node_gain = sum * sum / static_cast<double>(n);
    double best_gain = node_gain;
    int best_feature = -1;
    double best_threshold = 0.0;

    for (int f : pick_features()) {
      scratch.clear();
      for (std::size_t p = lo; p < hi; ++p) scratch.push_back({feat(idx[p], f), y[idx[p]]});
      std::sort(scratch.begin(), scratch.end(),
                [](const Sample& a, const Sample& b) { return a.value < b.value; });
      std::vector<double> cum(n + 1, 0.0);
      for (std::size_t p = 0; p < n; ++p) cum[p + 1] = cum[p] + scratch[p].y;

      const int want = std::max(1, cfg.thresholds_per_feature);
      double prev = std::numeric_limits<double>::quiet_NaN();
      for (int q = 1; q <= want; ++q) {
        std::size_t pos = static_cast<std::size_t>(
            static_cast<double>(n) * static_cast<double>(q) / static_cast<double>(want + 1));
        if (pos >= n) pos = n - 1;
        double theta = scratch[pos].value;
        if (theta <= scratch[0].value || theta == prev) continue;
        prev = theta;
        std::size_t cut = static_cast<std::size_t>(
            std::lower_bound(scratch.begin(), scratch.end(), theta,
                             [](const Sample& a, double t) { return a.value < t; }) -
            scratch.begin());
        if (cut < static_cast<std::size_t>(cfg.min_leaf) ||
            n - cut < static_cast<std::size_t>(cfg.min_leaf)) {
          continue;
        }
        double ls = cum[cut];
        double rs = cum[n] - cum[cut];
        double gain = ls * ls / static_cast<double>(cut) + rs * rs / static_cast<double>(n - cut);
        if (gain > best_gain) {
          best_gain = gain;
          best_feature = f;
          best_threshold = theta;
        }
      }
    }

    if (best_feature < 0) return node_id;
    auto mid = std::partition(idx.begin() + lo, idx.begin() + hi,
                              [&](std::size_t i) { return feat(i, best_feature) < best_threshold; }) -
               idx.begin();
    nodes[node_id].feature = best_feature;
    nodes[node_id].threshold = best_threshold;
    nodes[node_id].left = build(lo, static_cast<std::size_t>(mid), depth + 1);
    nodes[node_id].right = build(static_cast<std::size_t>(mid), hi, depth + 1);
    return node_id;
  }
};

}  // namespace

double RegressionTree::predict(std::span<const double> x) const {
  int cur = 0;
  while (nodes[cur].feature >= 0) {
    cur = x[nodes[cur].feature] < nodes[cur].threshold ? nodes[cur].left : nodes[cur].right;
  }
  return nodes[cur].value;
}

void RegressionForest::fit(const std::vector<double>& x, std::size_t num_features,
                           const std::vector<double>& y, const RegressionForestConfig& cfg) {
  if (num_features == 0 || y.empty() || x.size() != y.size() * num_features) {
    throw Error::data("regression forest: inconsistent training matrix");
  }
  if (cfg.n_trees < 1) throw Error::config("regression forest requires at least one tree");
  const std::size_t n = y.size();
  trees_.clear();
  trees_.reserve(static_cast<std::size_t>(cfg.n_trees));
  for (int t = 0; t < cfg.n_trees; ++t) {
    std::mt19937_64 rng(derive_seed(cfg.seed, "bagged_tree_" + std::to_string(t)));
    RegressionTree tree;
    TreeBuilder b{x, y, num_features, cfg.tree, tree.nodes, rng, {}, {}, {}};
    if (cfg.bootstrap) {
      std::uniform_int_distribution<std::size_t> pick(0, n - 1);
      b.idx.resize(n);
      for (auto& i : b.idx) i = pick(rng);
    } else {
      b.idx.resize(n);
      std::iota(b.idx.begin(), b.idx.end(), 0);
    }
    b.build(0, b.idx.size(), 0);
    trees_.push_back(std::move(tree));
  }
}

double RegressionForest::predict(std::span<const double> x) const {
  if (trees_.empty()) throw Error::internal("regression forest used before fit");
  double s = 0.0;
  for (const auto& t : trees_) s += t.predict(x);
  return s / static_cast<double>(trees_.size());
}

}  // namespace treatsel
