#include "core/member_effects.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace treatsel {

CausalForest fit_causal_forest(const ExperimentDataset& ds, int treatment, int metric,
                               const CausalForestConfig& cfg) {
  if (cfg.n_trees < 1) throw Error::config("causal forest requires at least one tree");
  if (!(cfg.subsample_fraction > 0.0 && cfg.subsample_fraction <= 1.0)) {
    throw Error::config("causal forest subsample fraction must lie in (0, 1]");
  }
  std::vector<std::size_t> treat_rows, control_rows;
  for (std::size_t i = 0; i < ds.n(); ++i) {
    if (ds.variants[i] == treatment) treat_rows.push_back(i);
    if (ds.variants[i] == 0) control_rows.push_back(i);
  }
  const long need = 2L * cfg.tree.min_leaf_per_arm;
  if (static_cast<long>(treat_rows.size()) < need || static_cast<long>(control_rows.size()) < need) {
    throw Error::data("insufficient data: causal forest needs at least " + std::to_string(need) +
                      " units per arm");
  }

  CausalForest forest;
  forest.treatment = treatment;
  forest.metric = metric;
  forest.num_features = ds.num_features();
  forest.config = cfg;
  forest.trees.reserve(static_cast<std::size_t>(cfg.n_trees));

  CausalTreeConfig tree_cfg = cfg.tree;
  if (tree_cfg.mtry <= 0) {
    tree_cfg.mtry = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(ds.num_features()))));
  }

  for (int t = 0; t < cfg.n_trees; ++t) {
    std::uint64_t tree_seed = derive_seed(cfg.seed, "forest_tree_" + std::to_string(t));
    std::mt19937_64 rng(tree_seed);
    std::vector<std::size_t> rows;
    for (auto* arm : {&treat_rows, &control_rows}) {
      std::vector<std::size_t> pool = *arm;
      std::shuffle(pool.begin(), pool.end(), rng);
      auto want = static_cast<std::size_t>(
          std::lround(cfg.subsample_fraction * static_cast<double>(pool.size())));
      want = std::clamp<std::size_t>(want, 2, pool.size());
      rows.insert(rows.end(), pool.begin(), pool.begin() + want);
    }
    std::sort(rows.begin(), rows.end());
    ExperimentDataset sub = ds.subset(rows);
    HonestSplit split = honest_split(sub, 0.5, derive_seed(tree_seed, "subsplit"));
    CausalTreeConfig ct = tree_cfg;
    ct.seed = derive_seed(tree_seed, "fit");
    forest.trees.push_back(fit_causal_tree(split, treatment, metric, ct));
  }
  return forest;
}

EffectEstimate forest_effect(const CausalForest& forest, std::span<const double> features) {
  if (forest.trees.empty()) throw Error::internal("causal forest used before fit");
  const std::size_t T = forest.trees.size();
  double sum = 0.0, sumsq = 0.0;
  double vt = 0.0, vc = 0.0, nt = 0.0, nc = 0.0;
  for (const auto& tree : forest.trees) {
    const EffectEstimate& leaf = tree.leaf_for(features);
    sum += leaf.tau;
    sumsq += leaf.tau * leaf.tau;
    vt += leaf.var_treat;
    vc += leaf.var_control;
    nt += static_cast<double>(leaf.n_treat);
    nc += static_cast<double>(leaf.n_control);
  }
  EffectEstimate out;
  const double dT = static_cast<double>(T);
  out.tau = sum / dT;
  double between = T >= 2 ? (sumsq - dT * out.tau * out.tau) / (dT - 1.0) : 0.0;
  out.var = std::max(0.0, between) / dT;
  out.var_treat = vt / dT;
  out.var_control = vc / dT;
  out.n_treat = std::lround(nt / dT);
  out.n_control = std::lround(nc / dT);
  return out;
}

TwoModel fit_two_model(const ExperimentDataset& ds, int treatment, int metric,
                       const TwoModelConfig& cfg) {
  if (treatment < 1 || treatment > ds.num_treatments) {
    throw Error::config("treatment index " + std::to_string(treatment) + " out of range");
  }
  std::vector<double> xt, yt, xc, yc;
  const std::size_t m = static_cast<std::size_t>(ds.num_features());
  for (std::size_t i = 0; i < ds.n(); ++i) {
    int v = ds.variants[i];
    if (v != treatment && v != 0) continue;
    auto row = ds.feature_row(i);
    auto& x = (v == treatment) ? xt : xc;
    auto& y = (v == treatment) ? yt : yc;
    x.insert(x.end(), row.begin(), row.end());
    y.push_back(ds.outcome(i, metric));
  }
  if (yt.empty() || yc.empty()) {
    throw Error::data("insufficient data: two-model fit needs units in both arms");
  }
  TwoModel tm;
  tm.treatment = treatment;
  tm.metric = metric;
  tm.num_features = static_cast<int>(m);
  RegressionForestConfig rc = cfg.regressor;
  // Both arm models share one derived seed so that identical arm data yields
  // identical fits (and an exactly-zero effect).
  rc.seed = derive_seed(cfg.seed, "two_model");
  tm.model_treat.fit(xt, m, yt, rc);
  tm.model_control.fit(xc, m, yc, rc);
  return tm;
}

double two_model_effect(const TwoModel& tm, std::span<const double> features) {
  return tm.model_treat.predict(features) - tm.model_control.predict(features);
}

}  // namespace treatsel
