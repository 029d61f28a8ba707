#include "core/causal_tree.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace treatsel {

namespace {

struct NodeArm {
  ArmStats treat;
  ArmStats control;
};

double split_score(const NodeArm& s, double alpha) {
  if (s.treat.n < 1 || s.control.n < 1) return -std::numeric_limits<double>::infinity();
  double tau = s.treat.mean() - s.control.mean();
  double var_tau = (s.treat.n >= 2 ? s.treat.variance() / static_cast<double>(s.treat.n) : 0.0) +
                   (s.control.n >= 2 ? s.control.variance() / static_cast<double>(s.control.n) : 0.0);
  double n = static_cast<double>(s.treat.n + s.control.n);
  return n * tau * tau - alpha * n * var_tau;
}

struct Builder {
  const ExperimentDataset& train;
  const ExperimentDataset& estimate;
  int treatment;
  int metric;
  const CausalTreeConfig& cfg;
  int num_features;
  std::vector<TreeNode>& nodes;
  std::mt19937_64 rng;

  std::vector<std::size_t> tr_idx;  // rows with variant in {treatment, 0}
  std::vector<std::size_t> es_idx;

  // Scratch reused across nodes.
  struct Sample {
    double value;
    double y;
    bool treated;
  };
  std::vector<Sample> scratch;
  std::vector<double> cum_nt, cum_st, cum_qt, cum_nc, cum_sc, cum_qc;
  std::vector<double> es_val_t, es_val_c;
  std::vector<int> feature_pool;

  Builder(const HonestSplit& split, int j, int k, const CausalTreeConfig& c,
          std::vector<TreeNode>& out)
      : train(split.train),
        estimate(split.estimate),
        treatment(j),
        metric(k),
        cfg(c),
        num_features(split.train.num_features()),
        nodes(out),
        rng(derive_seed(c.seed, "causal_tree_fit")) {
    for (std::size_t i = 0; i < train.n(); ++i) {
      if (train.variants[i] == treatment || train.variants[i] == 0) tr_idx.push_back(i);
    }
    for (std::size_t i = 0; i < estimate.n(); ++i) {
      if (estimate.variants[i] == treatment || estimate.variants[i] == 0) es_idx.push_back(i);
    }
  }

  NodeArm stats_of(const ExperimentDataset& ds, const std::vector<std::size_t>& idx, std::size_t lo,
                   std::size_t hi) const {
    NodeArm s;
    for (std::size_t p = lo; p < hi; ++p) {
      std::size_t i = idx[p];
      double y = ds.outcome(i, metric);
      if (ds.variants[i] == treatment) {
        s.treat.add(y);
      } else {
        s.control.add(y);
      }
    }
    return s;
  }

  std::vector<int> pick_features() {
    int m = cfg.mtry;
    if (m <= 0 || m >= num_features) {
      std::vector<int> all(static_cast<std::size_t>(num_features));
      std::iota(all.begin(), all.end(), 0);
      return all;
    }
    feature_pool.resize(static_cast<std::size_t>(num_features));
    std::iota(feature_pool.begin(), feature_pool.end(), 0);
    for (int i = 0; i < m; ++i) {
      std::uniform_int_distribution<int> pick(i, num_features - 1);
      std::swap(feature_pool[i], feature_pool[pick(rng)]);
    }
    std::vector<int> chosen(feature_pool.begin(), feature_pool.begin() + m);
    std::sort(chosen.begin(), chosen.end());
    return chosen;
  }

  int build(std::size_t tlo, std::size_t thi, std::size_t elo, std::size_t ehi, int depth) {
    int node_id = static_cast<int>(nodes.size());
    nodes.emplace_back();

    NodeArm es = stats_of(estimate, es_idx, elo, ehi);
    if (es.treat.n < 1 || es.control.n < 1) {
      throw Error::data("insufficient data: estimation half lacks units for treatment " +
                        std::to_string(treatment) + " or control in a node");
    }
    nodes[node_id].leaf = diff_in_means(es.treat, es.control);

    if (depth >= cfg.max_depth) return node_id;
    NodeArm tr = stats_of(train, tr_idx, tlo, thi);
    if (tr.treat.n < 2 * cfg.min_leaf_per_arm || tr.control.n < 2 * cfg.min_leaf_per_arm) return node_id;

    const double unsplit = split_score(tr, cfg.alpha);
    double best_score = unsplit;
    int best_feature = -1;
    double best_threshold = 0.0;

    for (int f : pick_features()) {
      // Train-half samples of this node, sorted by feature value.
      scratch.clear();
      for (std::size_t p = tlo; p < thi; ++p) {
        std::size_t i = tr_idx[p];
        scratch.push_back({train.feature(i, f), train.outcome(i, metric),
                           train.variants[i] == treatment});
      }
      std::sort(scratch.begin(), scratch.end(),
                [](const Sample& a, const Sample& b) { return a.value < b.value; });
      const std::size_t m = scratch.size();
      cum_nt.assign(m + 1, 0.0);
      cum_st.assign(m + 1, 0.0);
      cum_qt.assign(m + 1, 0.0);
      cum_nc.assign(m + 1, 0.0);
      cum_sc.assign(m + 1, 0.0);
      cum_qc.assign(m + 1, 0.0);
      for (std::size_t p = 0; p < m; ++p) {
        const Sample& s = scratch[p];
        cum_nt[p + 1] = cum_nt[p] + (s.treated ? 1.0 : 0.0);
        cum_st[p + 1] = cum_st[p] + (s.treated ? s.y : 0.0);
        cum_qt[p + 1] = cum_qt[p] + (s.treated ? s.y * s.y : 0.0);
        cum_nc[p + 1] = cum_nc[p] + (s.treated ? 0.0 : 1.0);
        cum_sc[p + 1] = cum_sc[p] + (s.treated ? 0.0 : s.y);
        cum_qc[p + 1] = cum_qc[p] + (s.treated ? 0.0 : s.y * s.y);
      }

      es_val_t.clear();
      es_val_c.clear();
      for (std::size_t p = elo; p < ehi; ++p) {
        std::size_t i = es_idx[p];
        (estimate.variants[i] == treatment ? es_val_t : es_val_c).push_back(estimate.feature(i, f));
      }
      std::sort(es_val_t.begin(), es_val_t.end());
      std::sort(es_val_c.begin(), es_val_c.end());

      // Candidate thresholds: evenly spaced order statistics of the node's
      // train values, deduped, excluding the minimum (left child must be
      // nonempty under value < threshold).
      const int want = std::max(1, cfg.thresholds_per_feature);
      double prev = std::numeric_limits<double>::quiet_NaN();
      for (int q = 1; q <= want; ++q) {
        std::size_t pos = static_cast<std::size_t>(
            static_cast<double>(m) * static_cast<double>(q) / static_cast<double>(want + 1));
        if (pos >= m) pos = m - 1;
        double theta = scratch[pos].value;
        if (theta <= scratch[0].value) continue;
        if (theta == prev) continue;
        prev = theta;

        std::size_t cut = static_cast<std::size_t>(
            std::lower_bound(scratch.begin(), scratch.end(), theta,
                             [](const Sample& a, double t) { return a.value < t; }) -
            scratch.begin());
        NodeArm left, right;
        left.treat.add_counts(static_cast<long>(cum_nt[cut]), cum_st[cut], cum_qt[cut]);
        left.control.add_counts(static_cast<long>(cum_nc[cut]), cum_sc[cut], cum_qc[cut]);
        right.treat.add_counts(static_cast<long>(cum_nt[m] - cum_nt[cut]), cum_st[m] - cum_st[cut],
                               cum_qt[m] - cum_qt[cut]);
        right.control.add_counts(static_cast<long>(cum_nc[m] - cum_nc[cut]), cum_sc[m] - cum_sc[cut],
                                 cum_qc[m] - cum_qc[cut]);
        if (left.treat.n < cfg.min_leaf_per_arm || left.control.n < cfg.min_leaf_per_arm ||
            right.treat.n < cfg.min_leaf_per_arm || right.control.n < cfg.min_leaf_per_arm) {
          continue;
        }
        auto et_cut = std::lower_bound(es_val_t.begin(), es_val_t.end(), theta) - es_val_t.begin();
        auto ec_cut = std::lower_bound(es_val_c.begin(), es_val_c.end(), theta) - es_val_c.begin();
        long es_lt = static_cast<long>(et_cut);
        long es_lc = static_cast<long>(ec_cut);
        long es_rt = static_cast<long>(es_val_t.size()) - es_lt;
        long es_rc = static_cast<long>(es_val_c.size()) - es_lc;
        if (es_lt < cfg.min_leaf_per_arm || es_lc < cfg.min_leaf_per_arm ||
            es_rt < cfg.min_leaf_per_arm || es_rc < cfg.min_leaf_per_arm) {
          continue;
        }

        double score = split_score(left, cfg.alpha) + split_score(right, cfg.alpha);
        // Strict improvement; ties resolved by scan order (lowest feature,
        // then lowest threshold).
        if (score > best_score) {
          best_score = score;
          best_feature = f;
          best_threshold = theta;
        }
      }
    }

    if (best_feature < 0) return node_id;

    auto tmid = std::partition(tr_idx.begin() + tlo, tr_idx.begin() + thi,
                               [&](std::size_t i) {
                                 return train.feature(i, best_feature) < best_threshold;
                               }) -
                tr_idx.begin();
    auto emid = std::partition(es_idx.begin() + elo, es_idx.begin() + ehi,
                               [&](std::size_t i) {
                                 return estimate.feature(i, best_feature) < best_threshold;
                               }) -
                es_idx.begin();

    nodes[node_id].feature = best_feature;
    nodes[node_id].threshold = best_threshold;
    int left_id = build(tlo, static_cast<std::size_t>(tmid), elo, static_cast<std::size_t>(emid), depth + 1);
    nodes[node_id].left = left_id;
    int right_id = build(static_cast<std::size_t>(tmid), thi, static_cast<std::size_t>(emid), ehi, depth + 1);
    nodes[node_id].right = right_id;
    return node_id;
  }
};

}  // namespace

const EffectEstimate& CausalTree::leaf_for(std::span<const double> features) const {
  return nodes[leaf_index_for(features)].leaf;
}

int CausalTree::leaf_index_for(std::span<const double> features) const {
  int cur = 0;
  while (nodes[cur].feature >= 0) {
    cur = features[nodes[cur].feature] < nodes[cur].threshold ? nodes[cur].left : nodes[cur].right;
  }
  return cur;
}

std::size_t CausalTree::num_leaves() const {
  std::size_t c = 0;
  for (const auto& n : nodes) c += n.feature < 0;
  return c;
}

CausalTree fit_causal_tree(const HonestSplit& split, int treatment, int metric,
                           const CausalTreeConfig& cfg) {
  if (treatment < 1 || treatment > split.train.num_treatments) {
    throw Error::config("treatment index " + std::to_string(treatment) + " out of range");
  }
  if (metric < 0 || metric >= split.train.num_metrics()) {
    throw Error::config("metric index " + std::to_string(metric) + " out of range");
  }
  if (cfg.alpha < 0 || cfg.min_leaf_per_arm < 1 || cfg.max_depth < 0) {
    throw Error::config("invalid causal tree configuration");
  }
  CausalTree tree;
  tree.treatment = treatment;
  tree.metric = metric;
  tree.num_features = split.train.num_features();
  tree.config = cfg;
  Builder b(split, treatment, metric, cfg, tree.nodes);
  b.build(0, b.tr_idx.size(), 0, b.es_idx.size(), 0);
  return tree;
}

void estimate_leaf_effects(CausalTree& tree, const ExperimentDataset& estimate) {
  std::vector<ArmStats> treat(tree.nodes.size()), control(tree.nodes.size());
  for (std::size_t i = 0; i < estimate.n(); ++i) {
    int v = estimate.variants[i];
    if (v != tree.treatment && v != 0) continue;
    int leaf = tree.leaf_index_for(estimate.feature_row(i));
    double y = estimate.outcome(i, tree.metric);
    (v == tree.treatment ? treat[leaf] : control[leaf]).add(y);
  }
  for (std::size_t nid = 0; nid < tree.nodes.size(); ++nid) {
    if (tree.nodes[nid].feature >= 0) continue;
    if (treat[nid].n < 1 || control[nid].n < 1) {
      throw Error::data("insufficient data: a leaf has no estimation units in one arm");
    }
    tree.nodes[nid].leaf = diff_in_means(treat[nid], control[nid]);
  }
}

namespace {

void collect_leaves(const CausalTree& tree, int node, Cohort box, const std::string& prefix,
                    std::string path, CohortSet& cs, std::vector<EffectEstimate>& effects) {
  const TreeNode& n = tree.nodes[node];
  if (n.feature < 0) {
    box.id = prefix + (path.empty() ? "root" : path);
    cs.cohorts.push_back(std::move(box));
    effects.push_back(n.leaf);
    return;
  }
  Cohort left = box;
  left.tighten(n.feature, -std::numeric_limits<double>::infinity(), n.threshold);
  collect_leaves(tree, n.left, std::move(left), prefix, path + "L", cs, effects);
  Cohort right = std::move(box);
  right.tighten(n.feature, n.threshold, std::numeric_limits<double>::infinity());
  collect_leaves(tree, n.right, std::move(right), prefix, path + "R", cs, effects);
}

}  // namespace

std::pair<CohortSet, std::vector<EffectEstimate>> tree_cohorts(const CausalTree& tree,
                                                               const std::string& id_prefix) {
  CohortSet cs;
  cs.num_features = tree.num_features;
  std::vector<EffectEstimate> effects;
  collect_leaves(tree, 0, Cohort{}, id_prefix, "", cs, effects);
  return {std::move(cs), std::move(effects)};
}

}  // namespace treatsel
