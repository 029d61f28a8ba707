#include "core/simulate.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <random>
#include <unordered_map>

#include "core/config_json.hpp"
#include "core/estimate.hpp"
#include "core/merge.hpp"

namespace treatsel {

namespace {

double sign_of(double v) { return v < 0.0 ? -1.0 : 1.0; }

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

}  // namespace

std::vector<std::vector<double>> draw_weights(int treatments, int guardrails, std::uint64_t seed) {
  if (treatments < 1 || guardrails < 0) throw Error::config("draw_weights: need treatments >= 1, guardrails >= 0");
  std::mt19937_64 rng(derive_seed(seed, "draw_weights"));
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  std::vector<std::vector<double>> w(treatments, std::vector<double>(guardrails + 1));
  for (auto& row : w) {
    for (auto& v : row) v = unif(rng);
  }
  // Force every arm to trade off: at least one guardrail moves against the
  // objective, or the constrained problem would be vacuous.
  if (guardrails > 0) {
    std::uniform_int_distribution<int> pick(1, guardrails);
    for (auto& row : w) {
      bool opposed = false;
      for (int k = 1; k <= guardrails; ++k) {
        if (sign_of(row[k]) != sign_of(row[0])) opposed = true;
      }
      if (!opposed) {
        int k = pick(rng);
        row[k] = -row[k];
      }
    }
  }
  return w;
}

ExperimentDataset generate_dataset(const SimConfig& cfg) {
  const int J = cfg.treatments;
  const int K = cfg.guardrails;
  const int M = cfg.het_dims;
  const long n = cfg.units;
  if (J < 1) throw Error::config("simulate: treatments must be >= 1");
  if (K < 0) throw Error::config("simulate: guardrails must be >= 0");
  if (M < 1) throw Error::config("simulate: het_dims must be >= 1");
  if (n < 2) throw Error::config("simulate: units must be >= 2");
  if (cfg.uncertainty_weight < 0.0) throw Error::config("simulate: uncertainty_weight must be >= 0");
  if (!cfg.baseline.empty() && static_cast<int>(cfg.baseline.size()) != K + 1)
    throw Error::config("simulate: baseline must have guardrails+1 entries");
  if (!cfg.h_assignment.empty() && static_cast<int>(cfg.h_assignment.size()) != J)
    throw Error::config("simulate: h_assignment must have one entry per treatment");
  for (int m : cfg.h_assignment) {
    if (m < 0 || m >= M) throw Error::config("simulate: h_assignment index out of range");
  }
  std::vector<std::vector<double>> w = cfg.weights;
  if (w.empty()) {
    w = draw_weights(J, K, derive_seed(cfg.seed, "weights"));
  }
  if (static_cast<int>(w.size()) != J) throw Error::config("simulate: weights must have one row per treatment");
  for (const auto& row : w) {
    if (static_cast<int>(row.size()) != K + 1)
      throw Error::config("simulate: each weight row must have guardrails+1 entries");
  }
  std::vector<int> h(J);
  for (int j = 0; j < J; ++j) h[j] = cfg.h_assignment.empty() ? j % M : cfg.h_assignment[j];
  std::vector<double> baseline = cfg.baseline;
  if (baseline.empty()) baseline.assign(K + 1, 1.0);

  const double sd_common = cfg.uncertainty_weight * cfg.noise_scale_common;
  const double sd_metric = cfg.uncertainty_weight * cfg.noise_scale_metric;
  std::vector<double> colsum(K + 1, 0.0);
  for (int k = 0; k <= K; ++k) {
    for (int j = 0; j < J; ++j) colsum[k] += w[j][k];
  }

  ExperimentDataset ds;
  ds.num_treatments = J;
  for (int m = 0; m < M; ++m) ds.feature_names.push_back("h" + std::to_string(m + 1));
  for (int k = 0; k <= K; ++k) ds.metric_names.push_back("y" + std::to_string(k));
  ds.unit_ids.reserve(n);
  ds.features.resize(static_cast<std::size_t>(n) * M);
  ds.variants.resize(n);
  ds.outcomes.resize(static_cast<std::size_t>(n) * (K + 1));
  ds.counterfactuals.resize(static_cast<std::size_t>(n) * (J + 1) * (K + 1));

  // Separate streams so the trait draw is stable across noise settings.
  std::mt19937_64 rng_h(derive_seed(cfg.seed, "traits"));
  std::mt19937_64 rng_u(derive_seed(cfg.seed, "common"));
  std::mt19937_64 rng_e(derive_seed(cfg.seed, "noise"));
  std::mt19937_64 rng_v(derive_seed(cfg.seed, "variant"));
  std::normal_distribution<double> stdnorm(0.0, 1.0);
  std::uniform_int_distribution<int> arm_dist(0, J);

  std::vector<double> eps(K + 1);
  for (long i = 0; i < n; ++i) {
    ds.unit_ids.push_back("u" + std::to_string(i + 1));
    for (int m = 0; m < M; ++m) ds.features[static_cast<std::size_t>(i) * M + m] = stdnorm(rng_h);
    const double u_common = sd_common * stdnorm(rng_u);
    for (int k = 0; k <= K; ++k) eps[k] = sd_metric * stdnorm(rng_e);
    for (int a = 0; a <= J; ++a) {
      double het = 0.0;
      if (a > 0) {
        const double hv = ds.features[static_cast<std::size_t>(i) * M + h[a - 1]];
        het = hv * hv;
      }
      for (int k = 0; k <= K; ++k) {
        const double value = baseline[k] + (a > 0 ? w[a - 1][k] * het : 0.0) + colsum[k] * u_common + eps[k];
        ds.counterfactuals[(static_cast<std::size_t>(i) * (J + 1) + a) * (K + 1) + k] = value;
      }
    }
    const int v = arm_dist(rng_v);
    ds.variants[i] = v;
    for (int k = 0; k <= K; ++k) {
      ds.outcomes[static_cast<std::size_t>(i) * (K + 1) + k] =
          ds.counterfactuals[(static_cast<std::size_t>(i) * (J + 1) + v) * (K + 1) + k];
    }
  }
  ds.validate();
  return ds;
}

PolicyEvaluation evaluate_policy(const AssignmentPolicy& policy, const ExperimentDataset& ds) {
  if (!ds.has_counterfactuals()) throw Error::data("evaluate_policy: dataset has no counterfactuals");
  policy.validate();
  const long n = static_cast<long>(ds.n());
  const int J = ds.num_treatments;
  const int num_metrics = ds.num_metrics();
  for (int a : policy.arms) {
    if (a < 0 || a > J) throw Error::data("evaluate_policy: policy arm outside dataset arm range");
  }

  std::unordered_map<std::string, std::size_t> member_row;
  if (policy.level == AssignmentPolicy::Level::Member) {
    member_row.reserve(policy.unit_ids.size());
    for (std::size_t r = 0; r < policy.unit_ids.size(); ++r) member_row.emplace(policy.unit_ids[r], r);
  }

  PolicyEvaluation out;
  out.units = n;
  out.control_mean.assign(num_metrics, 0.0);
  out.tau.assign(num_metrics, 0.0);
  for (long i = 0; i < n; ++i) {
    for (int k = 0; k < num_metrics; ++k) out.control_mean[k] += ds.cf(i, 0, k);
  }
  for (int k = 0; k < num_metrics; ++k) {
    out.control_mean[k] /= static_cast<double>(n);
    if (std::abs(out.control_mean[k]) < 1e-12) {
      throw Error::data("evaluate_policy: control mean of metric " + std::to_string(k) +
                        " is zero; normalized lift undefined");
    }
  }

  for (long i = 0; i < n; ++i) {
    std::span<const double> probs;
    if (policy.level == AssignmentPolicy::Level::Cohort) {
      probs = policy.row_for(ds.feature_row(i));
    } else {
      auto it = member_row.find(ds.unit_ids[i]);
      if (it == member_row.end()) {
        throw Error::data("evaluate_policy: policy has no row for unit " + ds.unit_ids[i]);
      }
      probs = policy.row(it->second);
    }
    for (std::size_t c = 0; c < policy.arms.size(); ++c) {
      const int a = policy.arms[c];
      if (a == 0 || probs[c] == 0.0) continue;
      for (int k = 0; k < num_metrics; ++k) {
        out.tau[k] += probs[c] * (ds.cf(i, a, k) - ds.cf(i, 0, k));
      }
    }
  }
  for (int k = 0; k < num_metrics; ++k) {
    out.tau[k] /= static_cast<double>(n) * out.control_mean[k];
  }
  return out;
}

CohortSet heuristic_cohorts(const ExperimentDataset& ds, const std::vector<int>& columns) {
  if (columns.empty()) throw Error::config("heuristic_cohorts: need at least one column");
  if (ds.n() == 0) throw Error::data("heuristic_cohorts: empty dataset");
  for (int c : columns) {
    if (c < 0 || c >= ds.num_features()) throw Error::config("heuristic_cohorts: column out of range");
  }
  if (columns.size() > 20) throw Error::config("heuristic_cohorts: too many columns");

  std::vector<double> medians(columns.size());
  std::vector<double> vals(ds.n());
  for (std::size_t c = 0; c < columns.size(); ++c) {
    for (std::size_t i = 0; i < ds.n(); ++i) vals[i] = ds.feature(i, columns[c]);
    auto mid = vals.begin() + static_cast<long>(vals.size() / 2);
    std::nth_element(vals.begin(), mid, vals.end());
    medians[c] = *mid;
  }

  CohortSet cs;
  cs.num_features = ds.num_features();
  const std::size_t cells = std::size_t{1} << columns.size();
  for (std::size_t mask = 0; mask < cells; ++mask) {
    Cohort cohort;
    std::string id;
    for (std::size_t c = 0; c < columns.size(); ++c) {
      const bool hi = (mask >> c) & 1;
      FeatureBound b;
      b.feature = columns[c];
      if (hi) {
        b.lo = medians[c];
      } else {
        b.hi = medians[c];
      }
      cohort.bounds.push_back(b);
      if (!id.empty()) id += "&";
      id += ds.feature_names[columns[c]] + (hi ? "_hi" : "_lo");
    }
    std::sort(cohort.bounds.begin(), cohort.bounds.end(),
              [](const FeatureBound& a, const FeatureBound& b) { return a.feature < b.feature; });
    cohort.id = id;
    cs.cohorts.push_back(std::move(cohort));
  }
  return cs;
}

AssignmentPolicy global_best_policy(const EffectTable& global_effects,
                                    const std::vector<double>& control_means,
                                    const std::vector<GuardrailSpec>& guardrails,
                                    int num_treatments, int num_features,
                                    const std::vector<std::string>& feature_names,
                                    const std::vector<std::string>& metric_names) {
  const int J = num_treatments;
  const int K = static_cast<int>(guardrails.size());
  if (global_effects.n_cohorts() != 1) throw Error::config("global_best_policy: expects a single whole-population cohort");
  if (static_cast<int>(control_means.size()) < K + 1)
    throw Error::config("global_best_policy: control_means must cover objective and guardrails");
  for (int k = 0; k <= K; ++k) {
    if (std::abs(control_means[k]) < 1e-12) throw Error::data("global_best_policy: zero control mean");
  }

  int best_feasible = -1;
  double best_feasible_obj = 0.0;
  int best_any = -1;
  double best_any_violation = 0.0;
  double best_any_obj = 0.0;
  for (int j = 1; j <= J; ++j) {
    const double obj = global_effects.get(0, j, 0).tau / control_means[0];
    double violation = 0.0;
    for (int k = 1; k <= K; ++k) {
      const double g = global_effects.get(0, j, k).tau / control_means[k];
      const GuardrailSpec& spec = guardrails[k - 1];
      double excess = 0.0;
      switch (spec.direction) {
        case GuardrailSpec::Direction::Le: excess = g - spec.threshold; break;
        case GuardrailSpec::Direction::Ge: excess = spec.threshold - g; break;
        case GuardrailSpec::Direction::Band: excess = std::abs(g) - spec.threshold; break;
      }
      violation = std::max(violation, excess);
    }
    if (violation <= 1e-12) {
      if (best_feasible < 0 || obj > best_feasible_obj) {
        best_feasible = j;
        best_feasible_obj = obj;
      }
    }
    if (best_any < 0 || violation < best_any_violation ||
        (violation == best_any_violation && obj > best_any_obj)) {
      best_any = j;
      best_any_violation = violation;
      best_any_obj = obj;
    }
  }

  const int chosen = best_feasible > 0 ? best_feasible : best_any;
  AssignmentPolicy p;
  p.level = AssignmentPolicy::Level::Cohort;
  p.method = "Global";
  p.feature_names = feature_names;
  p.metric_names = metric_names;
  p.cohorts = CohortSet::whole_space(num_features);
  p.arms.resize(J + 1);
  for (int a = 0; a <= J; ++a) p.arms[a] = a;
  p.probs.assign(J + 1, 0.0);
  p.probs[chosen] = 1.0;
  p.least_violating = best_feasible < 0;
  p.validate();
  return p;
}

namespace {

struct CellContext {
  const ComparisonConfig* cfg = nullptr;
  const ExperimentDataset* train = nullptr;
  const ExperimentDataset* test = nullptr;
  std::vector<double> control_means;  // observed on train
  std::vector<GuardrailSpec> opt_guardrails;
  std::uint64_t cell_seed = 0;
};

AssignmentPolicy cohort_policy_from_x(const std::string& method, const CellContext& ctx,
                                      CohortSet cohorts, const std::vector<double>& x) {
  AssignmentPolicy p;
  p.level = AssignmentPolicy::Level::Cohort;
  p.method = method;
  p.feature_names = ctx.train->feature_names;
  p.metric_names = ctx.train->metric_names;
  const int J = ctx.train->num_treatments;
  p.arms.resize(J + 1);
  for (int a = 0; a <= J; ++a) p.arms[a] = a;
  p.cohorts = std::move(cohorts);
  p.probs = x;
  p.validate();
  return p;
}

AssignmentPolicy solve_cohort_method(const std::string& method, const CellContext& ctx,
                                     const CohortSet& cohorts, const EffectTable& table,
                                     std::uint64_t solver_seed) {
  const auto shares = cohort_shares(*ctx.train, cohorts);
  const auto ap = build_assignment_problem(table, shares, ctx.control_means, ctx.opt_guardrails,
                                           ctx.train->num_treatments, /*include_control=*/true);
  McsaConfig mc;
  mc.iterations = ctx.cfg->mcsa_iterations;
  mc.samples_per_step = ctx.cfg->mcsa_samples;
  mc.gamma0 = ctx.cfg->mcsa_gamma0;
  mc.eta0.assign(ap.stochastic.K, ctx.cfg->mcsa_eta0);
  mc.prox = ctx.cfg->mcsa_prox;
  mc.seed = solver_seed;
  mc.record_trace = false;
  const McsaResult res = mcsa_solve(ap.stochastic, mc);
  return cohort_policy_from_x(method, ctx, cohorts, res.x_hat);
}

AssignmentPolicy fit_global(const CellContext& ctx) {
  const CohortSet whole = CohortSet::whole_space(ctx.train->num_features());
  const EffectTable table = diff_in_means_by_cohort(*ctx.train, whole);
  // The single-arm baseline cannot hold a metric at exactly zero, so it gets
  // the reporting tolerance rather than the optimizer target.
  std::vector<GuardrailSpec> tol(ctx.opt_guardrails.size());
  for (std::size_t k = 0; k < tol.size(); ++k) {
    tol[k].direction = GuardrailSpec::Direction::Band;
    tol[k].threshold = ctx.cfg->violation_flag_level;
  }
  return global_best_policy(table, ctx.control_means, tol, ctx.train->num_treatments,
                            ctx.train->num_features(), ctx.train->feature_names,
                            ctx.train->metric_names);
}

AssignmentPolicy fit_heuristic(const CellContext& ctx) {
  std::vector<int> columns;
  for (int c = 0; c < std::min(4, ctx.train->num_features()); ++c) columns.push_back(c);
  const CohortSet cs = heuristic_cohorts(*ctx.train, columns);
  const EffectTable table = diff_in_means_by_cohort(*ctx.train, cs);
  return solve_cohort_method("HT.ST", ctx, cs, table, derive_seed(ctx.cell_seed, "mcsa_ht"));
}

AssignmentPolicy fit_causal_tree_method(const CellContext& ctx) {
  const int J = ctx.train->num_treatments;
  const int num_metrics = ctx.train->num_metrics();
  const HonestSplit hs = honest_split(*ctx.train, 0.5, derive_seed(ctx.cell_seed, "honest"));
  std::vector<CohortModel> sources;
  for (int k = 0; k < num_metrics; ++k) {
    for (int j = 1; j <= J; ++j) {
      CausalTreeConfig tc = ctx.cfg->tree;
      tc.seed = derive_seed(ctx.cell_seed, "tree_" + std::to_string(j) + "_" + std::to_string(k));
      const CausalTree tree = fit_causal_tree(hs, j, k, tc);
      auto [cs, effects] = tree_cohorts(tree, "t" + std::to_string(j) + "m" + std::to_string(k));
      sources.push_back(CohortModel{EffectKey{j, k}, std::move(cs), std::move(effects)});
    }
  }
  MergedModel merged = merge_cohort_models(sources);
  return solve_cohort_method("CT.ST", ctx, merged.cohorts, merged.effects,
                             derive_seed(ctx.cell_seed, "mcsa_ct"));
}

AssignmentPolicy member_policy_from_x(const std::string& method, const CellContext& ctx,
                                      const std::vector<double>& x) {
  AssignmentPolicy p;
  p.level = AssignmentPolicy::Level::Member;
  p.method = method;
  p.feature_names = ctx.test->feature_names;
  p.metric_names = ctx.test->metric_names;
  const int J = ctx.test->num_treatments;
  p.arms.resize(J + 1);
  for (int a = 0; a <= J; ++a) p.arms[a] = a;
  p.unit_ids = ctx.test->unit_ids;
  p.probs = x;
  p.validate();
  return p;
}

AssignmentPolicy solve_member_method(const std::string& method, const CellContext& ctx,
                                     const EffectTable& table) {
  const std::size_t n = ctx.test->n();
  const std::vector<double> unit_weight(n, 1.0 / static_cast<double>(n));
  const auto ap = build_assignment_problem(table, unit_weight, ctx.control_means, ctx.opt_guardrails,
                                           ctx.test->num_treatments, /*include_control=*/true);
  const LpSolution sol = saa_solve(ap.deterministic);
  if (sol.status != LpStatus::Optimal) {
    throw Error::infeasible("comparison: deterministic assignment infeasible for " + method);
  }
  return member_policy_from_x(method, ctx, sol.x);
}

AssignmentPolicy fit_causal_forest_method(const CellContext& ctx) {
  const int J = ctx.train->num_treatments;
  const int num_metrics = ctx.train->num_metrics();
  const std::size_t n = ctx.test->n();
  EffectTable table(n, metric_major_sources(J, num_metrics));
  for (int k = 0; k < num_metrics; ++k) {
    for (int j = 1; j <= J; ++j) {
      CausalForestConfig fc = ctx.cfg->forest;
      fc.seed = derive_seed(ctx.cell_seed, "forest_" + std::to_string(j) + "_" + std::to_string(k));
      const CausalForest forest = fit_causal_forest(*ctx.train, j, k, fc);
      const std::size_t s = static_cast<std::size_t>(table.source_index(j, k));
      for (std::size_t i = 0; i < n; ++i) {
        table.at(i, s) = forest_effect(forest, ctx.test->feature_row(i));
      }
    }
  }
  return solve_member_method("CF.DT", ctx, table);
}

AssignmentPolicy fit_two_model_method(const CellContext& ctx) {
  const int J = ctx.train->num_treatments;
  const int num_metrics = ctx.train->num_metrics();
  const std::size_t n = ctx.test->n();
  EffectTable table(n, metric_major_sources(J, num_metrics));
  for (int k = 0; k < num_metrics; ++k) {
    for (int j = 1; j <= J; ++j) {
      TwoModelConfig tc;
      tc.regressor = ctx.cfg->regressor;
      tc.seed = derive_seed(ctx.cell_seed, "two_model_" + std::to_string(j) + "_" + std::to_string(k));
      const TwoModel tm = fit_two_model(*ctx.train, j, k, tc);
      const std::size_t s = static_cast<std::size_t>(table.source_index(j, k));
      for (std::size_t i = 0; i < n; ++i) {
        EffectEstimate e;
        e.tau = two_model_effect(tm, ctx.test->feature_row(i));
        e.n_treat = 1;
        e.n_control = 1;
        table.at(i, s) = e;
      }
    }
  }
  return solve_member_method("TM.DT", ctx, table);
}

AssignmentPolicy fit_method(const std::string& method, const CellContext& ctx) {
  if (method == "Global") return fit_global(ctx);
  if (method == "HT.ST") return fit_heuristic(ctx);
  if (method == "CT.ST") return fit_causal_tree_method(ctx);
  if (method == "CF.DT") return fit_causal_forest_method(ctx);
  if (method == "TM.DT") return fit_two_model_method(ctx);
  throw Error::config("comparison: unknown method " + method);
}

}  // namespace

std::string ComparisonResult::to_csv() const {
  std::string out = "method,weight,repeat,metric,tau,guardrail_violated,least_violating\n";
  for (const auto& r : rows) {
    out += r.method;
    out += ',' + fmt_double(r.weight);
    out += ',' + std::to_string(r.repeat_idx);
    out += ',' + std::to_string(r.metric);
    out += ',' + fmt_double(r.tau);
    out += ',';
    out += r.guardrail_violated ? '1' : '0';
    out += ',';
    out += r.least_violating ? '1' : '0';
    out += '\n';
  }
  return out;
}

std::string ComparisonResult::summary_csv() const {
  // Aggregate over repeats: one row per (method, weight).
  int num_metrics = 0;
  for (const auto& r : rows) num_metrics = std::max(num_metrics, r.metric + 1);
  std::vector<std::pair<std::string, double>> keys;
  for (const auto& r : rows) {
    std::pair<std::string, double> key{r.method, r.weight};
    if (std::find(keys.begin(), keys.end(), key) == keys.end()) keys.push_back(key);
  }
  std::string out = "method,weight";
  for (int k = 0; k < num_metrics; ++k) {
    out += ",tau" + std::to_string(k) + "_mean,tau" + std::to_string(k) + "_sd";
  }
  out += '\n';
  for (const auto& key : keys) {
    out += key.first + ',' + fmt_double(key.second);
    for (int k = 0; k < num_metrics; ++k) {
      ArmStats s;
      for (const auto& r : rows) {
        if (r.method == key.first && r.weight == key.second && r.metric == k) s.add(r.tau);
      }
      out += ',' + fmt_double(s.mean());
      out += ',' + fmt_double(std::sqrt(s.variance()));
    }
    out += '\n';
  }
  return out;
}

SimConfig sim_config_from_json(const nlohmann::json& j) {
  try {
    SimConfig cfg;
    cfg.treatments = json_get_or(j, "treatments", cfg.treatments);
    cfg.guardrails = json_get_or(j, "guardrails", cfg.guardrails);
    cfg.het_dims = json_get_or(j, "het_dims", cfg.het_dims);
    cfg.units = json_get_or(j, "units", cfg.units);
    cfg.uncertainty_weight = json_get_or(j, "uncertainty_weight", cfg.uncertainty_weight);
    cfg.noise_scale_common = json_get_or(j, "noise_scale_common", cfg.noise_scale_common);
    cfg.noise_scale_metric = json_get_or(j, "noise_scale_metric", cfg.noise_scale_metric);
    cfg.baseline = json_get_or(j, "baseline", std::vector<double>{});
    cfg.weights = json_get_or(j, "weights", std::vector<std::vector<double>>{});
    cfg.h_assignment = json_get_or(j, "h_assignment", std::vector<int>{});
    cfg.seed = json_get_or<std::uint64_t>(j, "seed", 0);
    return cfg;
  } catch (const nlohmann::json::exception& e) {
    throw Error::config(std::string("simulate config: ") + e.what());
  }
}

ComparisonConfig comparison_config_from_json(const nlohmann::json& j) {
  try {
    ComparisonConfig cfg;
    if (j.contains("base")) cfg.base = sim_config_from_json(j.at("base"));
    cfg.weights = json_get_or(j, "weights", cfg.weights);
    cfg.repeats = json_get_or(j, "repeats", cfg.repeats);
    cfg.n_train = json_get_or(j, "n_train", cfg.n_train);
    cfg.n_test = json_get_or(j, "n_test", cfg.n_test);
    cfg.methods = json_get_or(j, "methods", cfg.methods);
    cfg.guardrail_band = json_get_or(j, "guardrail_band", cfg.guardrail_band);
    cfg.violation_flag_level = json_get_or(j, "violation_flag_level", cfg.violation_flag_level);
    if (j.contains("tree")) causal_tree_config_from_json(j.at("tree"), cfg.tree);
    if (j.contains("forest")) causal_forest_config_from_json(j.at("forest"), cfg.forest);
    if (j.contains("regressor")) regression_forest_config_from_json(j.at("regressor"), cfg.regressor);
    cfg.mcsa_iterations = json_get_or(j, "mcsa_iterations", cfg.mcsa_iterations);
    cfg.mcsa_samples = json_get_or(j, "mcsa_samples", cfg.mcsa_samples);
    cfg.mcsa_eta0 = json_get_or(j, "mcsa_eta0", cfg.mcsa_eta0);
    cfg.mcsa_gamma0 = json_get_or(j, "mcsa_gamma0", cfg.mcsa_gamma0);
    const std::string prox = json_get_or<std::string>(j, "mcsa_prox", "sgd");
    if (prox == "sgd") {
      cfg.mcsa_prox = ProxKind::Sgd;
    } else if (prox == "adagrad") {
      cfg.mcsa_prox = ProxKind::Adagrad;
    } else {
      throw Error::config("comparison config: mcsa_prox must be sgd or adagrad");
    }
    cfg.seed = json_get_or<std::uint64_t>(j, "seed", 0);
    return cfg;
  } catch (const nlohmann::json::exception& e) {
    throw Error::config(std::string("comparison config: ") + e.what());
  }
}

ComparisonResult run_comparison(const ComparisonConfig& cfg) {
  if (cfg.repeats < 1) throw Error::config("comparison: repeats must be >= 1");
  if (cfg.weights.empty()) throw Error::config("comparison: weight grid is empty");
  if (cfg.methods.empty()) throw Error::config("comparison: no methods selected");
  if (cfg.n_train < 4 || cfg.n_test < 4) throw Error::config("comparison: train/test sizes too small");
  const int K = cfg.base.guardrails;

  ComparisonResult result;
  result.manifest["seed"] = cfg.seed;
  result.manifest["weights"] = cfg.weights;
  result.manifest["repeats"] = cfg.repeats;
  result.manifest["n_train"] = cfg.n_train;
  result.manifest["n_test"] = cfg.n_test;
  result.manifest["methods"] = cfg.methods;
  result.manifest["guardrail_band"] = cfg.guardrail_band;
  result.manifest["violation_flag_level"] = cfg.violation_flag_level;
  result.manifest["cells"] = nlohmann::json::array();
  result.manifest["failures"] = nlohmann::json::array();

  for (int r = 0; r < cfg.repeats; ++r) {
    const std::uint64_t rep_seed = derive_seed(cfg.seed, "rep_" + std::to_string(r));
    std::vector<std::vector<double>> w = cfg.base.weights;
    if (w.empty()) w = draw_weights(cfg.base.treatments, K, derive_seed(rep_seed, "weights"));
    nlohmann::json rep_entry;
    rep_entry["repeat"] = r;
    rep_entry["W"] = w;

    for (std::size_t wi = 0; wi < cfg.weights.size(); ++wi) {
      const double weight = cfg.weights[wi];
      CellContext ctx;
      ctx.cfg = &cfg;
      ctx.cell_seed = derive_seed(rep_seed, "w_" + std::to_string(wi));
      ctx.opt_guardrails.assign(K, GuardrailSpec{GuardrailSpec::Direction::Band, cfg.guardrail_band});

      SimConfig sim = cfg.base;
      sim.weights = w;
      sim.uncertainty_weight = weight;
      sim.units = cfg.n_train;
      sim.seed = derive_seed(ctx.cell_seed, "train");
      const ExperimentDataset train = generate_dataset(sim);
      sim.units = cfg.n_test;
      sim.seed = derive_seed(ctx.cell_seed, "test");
      const ExperimentDataset test = generate_dataset(sim);
      ctx.train = &train;
      ctx.test = &test;
      ctx.control_means = observed_control_means(train);

      nlohmann::json cell;
      cell["repeat"] = r;
      cell["weight"] = weight;
      cell["seed"] = ctx.cell_seed;
      cell["methods"] = nlohmann::json::object();
      for (const std::string& method : cfg.methods) {
        const auto t0 = std::chrono::steady_clock::now();
        try {
          const AssignmentPolicy policy = fit_method(method, ctx);
          const PolicyEvaluation eval = evaluate_policy(policy, test);
          bool violated = false;
          for (int k = 1; k <= K; ++k) {
            if (std::abs(eval.tau[k]) > cfg.violation_flag_level) violated = true;
          }
          for (int k = 0; k <= K; ++k) {
            ComparisonRow row;
            row.method = method;
            row.weight = weight;
            row.repeat_idx = r;
            row.metric = k;
            row.tau = eval.tau[k];
            row.guardrail_violated = violated;
            row.least_violating = policy.least_violating;
            result.rows.push_back(std::move(row));
          }
        } catch (const Error& e) {
          nlohmann::json fail;
          fail["method"] = method;
          fail["repeat"] = r;
          fail["weight"] = weight;
          fail["error"] = e.what();
          result.manifest["failures"].push_back(std::move(fail));
        }
        const auto t1 = std::chrono::steady_clock::now();
        cell["methods"][method] =
            std::chrono::duration_cast<std::chrono::milliseconds>(t1 - t0).count() / 1000.0;
      }
      result.manifest["cells"].push_back(std::move(cell));
    }
    result.manifest["W_per_repeat"].push_back(std::move(rep_entry));
  }
  return result;
}

}  // namespace treatsel
