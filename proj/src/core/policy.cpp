#include "core/policy.hpp"

#include <cmath>
#include <limits>
#include <random>

namespace treatsel {

using nlohmann::json;

std::span<const double> AssignmentPolicy::row_for(std::span<const double> features) const {
  if (level != Level::Cohort || !cohorts) {
    throw Error::config("feature lookup requires a cohort-level policy");
  }
  int idx = cohorts->assign(features);
  return row(static_cast<std::size_t>(idx));
}

int AssignmentPolicy::draw_arm(std::span<const double> features, std::uint64_t draw_seed) const {
  auto p = row_for(features);
  std::mt19937_64 rng(derive_seed(draw_seed, "policy_draw"));
  double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  double acc = 0.0;
  for (std::size_t j = 0; j < p.size(); ++j) {
    acc += p[j];
    if (u < acc) return arms[j];
  }
  return arms.back();
}

void AssignmentPolicy::validate() const {
  if (arms.empty()) throw Error::data("policy lists no arms");
  for (std::size_t a = 0; a < arms.size(); ++a) {
    for (std::size_t b = a + 1; b < arms.size(); ++b) {
      if (arms[a] == arms[b]) throw Error::data("policy lists duplicate arm labels");
    }
  }
  if (probs.size() % arms.size() != 0) throw Error::data("policy probability matrix has ragged rows");
  const std::size_t r = rows();
  if (r == 0) throw Error::data("policy has no assignment rows");
  for (std::size_t i = 0; i < r; ++i) {
    double total = 0.0;
    for (double v : row(i)) {
      if (!(v >= -1e-12) || !std::isfinite(v)) {
        throw Error::data("policy probabilities must be finite and non-negative");
      }
      total += v;
    }
    if (std::fabs(total - 1.0) > 1e-9) {
      throw Error::data("policy row " + std::to_string(i) + " sums to " + std::to_string(total));
    }
  }
  if (level == Level::Cohort) {
    if (!cohorts) throw Error::data("cohort-level policy is missing its cohort set");
    if (cohorts->cohorts.size() != r) {
      throw Error::data("policy has " + std::to_string(r) + " rows for " +
                        std::to_string(cohorts->cohorts.size()) + " cohorts");
    }
  } else {
    if (unit_ids.size() != r) {
      throw Error::data("member-level policy has " + std::to_string(r) + " rows for " +
                        std::to_string(unit_ids.size()) + " unit ids");
    }
  }
}

json cohort_to_json(const Cohort& c) {
  json rules = json::array();
  for (const auto& b : c.bounds) {
    if (std::isfinite(b.lo)) rules.push_back({{"feature", b.feature}, {"op", "ge"}, {"threshold", b.lo}});
    if (std::isfinite(b.hi)) rules.push_back({{"feature", b.feature}, {"op", "lt"}, {"threshold", b.hi}});
  }
  return {{"id", c.id}, {"rules", rules}};
}

Cohort cohort_from_json(const json& j) {
  Cohort c;
  c.id = j.at("id").get<std::string>();
  for (const auto& r : j.at("rules")) {
    int f = r.at("feature").get<int>();
    double t = r.at("threshold").get<double>();
    const std::string op = r.at("op").get<std::string>();
    if (op == "ge") {
      c.tighten(f, t, std::numeric_limits<double>::infinity());
    } else if (op == "lt") {
      c.tighten(f, -std::numeric_limits<double>::infinity(), t);
    } else {
      throw Error::data("unknown cohort rule op '" + op + "'");
    }
  }
  return c;
}

json cohort_set_to_json(const CohortSet& cs) {
  json arr = json::array();
  for (const auto& c : cs.cohorts) arr.push_back(cohort_to_json(c));
  return {{"num_features", cs.num_features}, {"cohorts", arr}};
}

CohortSet cohort_set_from_json(const json& j) {
  CohortSet cs;
  cs.num_features = j.at("num_features").get<int>();
  for (const auto& c : j.at("cohorts")) cs.cohorts.push_back(cohort_from_json(c));
  return cs;
}

json policy_to_json(const AssignmentPolicy& p) {
  p.validate();
  json out;
  out["format"] = "assignment_policy";
  out["version"] = 1;
  out["level"] = p.level == AssignmentPolicy::Level::Cohort ? "cohort" : "member";
  out["method"] = p.method;
  out["arms"] = p.arms;
  out["feature_names"] = p.feature_names;
  out["metric_names"] = p.metric_names;
  out["bias_corrected"] = p.bias_corrected;
  out["least_violating"] = p.least_violating;
  out["provenance"] = {{"seed", p.seed}, {"config_hash", p.config_hash}};
  if (p.level == AssignmentPolicy::Level::Cohort) {
    out["cohorts"] = cohort_set_to_json(*p.cohorts);
  } else {
    out["unit_ids"] = p.unit_ids;
  }
  json rows = json::array();
  for (std::size_t i = 0; i < p.rows(); ++i) {
    json row = json::array();
    for (double v : p.row(i)) row.push_back(v);
    rows.push_back(std::move(row));
  }
  out["assignments"] = std::move(rows);
  return out;
}

AssignmentPolicy policy_from_json(const json& j) {
  if (j.value("format", "") != "assignment_policy") {
    throw Error::data("not an assignment policy file");
  }
  if (j.value("version", 0) != 1) {
    throw Error::data("unsupported policy file version " + std::to_string(j.value("version", 0)));
  }
  AssignmentPolicy p;
  const std::string level = j.at("level").get<std::string>();
  if (level == "cohort") {
    p.level = AssignmentPolicy::Level::Cohort;
  } else if (level == "member") {
    p.level = AssignmentPolicy::Level::Member;
  } else {
    throw Error::data("unknown policy level '" + level + "'");
  }
  p.method = j.value("method", "");
  p.arms = j.at("arms").get<std::vector<int>>();
  p.feature_names = j.value("feature_names", std::vector<std::string>{});
  p.metric_names = j.value("metric_names", std::vector<std::string>{});
  p.bias_corrected = j.value("bias_corrected", false);
  p.least_violating = j.value("least_violating", false);
  if (j.contains("provenance")) {
    p.seed = j["provenance"].value("seed", std::uint64_t{0});
    p.config_hash = j["provenance"].value("config_hash", "");
  }
  if (p.level == AssignmentPolicy::Level::Cohort) {
    p.cohorts = cohort_set_from_json(j.at("cohorts"));
  } else {
    p.unit_ids = j.at("unit_ids").get<std::vector<std::string>>();
  }
  for (const auto& row : j.at("assignments")) {
    for (const auto& v : row) p.probs.push_back(v.get<double>());
  }
  p.validate();
  return p;
}

}  // namespace treatsel
