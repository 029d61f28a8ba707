#pragma once

#include <string>
#include <vector>

#include "json.hpp"

#include "core/assignment_problem.hpp"
#include "core/causal_tree.hpp"
#include "core/common.hpp"
#include "core/dataset.hpp"
#include "core/member_effects.hpp"
#include "core/regression_forest.hpp"

// JSON <-> config helpers shared by the pipeline and the simulation harness.
namespace treatsel {

template <typename T>
T json_get_or(const nlohmann::json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  return j.at(key).get<T>();
}

inline void causal_tree_config_from_json(const nlohmann::json& t, CausalTreeConfig& cfg) {
  cfg.alpha = json_get_or(t, "alpha", cfg.alpha);
  cfg.min_leaf_per_arm = json_get_or(t, "min_leaf_per_arm", cfg.min_leaf_per_arm);
  cfg.max_depth = json_get_or(t, "max_depth", cfg.max_depth);
  cfg.thresholds_per_feature = json_get_or(t, "thresholds_per_feature", cfg.thresholds_per_feature);
  cfg.mtry = json_get_or(t, "mtry", cfg.mtry);
}

inline void causal_forest_config_from_json(const nlohmann::json& f, CausalForestConfig& cfg) {
  cfg.n_trees = json_get_or(f, "n_trees", cfg.n_trees);
  cfg.subsample_fraction = json_get_or(f, "subsample_fraction", cfg.subsample_fraction);
  if (f.contains("tree")) causal_tree_config_from_json(f.at("tree"), cfg.tree);
}

inline void regression_forest_config_from_json(const nlohmann::json& r, RegressionForestConfig& cfg) {
  cfg.n_trees = json_get_or(r, "n_trees", cfg.n_trees);
  cfg.bootstrap = json_get_or(r, "bootstrap", cfg.bootstrap);
  if (r.contains("tree")) {
    const nlohmann::json& t = r.at("tree");
    cfg.tree.max_depth = json_get_or(t, "max_depth", cfg.tree.max_depth);
    cfg.tree.min_leaf = json_get_or(t, "min_leaf", cfg.tree.min_leaf);
    cfg.tree.thresholds_per_feature =
        json_get_or(t, "thresholds_per_feature", cfg.tree.thresholds_per_feature);
    cfg.tree.mtry = json_get_or(t, "mtry", cfg.tree.mtry);
  }
}

inline CsvSchema csv_schema_from_json(const nlohmann::json& s) {
  CsvSchema schema;
  schema.id_column = json_get_or<std::string>(s, "id_column", schema.id_column);
  schema.variant_column = json_get_or<std::string>(s, "variant_column", schema.variant_column);
  schema.feature_columns = json_get_or(s, "feature_columns", std::vector<std::string>{});
  schema.metric_columns = json_get_or(s, "metric_columns", std::vector<std::string>{});
  schema.num_treatments = json_get_or(s, "num_treatments", -1);
  const std::string delim = json_get_or<std::string>(s, "delimiter", ",");
  if (delim.size() != 1) throw Error::config("schema delimiter must be one character");
  schema.delimiter = delim[0];
  return schema;
}

inline nlohmann::json csv_schema_to_json(const CsvSchema& s) {
  return nlohmann::json{{"id_column", s.id_column},
                        {"variant_column", s.variant_column},
                        {"feature_columns", s.feature_columns},
                        {"metric_columns", s.metric_columns},
                        {"num_treatments", s.num_treatments},
                        {"delimiter", std::string(1, s.delimiter)}};
}

}  // namespace treatsel
