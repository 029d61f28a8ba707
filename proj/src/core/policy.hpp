#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "core/cohort.hpp"
#include "core/common.hpp"

namespace treatsel {

// A randomized treatment assignment: one probability row per cohort (mapped
// through the cohort partition) or per member (aligned with unit ids).
struct AssignmentPolicy {
  enum class Level { Cohort, Member };

  Level level = Level::Cohort;
  std::string method;
  std::vector<int> arms;  // arm labels; columns of the probability matrix
  std::vector<std::string> feature_names;
  std::vector<std::string> metric_names;
  std::optional<CohortSet> cohorts;   // cohort level
  std::vector<std::string> unit_ids;  // member level
  std::vector<double> probs;          // rows x arms.size(), row-major
  bool bias_corrected = false;
  bool least_violating = false;  // single-arm fallback that still violates a guardrail
  std::uint64_t seed = 0;
  std::string config_hash;

  std::size_t rows() const { return arms.empty() ? 0 : probs.size() / arms.size(); }
  std::span<const double> row(std::size_t r) const {
    return {probs.data() + r * arms.size(), arms.size()};
  }
  // Cohort-level lookup by feature vector.
  std::span<const double> row_for(std::span<const double> features) const;
  // Deterministic draw from the row's distribution.
  int draw_arm(std::span<const double> features, std::uint64_t draw_seed) const;

  void validate() const;
};

nlohmann::json policy_to_json(const AssignmentPolicy& p);
AssignmentPolicy policy_from_json(const nlohmann::json& j);

// Cohort predicate serialization shared with model files.
nlohmann::json cohort_to_json(const Cohort& c);
Cohort cohort_from_json(const nlohmann::json& j);
nlohmann::json cohort_set_to_json(const CohortSet& cs);
CohortSet cohort_set_from_json(const nlohmann::json& j);

}  // namespace treatsel
