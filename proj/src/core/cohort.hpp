#pragma once

#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "core/common.hpp"

namespace treatsel {

// Axis-aligned box: per-feature half-open interval [lo, hi). A feature with
// no bound is unbounded on that side.
struct FeatureBound {
  int feature = 0;
  double lo = -std::numeric_limits<double>::infinity();
  double hi = std::numeric_limits<double>::infinity();
};

struct Cohort {
  std::string id;
  std::vector<FeatureBound> bounds;  // sorted by feature index, at most one entry per feature

  bool contains(std::span<const double> features) const;
  void tighten(int feature, double lo, double hi);
  bool empty() const;
};

// Intersection of two cohorts; nullopt when provably empty (some interval
// collapses to lo >= hi).
std::optional<Cohort> intersect(const Cohort& a, const Cohort& b);

// A partition of feature space into cohorts: every point belongs to exactly
// one cohort.
struct CohortSet {
  int num_features = 0;
  std::vector<Cohort> cohorts;

  // Index of the unique cohort containing the point.
  int assign(std::span<const double> features) const;

  // First matching cohort without the uniqueness scan; safe after the set has
  // been validated as a partition.
  int assign_first(std::span<const double> features) const;

  // Structural disjointness plus probe-based exhaustiveness. Throws on
  // violation.
  void validate_partition(std::size_t probes = 256, std::uint64_t seed = 7) const;

  static CohortSet whole_space(int num_features, std::string id = "all");
};

}  // namespace treatsel
