#pragma once

#include <vector>

#include "core/cohort.hpp"
#include "core/effect.hpp"

namespace treatsel {

// One source partition with effects for a single (treatment, metric) pair,
// e.g. the leaves of a causal tree.
struct CohortModel {
  EffectKey key;
  CohortSet cohorts;
  std::vector<EffectEstimate> effects;  // aligned with cohorts
};

// Common refinement of the sources with effects inherited from each.
struct MergedModel {
  CohortSet cohorts;
  EffectTable effects;  // one column per source, in input order
};

// Iteratively refines the partition: each output cohort is a nonempty
// intersection of one cohort per source, and carries that source's effect for
// its column. Empty intersections are dropped. Source order is preserved in
// the effect table and in the concatenated cohort ids.
MergedModel merge_cohort_models(const std::vector<CohortModel>& sources, bool validate = true);

}  // namespace treatsel
