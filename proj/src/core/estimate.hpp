#pragma once

#include <vector>

#include "core/cohort.hpp"
#include "core/dataset.hpp"
#include "core/effect.hpp"

namespace treatsel {

// Mean outcome of the control arm per metric. Errors if the control arm is
// empty or a mean is zero (the relative-lift normalization needs it).
std::vector<double> observed_control_means(const ExperimentDataset& ds);

// Difference-in-means table: one row per cohort, metric-major sources over
// all (treatment, metric) pairs. A cohort missing an arm is a data error.
EffectTable diff_in_means_by_cohort(const ExperimentDataset& ds, const CohortSet& cs);

// Fraction of units per cohort.
std::vector<double> cohort_shares(const ExperimentDataset& ds, const CohortSet& cs);

}  // namespace treatsel
