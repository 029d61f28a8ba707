#include "core/estimate.hpp"

#include <cmath>

namespace treatsel {

std::vector<double> observed_control_means(const ExperimentDataset& ds) {
  std::vector<ArmStats> stats(ds.num_metrics());
  for (std::size_t i = 0; i < ds.n(); ++i) {
    if (ds.variants[i] != 0) continue;
    for (int k = 0; k < ds.num_metrics(); ++k) stats[k].add(ds.outcome(i, k));
  }
  std::vector<double> means(ds.num_metrics());
  for (int k = 0; k < ds.num_metrics(); ++k) {
    if (stats[k].n == 0) throw Error::data("no control units; control means undefined");
    means[k] = stats[k].mean();
    if (std::abs(means[k]) < 1e-12) {
      throw Error::data("control mean of metric " + ds.metric_names[k] +
                        " is zero; relative lifts undefined");
    }
  }
  return means;
}

EffectTable diff_in_means_by_cohort(const ExperimentDataset& ds, const CohortSet& cs) {
  const int J = ds.num_treatments;
  const int num_metrics = ds.num_metrics();
  const std::size_t nc = cs.cohorts.size();
  EffectTable table(nc, metric_major_sources(J, num_metrics));
  std::vector<ArmStats> acc(nc * (J + 1) * num_metrics);
  for (std::size_t i = 0; i < ds.n(); ++i) {
    const int c = cs.assign_first(ds.feature_row(i));
    const int v = ds.variants[i];
    for (int k = 0; k < num_metrics; ++k) {
      acc[(static_cast<std::size_t>(c) * (J + 1) + v) * num_metrics + k].add(ds.outcome(i, k));
    }
  }
  for (std::size_t c = 0; c < nc; ++c) {
    for (int k = 0; k < num_metrics; ++k) {
      const ArmStats& control = acc[(c * (J + 1) + 0) * num_metrics + k];
      for (int j = 1; j <= J; ++j) {
        const ArmStats& treat = acc[(c * (J + 1) + j) * num_metrics + k];
        table.at(c, static_cast<std::size_t>(table.source_index(j, k))) = diff_in_means(treat, control);
      }
    }
  }
  return table;
}

std::vector<double> cohort_shares(const ExperimentDataset& ds, const CohortSet& cs) {
  std::vector<double> w(cs.cohorts.size(), 0.0);
  for (std::size_t i = 0; i < ds.n(); ++i) w[cs.assign_first(ds.feature_row(i))] += 1.0;
  for (double& v : w) v /= static_cast<double>(ds.n());
  return w;
}

}  // namespace treatsel
