#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "core/common.hpp"

namespace treatsel {

// Difference-in-means effect for one (treatment, metric) cell with the
// two-sample variance decomposition var_treat/n_treat + var_control/n_control.
struct EffectEstimate {
  double tau = 0.0;
  double var = 0.0;
  long n_treat = 0;
  long n_control = 0;
  double var_treat = 0.0;
  double var_control = 0.0;
};

// Streaming accumulator for one arm of a two-sample comparison.
struct ArmStats {
  long n = 0;
  double sum = 0.0;
  double sumsq = 0.0;

  void add(double y) {
    ++n;
    sum += y;
    sumsq += y * y;
  }
  void add_counts(long cnt, double s, double sq) {
    n += cnt;
    sum += s;
    sumsq += sq;
  }
  double mean() const { return n > 0 ? sum / static_cast<double>(n) : 0.0; }
  // Unbiased sample variance, clamped against rounding noise.
  double variance() const {
    if (n < 2) return 0.0;
    double m = mean();
    double v = (sumsq - static_cast<double>(n) * m * m) / static_cast<double>(n - 1);
    return v > 0.0 ? v : 0.0;
  }
};

inline EffectEstimate diff_in_means(const ArmStats& treat, const ArmStats& control) {
  if (treat.n < 1 || control.n < 1) {
    throw Error::data("insufficient data: effect estimate requires at least one unit per arm");
  }
  EffectEstimate e;
  e.n_treat = treat.n;
  e.n_control = control.n;
  e.tau = treat.mean() - control.mean();
  e.var_treat = treat.variance();
  e.var_control = control.variance();
  e.var = e.var_treat / static_cast<double>(treat.n) + e.var_control / static_cast<double>(control.n);
  return e;
}

// Dense effect table: one row per cohort, one column per (treatment, metric)
// source in a fixed order.
struct EffectKey {
  int treatment = 0;
  int metric = 0;
  friend bool operator==(const EffectKey&, const EffectKey&) = default;
};

class EffectTable {
 public:
  EffectTable() = default;
  EffectTable(std::size_t n_cohorts, std::vector<EffectKey> sources)
      : sources_(std::move(sources)), cells_(n_cohorts * sources_.size()) {}

  std::size_t n_cohorts() const { return sources_.empty() ? 0 : cells_.size() / sources_.size(); }
  const std::vector<EffectKey>& sources() const { return sources_; }

  int source_index(int treatment, int metric) const {
    for (std::size_t s = 0; s < sources_.size(); ++s) {
      if (sources_[s].treatment == treatment && sources_[s].metric == metric) return static_cast<int>(s);
    }
    return -1;
  }

  const EffectEstimate& at(std::size_t cohort, std::size_t source) const {
    return cells_[cohort * sources_.size() + source];
  }
  EffectEstimate& at(std::size_t cohort, std::size_t source) {
    return cells_[cohort * sources_.size() + source];
  }
  const EffectEstimate& get(std::size_t cohort, int treatment, int metric) const {
    int s = source_index(treatment, metric);
    if (s < 0) throw Error::internal("effect table has no source for the requested treatment/metric");
    return at(cohort, static_cast<std::size_t>(s));
  }

 private:
  std::vector<EffectKey> sources_;
  std::vector<EffectEstimate> cells_;
};

// Conventional source order: all treatments for metric 0, then metric 1, ...
inline std::vector<EffectKey> metric_major_sources(int num_treatments, int num_metrics) {
  std::vector<EffectKey> keys;
  keys.reserve(static_cast<std::size_t>(num_treatments) * num_metrics);
  for (int k = 0; k < num_metrics; ++k) {
    for (int j = 1; j <= num_treatments; ++j) keys.push_back({j, k});
  }
  return keys;
}

}  // namespace treatsel
