#include "core/cohort.hpp"

#include <algorithm>
#include <random>

namespace treatsel {

bool Cohort::contains(std::span<const double> features) const {
  for (const auto& b : bounds) {
    double v = features[b.feature];
    if (!(v >= b.lo && v < b.hi)) return false;
  }
  return true;
}

void Cohort::tighten(int feature, double lo, double hi) {
  auto it = std::lower_bound(bounds.begin(), bounds.end(), feature,
                             [](const FeatureBound& b, int f) { return b.feature < f; });
  if (it != bounds.end() && it->feature == feature) {
    it->lo = std::max(it->lo, lo);
    it->hi = std::min(it->hi, hi);
  } else {
    bounds.insert(it, FeatureBound{feature, lo, hi});
  }
}

bool Cohort::empty() const {
  return std::any_of(bounds.begin(), bounds.end(), [](const FeatureBound& b) { return b.lo >= b.hi; });
}

std::optional<Cohort> intersect(const Cohort& a, const Cohort& b) {
  Cohort out;
  out.id = a.id + "|" + b.id;
  out.bounds = a.bounds;
  for (const auto& fb : b.bounds) out.tighten(fb.feature, fb.lo, fb.hi);
  if (out.empty()) return std::nullopt;
  return out;
}

int CohortSet::assign_first(std::span<const double> features) const {
  for (std::size_t i = 0; i < cohorts.size(); ++i) {
    if (cohorts[i].contains(features)) return static_cast<int>(i);
  }
  throw Error::data("cohort set is not a partition: point matches no cohort");
}

int CohortSet::assign(std::span<const double> features) const {
  int found = -1;
  for (std::size_t i = 0; i < cohorts.size(); ++i) {
    if (cohorts[i].contains(features)) {
      if (found >= 0) {
        throw Error::data("cohort set is not a partition: point matches cohorts " + std::to_string(found) +
                          " and " + std::to_string(i));
      }
      found = static_cast<int>(i);
    }
  }
  if (found < 0) throw Error::data("cohort set is not a partition: point matches no cohort");
  return found;
}

void CohortSet::validate_partition(std::size_t probes, std::uint64_t seed) const {
  if (cohorts.empty()) throw Error::data("cohort set is empty");
  for (const auto& c : cohorts) {
    if (c.empty()) throw Error::data("cohort '" + c.id + "' is structurally empty");
    for (const auto& b : c.bounds) {
      if (b.feature < 0 || b.feature >= num_features) {
        throw Error::data("cohort '" + c.id + "' references feature " + std::to_string(b.feature) +
                          " outside [0, " + std::to_string(num_features) + ")");
      }
    }
  }
  // Probe points are drawn wide and near every threshold so shared boundaries
  // get exercised.
  std::vector<double> knots;
  for (const auto& c : cohorts) {
    for (const auto& b : c.bounds) {
      if (std::isfinite(b.lo)) knots.push_back(b.lo);
      if (std::isfinite(b.hi)) knots.push_back(b.hi);
    }
  }
  std::mt19937_64 rng(derive_seed(seed, "partition_probe"));
  std::normal_distribution<double> wide(0.0, 3.0);
  std::vector<double> point(static_cast<std::size_t>(num_features));
  for (std::size_t p = 0; p < probes; ++p) {
    for (auto& v : point) {
      if (!knots.empty() && (rng() & 1u)) {
        double k = knots[rng() % knots.size()];
        v = k + ((rng() & 1u) ? 0.0 : -1e-9);
      } else {
        v = wide(rng);
      }
    }
    assign(point);  // throws if covered zero or multiple times
  }
}

CohortSet CohortSet::whole_space(int num_features, std::string id) {
  CohortSet cs;
  cs.num_features = num_features;
  Cohort c;
  c.id = std::move(id);
  cs.cohorts.push_back(std::move(c));
  return cs;
}

}  // namespace treatsel
