#include "core/merge.hpp"

#include <utility>

namespace treatsel {

MergedModel merge_cohort_models(const std::vector<CohortModel>& sources, bool validate) {
  if (sources.empty()) throw Error::config("merge requires at least one source model");
  const int nf = sources.front().cohorts.num_features;
  for (const auto& s : sources) {
    if (s.cohorts.num_features != nf) {
      throw Error::data("merge sources disagree on feature count");
    }
    if (s.effects.size() != s.cohorts.cohorts.size()) {
      throw Error::data("merge source has " + std::to_string(s.effects.size()) + " effects for " +
                        std::to_string(s.cohorts.cohorts.size()) + " cohorts");
    }
    if (validate) s.cohorts.validate_partition();
  }

  struct Row {
    Cohort box;
    std::vector<EffectEstimate> effects;
  };
  std::vector<Row> current;
  current.reserve(sources.front().cohorts.cohorts.size());
  for (std::size_t i = 0; i < sources.front().cohorts.cohorts.size(); ++i) {
    current.push_back({sources.front().cohorts.cohorts[i], {sources.front().effects[i]}});
  }
  for (std::size_t l = 1; l < sources.size(); ++l) {
    std::vector<Row> next;
    for (const auto& row : current) {
      for (std::size_t b = 0; b < sources[l].cohorts.cohorts.size(); ++b) {
        auto inter = intersect(row.box, sources[l].cohorts.cohorts[b]);
        if (!inter) continue;
        Row nr;
        nr.box = std::move(*inter);
        nr.effects = row.effects;
        nr.effects.push_back(sources[l].effects[b]);
        next.push_back(std::move(nr));
      }
    }
    current = std::move(next);
  }
  if (current.empty()) throw Error::internal("merge produced no cohorts");

  MergedModel out;
  out.cohorts.num_features = nf;
  std::vector<EffectKey> keys;
  keys.reserve(sources.size());
  for (const auto& s : sources) keys.push_back(s.key);
  out.effects = EffectTable(current.size(), std::move(keys));
  for (std::size_t i = 0; i < current.size(); ++i) {
    out.cohorts.cohorts.push_back(std::move(current[i].box));
    for (std::size_t s = 0; s < sources.size(); ++s) out.effects.at(i, s) = current[i].effects[s];
  }
  return out;
}

}  // namespace treatsel
