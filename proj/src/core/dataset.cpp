#include "core/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

namespace treatsel {

namespace {

std::vector<std::string> split_csv_line(const std::string& line, char delim) {
  std::vector<std::string> out;
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
    } else if (c == '"' && field.empty()) {
      quoted = true;
    } else if (c == delim) {
      out.push_back(std::move(field));
      field.clear();
    } else {
      field += c;
    }
  }
  out.push_back(std::move(field));
  return out;
}

double parse_double(const std::string& s, std::size_t row, const std::string& col) {
  double v = 0;
  const char* b = s.data();
  const char* e = b + s.size();
  auto [p, ec] = std::from_chars(b, e, v);
  if (ec != std::errc{} || p != e || s.empty()) {
    throw Error::data("parse error: non-numeric value '" + s + "' in column '" + col + "' at data row " +
                      std::to_string(row));
  }
  return v;
}

long parse_int(const std::string& s, std::size_t row, const std::string& col) {
  long v = 0;
  const char* b = s.data();
  const char* e = b + s.size();
  auto [p, ec] = std::from_chars(b, e, v);
  if (ec != std::errc{} || p != e || s.empty()) {
    throw Error::data("parse error: non-integer value '" + s + "' in column '" + col + "' at data row " +
                      std::to_string(row));
  }
  return v;
}

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string csv_escape(const std::string& s, char delim) {
  if (s.find(delim) == std::string::npos && s.find('"') == std::string::npos &&
      s.find('\n') == std::string::npos) {
    return s;
  }
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

std::string cf_column_name(int arm, int metric) {
  return "__cf" + std::to_string(arm) + "_" + std::to_string(metric);
}

}  // namespace

std::map<int, std::size_t> ExperimentDataset::variant_counts() const {
  std::map<int, std::size_t> counts;
  for (int v : variants) ++counts[v];
  return counts;
}

ExperimentDataset ExperimentDataset::subset(const std::vector<std::size_t>& rows) const {
  ExperimentDataset out;
  out.feature_names = feature_names;
  out.metric_names = metric_names;
  out.num_treatments = num_treatments;
  const std::size_t m = feature_names.size();
  const std::size_t km = metric_names.size();
  const std::size_t cfw = (num_treatments + 1) * km;
  out.unit_ids.reserve(rows.size());
  out.variants.reserve(rows.size());
  out.features.reserve(rows.size() * m);
  out.outcomes.reserve(rows.size() * km);
  if (has_counterfactuals()) out.counterfactuals.reserve(rows.size() * cfw);
  for (std::size_t r : rows) {
    out.unit_ids.push_back(unit_ids[r]);
    out.variants.push_back(variants[r]);
    out.features.insert(out.features.end(), features.begin() + r * m, features.begin() + (r + 1) * m);
    out.outcomes.insert(out.outcomes.end(), outcomes.begin() + r * km, outcomes.begin() + (r + 1) * km);
    if (has_counterfactuals()) {
      out.counterfactuals.insert(out.counterfactuals.end(), counterfactuals.begin() + r * cfw,
                                 counterfactuals.begin() + (r + 1) * cfw);
    }
  }
  return out;
}

void ExperimentDataset::validate() const {
  const std::size_t nn = n();
  const std::size_t m = feature_names.size();
  const std::size_t km = metric_names.size();
  if (km == 0) throw Error::data("validation error: dataset has no metric columns");
  if (unit_ids.size() != nn || outcomes.size() != nn * km || features.size() != nn * m) {
    throw Error::data("validation error: inconsistent dataset dimensions");
  }
  if (num_treatments < 1) throw Error::data("validation error: dataset declares no treatments");
  bool has_control = false;
  for (std::size_t i = 0; i < nn; ++i) {
    int v = variants[i];
    if (v < 0 || v > num_treatments) {
      throw Error::data("validation error: variant label " + std::to_string(v) + " at row " +
                        std::to_string(i) + " outside [0, " + std::to_string(num_treatments) + "]");
    }
    if (v == 0) has_control = true;
  }
  if (nn > 0 && !has_control) throw Error::data("validation error: no control (variant 0) rows present");
  if (has_counterfactuals()) {
    if (counterfactuals.size() != nn * (num_treatments + 1) * km) {
      throw Error::data("validation error: counterfactual grid has wrong shape");
    }
    for (std::size_t i = 0; i < nn; ++i) {
      for (std::size_t k = 0; k < km; ++k) {
        if (cf(i, variants[i], static_cast<int>(k)) != outcome(i, static_cast<int>(k))) {
          throw Error::data("validation error: counterfactual for the observed arm disagrees with the "
                            "outcome at row " + std::to_string(i));
        }
      }
    }
  }
}

HonestSplit honest_split(const ExperimentDataset& ds, double train_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw Error::config("honest split fraction must lie strictly between 0 and 1");
  }
  std::map<int, std::vector<std::size_t>> buckets;
  for (std::size_t i = 0; i < ds.n(); ++i) buckets[ds.variants[i]].push_back(i);
  std::mt19937_64 rng(derive_seed(seed, "honest_split"));
  std::vector<char> in_train(ds.n(), 0);
  for (auto& [variant, idx] : buckets) {
    if (idx.size() < 2) {
      throw Error::data("insufficient data: variant " + std::to_string(variant) +
                        " has fewer than 2 units, cannot split");
    }
    std::shuffle(idx.begin(), idx.end(), rng);
    auto want = static_cast<std::size_t>(std::lround(train_fraction * static_cast<double>(idx.size())));
    want = std::clamp<std::size_t>(want, 1, idx.size() - 1);
    for (std::size_t j = 0; j < want; ++j) in_train[idx[j]] = 1;
  }
  std::vector<std::size_t> train_rows, est_rows;
  for (std::size_t i = 0; i < ds.n(); ++i) (in_train[i] ? train_rows : est_rows).push_back(i);
  HonestSplit out;
  out.train = ds.subset(train_rows);
  out.estimate = ds.subset(est_rows);
  out.fraction = train_fraction;
  out.seed = seed;
  return out;
}

ExperimentDataset load_experiment_csv(const std::string& path, const CsvSchema& schema) {
  std::ifstream in(path);
  if (!in) throw Error::data("cannot open CSV file: " + path);
  std::string line;
  if (!std::getline(in, line)) throw Error::data("empty CSV file: " + path);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = split_csv_line(line, schema.delimiter);

  auto find_col = [&](const std::string& name) {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw Error::data("schema error: column '" + name + "' not found in " + path);
    return static_cast<int>(it - header.begin());
  };

  if (schema.metric_columns.empty()) throw Error::config("schema must name at least one metric column");
  int id_col = schema.id_column.empty() ? -1 : find_col(schema.id_column);
  int variant_col = find_col(schema.variant_column);
  std::vector<int> feat_cols, metric_cols;
  for (const auto& c : schema.feature_columns) feat_cols.push_back(find_col(c));
  for (const auto& c : schema.metric_columns) metric_cols.push_back(find_col(c));

  ExperimentDataset ds;
  ds.feature_names = schema.feature_columns;
  ds.metric_names = schema.metric_columns;

  // Counterfactual columns, if present, must cover a full (J+1) x (K+1) grid.
  std::vector<std::pair<int, int>> cf_cols;  // (header index, arm) in metric-major order filled later
  int cf_max_arm = -1;
  for (std::size_t h = 0; h < header.size(); ++h) {
    if (header[h].rfind("__cf", 0) == 0) {
      const std::string rest = header[h].substr(4);
      auto us = rest.find('_');
      if (us == std::string::npos) throw Error::data("schema error: malformed counterfactual column '" + header[h] + "'");
      int arm = static_cast<int>(parse_int(rest.substr(0, us), 0, header[h]));
      cf_max_arm = std::max(cf_max_arm, arm);
    }
  }
  const int km = static_cast<int>(schema.metric_columns.size());
  std::vector<int> cf_index;
  if (cf_max_arm >= 0) {
    cf_index.assign(static_cast<std::size_t>(cf_max_arm + 1) * km, -1);
    for (std::size_t h = 0; h < header.size(); ++h) {
      if (header[h].rfind("__cf", 0) != 0) continue;
      const std::string rest = header[h].substr(4);
      auto us = rest.find('_');
      int arm = static_cast<int>(parse_int(rest.substr(0, us), 0, header[h]));
      int met = static_cast<int>(parse_int(rest.substr(us + 1), 0, header[h]));
      if (met < 0 || met >= km) throw Error::data("schema error: counterfactual column '" + header[h] +
                                                  "' references metric " + std::to_string(met));
      cf_index[arm * km + met] = static_cast<int>(h);
    }
    for (int a = 0; a <= cf_max_arm; ++a) {
      for (int k = 0; k < km; ++k) {
        if (cf_index[a * km + k] < 0) {
          throw Error::data("schema error: incomplete counterfactual grid, missing " + cf_column_name(a, k));
        }
      }
    }
  }

  std::size_t row = 0;
  int max_variant = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = split_csv_line(line, schema.delimiter);
    if (cells.size() != header.size()) {
      throw Error::data("parse error: data row " + std::to_string(row) + " has " +
                        std::to_string(cells.size()) + " fields, header has " + std::to_string(header.size()));
    }
    ds.unit_ids.push_back(id_col >= 0 ? cells[id_col] : "row" + std::to_string(row));
    long v = parse_int(cells[variant_col], row, schema.variant_column);
    if (v < 0) throw Error::data("validation error: negative variant label at data row " + std::to_string(row));
    max_variant = std::max(max_variant, static_cast<int>(v));
    ds.variants.push_back(static_cast<int>(v));
    for (std::size_t f = 0; f < feat_cols.size(); ++f) {
      ds.features.push_back(parse_double(cells[feat_cols[f]], row, schema.feature_columns[f]));
    }
    for (std::size_t k = 0; k < metric_cols.size(); ++k) {
      ds.outcomes.push_back(parse_double(cells[metric_cols[k]], row, schema.metric_columns[k]));
    }
    if (cf_max_arm >= 0) {
      for (int a = 0; a <= cf_max_arm; ++a) {
        for (int k = 0; k < km; ++k) {
          ds.counterfactuals.push_back(parse_double(cells[cf_index[a * km + k]], row, header[cf_index[a * km + k]]));
        }
      }
    }
  }

  if (schema.num_treatments >= 1) {
    ds.num_treatments = schema.num_treatments;
    if (max_variant > schema.num_treatments) {
      throw Error::data("validation error: variant label " + std::to_string(max_variant) +
                        " exceeds declared treatment count " + std::to_string(schema.num_treatments));
    }
  } else {
    ds.num_treatments = max_variant;
  }
  if (cf_max_arm >= 0 && cf_max_arm != ds.num_treatments) {
    throw Error::data("validation error: counterfactual grid covers arms 0.." + std::to_string(cf_max_arm) +
                      " but dataset has treatments 0.." + std::to_string(ds.num_treatments));
  }
  ds.validate();
  return ds;
}

void save_experiment_csv(const ExperimentDataset& ds, const std::string& path, char delimiter) {
  std::ofstream out(path);
  if (!out) throw Error::data("cannot write CSV file: " + path);
  const char d = delimiter;
  out << "unit_id";
  for (const auto& f : ds.feature_names) out << d << csv_escape(f, d);
  out << d << "variant";
  for (const auto& m : ds.metric_names) out << d << csv_escape(m, d);
  if (ds.has_counterfactuals()) {
    for (int a = 0; a <= ds.num_treatments; ++a) {
      for (int k = 0; k < ds.num_metrics(); ++k) out << d << cf_column_name(a, k);
    }
  }
  out << '\n';
  for (std::size_t i = 0; i < ds.n(); ++i) {
    out << csv_escape(ds.unit_ids[i], d);
    for (int f = 0; f < ds.num_features(); ++f) out << d << fmt_double(ds.feature(i, f));
    out << d << ds.variants[i];
    for (int k = 0; k < ds.num_metrics(); ++k) out << d << fmt_double(ds.outcome(i, k));
    if (ds.has_counterfactuals()) {
      for (int a = 0; a <= ds.num_treatments; ++a) {
        for (int k = 0; k < ds.num_metrics(); ++k) out << d << fmt_double(ds.cf(i, a, k));
      }
    }
    out << '\n';
  }
  if (!out) throw Error::data("I/O failure while writing " + path);
}

}  // namespace treatsel
