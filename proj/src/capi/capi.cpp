#include "treatsel.h"

#include <cstdlib>
#include <cstring>
#include <new>
#include <string>

#include "json.hpp"

#include "core/config_json.hpp"
#include "core/dataset.hpp"
#include "core/pipeline.hpp"
#include "core/policy.hpp"
#include "core/simulate.hpp"

using nlohmann::json;

struct treatsel_dataset {
  treatsel::ExperimentDataset ds;
};

struct treatsel_policy {
  treatsel::AssignmentPolicy p;
};

namespace {

thread_local std::string g_last_error;

treatsel_status fail(treatsel_status s, const char* msg) {
  try {
    g_last_error = msg;
  } catch (...) {
  }
  return s;
}

treatsel_status from_status(treatsel::Status s) {
  switch (s) {
    case treatsel::Status::Ok: return TREATSEL_OK;
    case treatsel::Status::Internal: return TREATSEL_INTERNAL;
    case treatsel::Status::ConfigError: return TREATSEL_CONFIG_ERROR;
    case treatsel::Status::Infeasible: return TREATSEL_INFEASIBLE;
    case treatsel::Status::DataError: return TREATSEL_DATA_ERROR;
  }
  return TREATSEL_INTERNAL;
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

json parse_json(const char* text, const char* what) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw treatsel::Error::config(std::string(what) + ": " + e.what());
  }
}

}  // namespace

#define API_PROLOGUE try {

#define API_EPILOGUE                                               \
  }                                                                \
  catch (const treatsel::Error& e) {                               \
    return fail(from_status(e.status()), e.what());                \
  }                                                                \
  catch (const std::bad_alloc&) {                                  \
    return fail(TREATSEL_INTERNAL, "out of memory");               \
  }                                                                \
  catch (const std::exception& e) {                                \
    return fail(TREATSEL_INTERNAL, e.what());                      \
  }                                                                \
  catch (...) {                                                    \
    return fail(TREATSEL_INTERNAL, "unknown error");               \
  }

extern "C" {

const char* treatsel_version(void) { return "1.0.0"; }

const char* treatsel_last_error(void) { return g_last_error.c_str(); }

void treatsel_string_free(char* s) { std::free(s); }

treatsel_status treatsel_dataset_load_csv(const char* path, const char* schema_json,
                                          treatsel_dataset** out) {
  API_PROLOGUE
  if (!path || !schema_json || !out) return fail(TREATSEL_CONFIG_ERROR, "null argument");
  const treatsel::CsvSchema schema = treatsel::csv_schema_from_json(parse_json(schema_json, "schema"));
  auto* handle = new treatsel_dataset{treatsel::load_experiment_csv(path, schema)};
  *out = handle;
  return TREATSEL_OK;
  API_EPILOGUE
}

treatsel_status treatsel_dataset_save_csv(const treatsel_dataset* ds, const char* path) {
  API_PROLOGUE
  if (!ds || !path) return fail(TREATSEL_CONFIG_ERROR, "null argument");
  treatsel::save_experiment_csv(ds->ds, path);
  return TREATSEL_OK;
  API_EPILOGUE
}

treatsel_status treatsel_simulate_dataset(const char* config_json, treatsel_dataset** out) {
  API_PROLOGUE
  if (!config_json || !out) return fail(TREATSEL_CONFIG_ERROR, "null argument");
  const treatsel::SimConfig cfg = treatsel::sim_config_from_json(parse_json(config_json, "config"));
  auto* handle = new treatsel_dataset{treatsel::generate_dataset(cfg)};
  *out = handle;
  return TREATSEL_OK;
  API_EPILOGUE
}

treatsel_status treatsel_dataset_summary_json(const treatsel_dataset* ds, char** out_json) {
  API_PROLOGUE
  if (!ds || !out_json) return fail(TREATSEL_CONFIG_ERROR, "null argument");
  json counts = json::object();
  for (const auto& [variant, n] : ds->ds.variant_counts()) counts[std::to_string(variant)] = n;
  const json j{{"units", ds->ds.n()},
               {"num_treatments", ds->ds.num_treatments},
               {"feature_names", ds->ds.feature_names},
               {"metric_names", ds->ds.metric_names},
               {"variant_counts", counts},
               {"has_counterfactuals", ds->ds.has_counterfactuals()}};
  *out_json = dup_string(j.dump(2));
  return TREATSEL_OK;
  API_EPILOGUE
}

void treatsel_dataset_free(treatsel_dataset* ds) { delete ds; }

treatsel_status treatsel_fit_effects(const treatsel_dataset* ds, const char* config_json,
                                     char** out_model_json) {
  API_PROLOGUE
  if (!ds || !config_json || !out_model_json) return fail(TREATSEL_CONFIG_ERROR, "null argument");
  const auto cfg = treatsel::pipeline_config_from_json(parse_json(config_json, "config"));
  const treatsel::FittedModel model = treatsel::fit_effects(ds->ds, cfg);
  *out_model_json = dup_string(treatsel::fitted_model_to_json(model).dump(2));
  return TREATSEL_OK;
  API_EPILOGUE
}

treatsel_status treatsel_merge_model(const char* model_json, const treatsel_dataset* ds,
                                     const char* config_json, char** out_model_json) {
  API_PROLOGUE
  if (!model_json || !ds || !config_json || !out_model_json)
    return fail(TREATSEL_CONFIG_ERROR, "null argument");
  const auto cfg = treatsel::pipeline_config_from_json(parse_json(config_json, "config"));
  const auto model = treatsel::fitted_model_from_json(parse_json(model_json, "model"));
  const treatsel::FittedModel merged = treatsel::merge_fitted(model, ds->ds, cfg);
  *out_model_json = dup_string(treatsel::fitted_model_to_json(merged).dump(2));
  return TREATSEL_OK;
  API_EPILOGUE
}

treatsel_status treatsel_optimize(const char* model_json, const treatsel_dataset* ds,
                                  const char* config_json, char** out_policy_json,
                                  char** out_trace_csv) {
  API_PROLOGUE
  if (!model_json || !ds || !config_json || !out_policy_json)
    return fail(TREATSEL_CONFIG_ERROR, "null argument");
  const auto cfg = treatsel::pipeline_config_from_json(parse_json(config_json, "config"));
  const auto model = treatsel::fitted_model_from_json(parse_json(model_json, "model"));
  treatsel::OptimizeOutput out = treatsel::optimize_model(model, ds->ds, cfg);
  json pj = treatsel::policy_to_json(out.policy);
  pj["solver"] = out.summary;
  *out_policy_json = dup_string(pj.dump(2));
  if (out_trace_csv) *out_trace_csv = out.trace_csv.empty() ? nullptr : dup_string(out.trace_csv);
  return TREATSEL_OK;
  API_EPILOGUE
}

treatsel_status treatsel_bootstrap(const char* model_json, const treatsel_dataset* ds,
                                   const char* config_json, const char* policy_json,
                                   char** out_policy_json, char** out_summary_json) {
  API_PROLOGUE
  if (!model_json || !ds || !config_json || !policy_json || !out_policy_json || !out_summary_json)
    return fail(TREATSEL_CONFIG_ERROR, "null argument");
  const auto cfg = treatsel::pipeline_config_from_json(parse_json(config_json, "config"));
  const auto model = treatsel::fitted_model_from_json(parse_json(model_json, "model"));
  const auto base = treatsel::policy_from_json(parse_json(policy_json, "policy"));
  const treatsel::BootstrapOutput out = treatsel::bootstrap_model(model, ds->ds, cfg, base);
  *out_policy_json = dup_string(treatsel::policy_to_json(out.policy).dump(2));
  *out_summary_json = dup_string(out.summary.dump(2));
  return TREATSEL_OK;
  API_EPILOGUE
}

treatsel_status treatsel_run_pipeline(const treatsel_dataset* ds, const char* config_json,
                                      char** out_policy_json, char** out_model_json,
                                      char** out_report_json, char** out_trace_csv) {
  API_PROLOGUE
  if (!ds || !config_json || !out_policy_json || !out_model_json || !out_report_json)
    return fail(TREATSEL_CONFIG_ERROR, "null argument");
  const auto cfg = treatsel::pipeline_config_from_json(parse_json(config_json, "config"));
  treatsel::PipelineResult res = treatsel::run_pipeline(ds->ds, cfg);
  *out_policy_json = dup_string(res.policy_json.dump(2));
  *out_model_json = dup_string(res.model_json.dump(2));
  *out_report_json = dup_string(res.report.dump(2));
  if (out_trace_csv) *out_trace_csv = res.trace_csv.empty() ? nullptr : dup_string(res.trace_csv);
  return TREATSEL_OK;
  API_EPILOGUE
}

treatsel_status treatsel_evaluate_policy(const char* policy_json, const treatsel_dataset* ds,
                                         char** out_json) {
  API_PROLOGUE
  if (!policy_json || !ds || !out_json) return fail(TREATSEL_CONFIG_ERROR, "null argument");
  const auto policy = treatsel::policy_from_json(parse_json(policy_json, "policy"));
  const treatsel::PolicyEvaluation eval = treatsel::evaluate_policy(policy, ds->ds);
  const json j{{"tau", eval.tau}, {"control_mean", eval.control_mean}, {"units", eval.units}};
  *out_json = dup_string(j.dump(2));
  return TREATSEL_OK;
  API_EPILOGUE
}

treatsel_status treatsel_run_comparison(const char* config_json, char** out_rows_csv,
                                        char** out_summary_csv, char** out_manifest_json) {
  API_PROLOGUE
  if (!config_json || !out_rows_csv) return fail(TREATSEL_CONFIG_ERROR, "null argument");
  const auto cfg = treatsel::comparison_config_from_json(parse_json(config_json, "config"));
  const treatsel::ComparisonResult res = treatsel::run_comparison(cfg);
  *out_rows_csv = dup_string(res.to_csv());
  if (out_summary_csv) *out_summary_csv = dup_string(res.summary_csv());
  if (out_manifest_json) *out_manifest_json = dup_string(res.manifest.dump(2));
  return TREATSEL_OK;
  API_EPILOGUE
}

treatsel_status treatsel_policy_parse(const char* policy_json, treatsel_policy** out) {
  API_PROLOGUE
  if (!policy_json || !out) return fail(TREATSEL_CONFIG_ERROR, "null argument");
  auto* handle = new treatsel_policy{treatsel::policy_from_json(parse_json(policy_json, "policy"))};
  *out = handle;
  return TREATSEL_OK;
  API_EPILOGUE
}

treatsel_status treatsel_policy_info_json(const treatsel_policy* p, char** out_json) {
  API_PROLOGUE
  if (!p || !out_json) return fail(TREATSEL_CONFIG_ERROR, "null argument");
  const json j{{"level", p->p.level == treatsel::AssignmentPolicy::Level::Cohort ? "cohort" : "member"},
               {"method", p->p.method},
               {"rows", p->p.rows()},
               {"arms", p->p.arms},
               {"feature_names", p->p.feature_names},
               {"metric_names", p->p.metric_names},
               {"bias_corrected", p->p.bias_corrected},
               {"least_violating", p->p.least_violating}};
  *out_json = dup_string(j.dump(2));
  return TREATSEL_OK;
  API_EPILOGUE
}

treatsel_status treatsel_policy_probs(const treatsel_policy* p, const double* features,
                                      int n_features, double* out_probs, int* out_arms,
                                      int* n_arms) {
  API_PROLOGUE
  if (!p || !features || !out_probs || !out_arms || !n_arms)
    return fail(TREATSEL_CONFIG_ERROR, "null argument");
  if (p->p.level != treatsel::AssignmentPolicy::Level::Cohort)
    throw treatsel::Error::data("member-level policy; look rows up by unit id");
  if (n_features != static_cast<int>(p->p.feature_names.size()))
    throw treatsel::Error::data("feature vector length does not match the policy");
  const int arms = static_cast<int>(p->p.arms.size());
  if (*n_arms < arms) throw treatsel::Error::config("output buffers too small");
  const auto row = p->p.row_for({features, static_cast<std::size_t>(n_features)});
  for (int a = 0; a < arms; ++a) {
    out_probs[a] = row[a];
    out_arms[a] = p->p.arms[a];
  }
  *n_arms = arms;
  return TREATSEL_OK;
  API_EPILOGUE
}

treatsel_status treatsel_policy_probs_for_unit(const treatsel_policy* p, const char* unit_id,
                                               double* out_probs, int* out_arms, int* n_arms) {
  API_PROLOGUE
  if (!p || !unit_id || !out_probs || !out_arms || !n_arms)
    return fail(TREATSEL_CONFIG_ERROR, "null argument");
  if (p->p.level != treatsel::AssignmentPolicy::Level::Member)
    throw treatsel::Error::data("cohort-level policy; look rows up by feature vector");
  const int arms = static_cast<int>(p->p.arms.size());
  if (*n_arms < arms) throw treatsel::Error::config("output buffers too small");
  for (std::size_t r = 0; r < p->p.unit_ids.size(); ++r) {
    if (p->p.unit_ids[r] == unit_id) {
      const auto row = p->p.row(r);
      for (int a = 0; a < arms; ++a) {
        out_probs[a] = row[a];
        out_arms[a] = p->p.arms[a];
      }
      *n_arms = arms;
      return TREATSEL_OK;
    }
  }
  throw treatsel::Error::data(std::string("policy has no row for unit ") + unit_id);
  API_EPILOGUE
}

treatsel_status treatsel_policy_draw(const treatsel_policy* p, const double* features,
                                     int n_features, uint64_t seed, int* out_arm) {
  API_PROLOGUE
  if (!p || !features || !out_arm) return fail(TREATSEL_CONFIG_ERROR, "null argument");
  if (n_features != static_cast<int>(p->p.feature_names.size()))
    throw treatsel::Error::data("feature vector length does not match the policy");
  *out_arm = p->p.draw_arm({features, static_cast<std::size_t>(n_features)}, seed);
  return TREATSEL_OK;
  API_EPILOGUE
}

void treatsel_policy_free(treatsel_policy* p) { delete p; }

}  // extern "C"
