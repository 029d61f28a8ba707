#ifndef TREATSEL_H
#define TREATSEL_H

/* Treatment selection engine: heterogeneous effect estimation, cohort
 * merging, constrained assignment optimization, bootstrap bias correction,
 * and a simulation harness. All composite inputs and outputs are JSON or CSV
 * strings; returned strings are owned by the caller and released with
 * treatsel_string_free. Functions return TREATSEL_OK or an error status, with
 * the message available from treatsel_last_error on the same thread. */

#include <stdint.h>

#if defined(_WIN32)
#define TREATSEL_API __declspec(dllexport)
#else
#define TREATSEL_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum treatsel_status {
  TREATSEL_OK = 0,
  TREATSEL_INTERNAL = 1,
  TREATSEL_CONFIG_ERROR = 2,
  TREATSEL_INFEASIBLE = 3,
  TREATSEL_DATA_ERROR = 4
} treatsel_status;

typedef struct treatsel_dataset treatsel_dataset;
typedef struct treatsel_policy treatsel_policy;

TREATSEL_API const char* treatsel_version(void);
TREATSEL_API const char* treatsel_last_error(void);
TREATSEL_API void treatsel_string_free(char* s);

/* Datasets. The schema JSON names the id/variant/feature/metric columns;
 * metric column order matters (the first is the objective). */
TREATSEL_API treatsel_status treatsel_dataset_load_csv(const char* path, const char* schema_json,
                                          treatsel_dataset** out);
TREATSEL_API treatsel_status treatsel_dataset_save_csv(const treatsel_dataset* ds, const char* path);
TREATSEL_API treatsel_status treatsel_simulate_dataset(const char* config_json, treatsel_dataset** out);
TREATSEL_API treatsel_status treatsel_dataset_summary_json(const treatsel_dataset* ds, char** out_json);
TREATSEL_API void treatsel_dataset_free(treatsel_dataset* ds);

/* Pipeline stages. config_json is the same document for every stage. */
TREATSEL_API treatsel_status treatsel_fit_effects(const treatsel_dataset* ds, const char* config_json,
                                     char** out_model_json);
TREATSEL_API treatsel_status treatsel_merge_model(const char* model_json, const treatsel_dataset* ds,
                                     const char* config_json, char** out_model_json);
/* out_trace_csv may be NULL; when non-NULL and the stochastic solver ran with
 * tracing enabled, it receives the per-iteration trace. */
TREATSEL_API treatsel_status treatsel_optimize(const char* model_json, const treatsel_dataset* ds,
                                  const char* config_json, char** out_policy_json,
                                  char** out_trace_csv);
TREATSEL_API treatsel_status treatsel_bootstrap(const char* model_json, const treatsel_dataset* ds,
                                   const char* config_json, const char* policy_json,
                                   char** out_policy_json, char** out_summary_json);
TREATSEL_API treatsel_status treatsel_run_pipeline(const treatsel_dataset* ds, const char* config_json,
                                      char** out_policy_json, char** out_model_json,
                                      char** out_report_json, char** out_trace_csv);

/* True lift of a policy on a simulated dataset with counterfactuals. */
TREATSEL_API treatsel_status treatsel_evaluate_policy(const char* policy_json, const treatsel_dataset* ds,
                                         char** out_json);

/* Five-method comparison over an uncertainty-weight grid. */
TREATSEL_API treatsel_status treatsel_run_comparison(const char* config_json, char** out_rows_csv,
                                        char** out_summary_csv, char** out_manifest_json);

/* Policy scoring. */
TREATSEL_API treatsel_status treatsel_policy_parse(const char* policy_json, treatsel_policy** out);
TREATSEL_API treatsel_status treatsel_policy_info_json(const treatsel_policy* p, char** out_json);
/* Probability row for a feature vector (cohort-level policies). n_arms passes
 * the capacity of out_probs/out_arms in and receives the arm count. */
TREATSEL_API treatsel_status treatsel_policy_probs(const treatsel_policy* p, const double* features,
                                      int n_features, double* out_probs, int* out_arms,
                                      int* n_arms);
/* Probability row for a unit id (member-level policies). */
TREATSEL_API treatsel_status treatsel_policy_probs_for_unit(const treatsel_policy* p, const char* unit_id,
                                               double* out_probs, int* out_arms, int* n_arms);
/* Seeded categorical draw from the matching row. */
TREATSEL_API treatsel_status treatsel_policy_draw(const treatsel_policy* p, const double* features,
                                     int n_features, uint64_t seed, int* out_arm);
TREATSEL_API void treatsel_policy_free(treatsel_policy* p);

#ifdef __cplusplus
}
#endif

#endif /* TREATSEL_H */
