/* C interface to the qamatch library.
 *
 * Every function returns a qm_status; on failure qm_last_error() describes
 * the problem (thread-local, valid until the next failing call on the same
 * thread). Handles are opaque and owned by the caller, who releases them with
 * the matching *_destroy function. Strings returned through char** are
 * heap-allocated and must be released with qm_string_free.
 */
#ifndef QAMATCH_QAMATCH_H
#define QAMATCH_QAMATCH_H

#include <stddef.h>

#if defined(_WIN32)
#  if defined(QAMATCH_BUILDING_LIBRARY)
#    define QM_API __declspec(dllexport)
#  else
#    define QM_API __declspec(dllimport)
#  endif
#else
#  define QM_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

/* Values double as process exit codes for the command-line tool. */
typedef enum qm_status {
  QM_OK = 0,
  QM_ERROR_INTERNAL = 1,
  QM_ERROR_USAGE = 2,      /* bad argument, config key or value */
  QM_ERROR_DATA = 3,       /* unreadable or invalid dataset, model, report */
  QM_ERROR_DIVERGENCE = 4, /* non-finite loss or gradient while training */
  QM_ERROR_EXISTS = 5      /* output file exists and overwriting was not requested */
} qm_status;

typedef struct qm_train_config qm_train_config;
typedef struct qm_synth_config qm_synth_config;
typedef struct qm_dataset qm_dataset;
typedef struct qm_model qm_model;
typedef struct qm_report qm_report;

QM_API const char* qm_last_error(void);
QM_API const char* qm_version(void);
QM_API void qm_string_free(char* s);

/* ---- training configuration ------------------------------------------ */

QM_API qm_status qm_train_config_create(qm_train_config** out);
QM_API void qm_train_config_destroy(qm_train_config* cfg);
/* Applies a "key = value" file on top of the current values. */
QM_API qm_status qm_train_config_load(qm_train_config* cfg, const char* path);
QM_API qm_status qm_train_config_set(qm_train_config* cfg, const char* key, const char* value);
QM_API qm_status qm_train_config_get(const qm_train_config* cfg, const char* key, char** value);
/* All keys with resolved values, one "key = value" line each. */
QM_API qm_status qm_train_config_dump(const qm_train_config* cfg, char** text);
QM_API qm_status qm_train_config_validate(const qm_train_config* cfg);

/* ---- synthetic data --------------------------------------------------- */

QM_API qm_status qm_synth_config_create(qm_synth_config** out);
QM_API void qm_synth_config_destroy(qm_synth_config* cfg);
QM_API qm_status qm_synth_config_load(qm_synth_config* cfg, const char* path);
QM_API qm_status qm_synth_config_set(qm_synth_config* cfg, const char* key, const char* value);
QM_API qm_status qm_synth_config_get(const qm_synth_config* cfg, const char* key, char** value);
QM_API qm_status qm_synth_config_dump(const qm_synth_config* cfg, char** text);

/* Writes train.jsonl, validation.jsonl, test.jsonl and unlabeled_truth.tsv
 * into out_dir (created if missing). Refuses to overwrite existing files
 * unless force is nonzero. */
QM_API qm_status qm_generate(const qm_synth_config* cfg, const char* out_dir, int force);

/* ---- datasets --------------------------------------------------------- */

QM_API qm_status qm_dataset_load(const char* path, qm_dataset** out);
QM_API void qm_dataset_destroy(qm_dataset* ds);
QM_API qm_status qm_dataset_info(const qm_dataset* ds, size_t* dim, size_t* classes, size_t* labeled,
                                 size_t* unlabeled);

/* ---- training --------------------------------------------------------- */

/* validation and truth_path may be NULL. On QM_ERROR_DIVERGENCE and a
 * non-NULL snapshot, *snapshot receives a JSON object with the iteration,
 * loss components, last lambda and source. */
QM_API qm_status qm_train(const qm_train_config* cfg, const qm_dataset* train, const qm_dataset* validation,
                          const char* truth_path, qm_model** model, qm_report** report, char** snapshot);

QM_API qm_status qm_report_save(const qm_report* report, const char* path);
QM_API qm_status qm_report_size(const qm_report* report, size_t* records);
QM_API void qm_report_destroy(qm_report* report);

/* ---- models ----------------------------------------------------------- */

QM_API qm_status qm_model_load(const char* path, qm_model** out);
QM_API qm_status qm_model_save(const qm_model* model, const char* path);
QM_API void qm_model_destroy(qm_model* model);
QM_API qm_status qm_model_dims(const qm_model* model, size_t* input_dim, size_t* classes);
/* Writes C probabilities for one input of length input_dim. */
QM_API qm_status qm_model_predict(const qm_model* model, const double* input, size_t input_len, double* probs,
                                  size_t probs_len);

/* ---- evaluation and reporting ----------------------------------------- */

/* Metrics over the labeled records of ds, as a JSON object. */
QM_API qm_status qm_evaluate(const qm_model* model, const qm_dataset* ds, char** metrics_json);
/* Mean and sample standard deviation of each scalar in the final record of
 * every report, as a JSON array of {metric, mean, std, runs}. */
QM_API qm_status qm_aggregate_reports(const char* const* paths, size_t count, char** table_json);
/* Lowercase hex SHA-256 of a file. */
QM_API qm_status qm_file_sha256(const char* path, char** hex);

#ifdef __cplusplus
}
#endif

#endif /* QAMATCH_QAMATCH_H */
