/* grorec C API.
 *
 * Every function returns a grorec_status; on failure the thread's last
 * error message (and, for pipeline calls, the failing stage) can be read
 * back until the next call on the same thread. Strings returned through
 * char** out-parameters are owned by the caller and released with
 * grorec_string_free. Handles are released with their *_free function;
 * passing NULL to a *_free function is a no-op.
 */
#ifndef GROREC_H
#define GROREC_H

#include <stddef.h>
#include <stdint.h>

#if defined(GROREC_BUILDING_LIBRARY)
#define GROREC_API __attribute__((visibility("default")))
#else
#define GROREC_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum grorec_status {
  GROREC_OK = 0,
  GROREC_E_INVALID_ARGUMENT = 1,
  GROREC_E_IO = 2,
  GROREC_E_PARSE = 3,
  GROREC_E_NUMERIC = 4,
  GROREC_E_PRECONDITION = 5,
  GROREC_E_INTERNAL = 6
} grorec_status;

typedef struct grorec_config grorec_config;
typedef struct grorec_dataset grorec_dataset;
typedef struct grorec_model grorec_model;

typedef struct grorec_dataset_stats {
  int64_t users;
  int64_t items;
  double avg_length;
  double density;
} grorec_dataset_stats;

GROREC_API const char* grorec_version(void);
GROREC_API const char* grorec_status_name(grorec_status s);
/* Message of the last failed call on this thread ("" if none). */
GROREC_API const char* grorec_last_error(void);
/* Pipeline stage of the last failed call on this thread ("" if none). */
GROREC_API const char* grorec_last_stage(void);
GROREC_API void grorec_string_free(char* s);

/* --- configuration ------------------------------------------------------ */
GROREC_API grorec_status grorec_config_default(grorec_config** out);
GROREC_API grorec_status grorec_config_load(const char* path, grorec_config** out);
GROREC_API grorec_status grorec_config_set(grorec_config* cfg, const char* key, const char* value);
GROREC_API grorec_status grorec_config_get(const grorec_config* cfg, const char* key, char** out);
GROREC_API grorec_status grorec_config_canonical(const grorec_config* cfg, char** out);
GROREC_API grorec_status grorec_config_hash(const grorec_config* cfg, uint64_t* out);
GROREC_API grorec_status grorec_config_validate(const grorec_config* cfg);
GROREC_API void grorec_config_free(grorec_config* cfg);

/* --- datasets ------------------------------------------------------------ */
/* Synthesizes or loads the dataset the config describes. */
GROREC_API grorec_status grorec_dataset_from_config(const grorec_config* cfg, grorec_dataset** out);
GROREC_API grorec_status grorec_dataset_save(const grorec_dataset* ds, const char* path);
GROREC_API grorec_status grorec_dataset_stats_get(const grorec_dataset* ds, grorec_dataset_stats* out);
GROREC_API void grorec_dataset_free(grorec_dataset* ds);

/* --- models -------------------------------------------------------------- */
GROREC_API grorec_status grorec_model_load(const char* path, grorec_model** out);
GROREC_API grorec_status grorec_model_save(const grorec_model* m, const char* path);
/* Writes the k best items after `seq` (prefix items excluded) to out_items. */
GROREC_API grorec_status grorec_model_topk(const grorec_model* m, const int32_t* seq, size_t len, int k,
                                           int32_t* out_items);
GROREC_API grorec_status grorec_model_num_items(const grorec_model* m, int32_t* out);
GROREC_API void grorec_model_free(grorec_model* m);

/* --- pipeline stages ----------------------------------------------------- */
/* Cross-entropy pretraining with the config's plateau rule. */
GROREC_API grorec_status grorec_train(const grorec_config* cfg, const grorec_dataset* ds, grorec_model** out);
/* GRO fine-tuning of a pretrained target; curve_csv may be NULL. */
GROREC_API grorec_status grorec_defend(const grorec_config* cfg, const grorec_dataset* ds,
                                       const grorec_model* target, const char* curve_csv, grorec_model** out);
/* Extraction attack on `deployed` behind the shield of `defense`
 * ("none", "random", "reverse" or "gro"); query_log may be NULL. */
GROREC_API grorec_status grorec_attack(const grorec_config* cfg, const grorec_model* deployed, const char* defense,
                                       const char* query_log, grorec_model** surrogate_out);
/* Test-split metrics as JSON. role is "target" (evaluated behind the
 * defense's shield) or "surrogate". */
GROREC_API grorec_status grorec_evaluate(const grorec_config* cfg, const grorec_dataset* ds, const grorec_model* m,
                                         const char* defense, const char* role, char** json_out);
/* Full pipeline into the config's out_dir. Fails with the stage of the
 * first failing defense when any defense failed. */
GROREC_API grorec_status grorec_run(const grorec_config* cfg);
/* axis: "lambda" or "n_queries". Fails if any point failed; the remaining
 * points still run. */
GROREC_API grorec_status grorec_sweep(const grorec_config* cfg, const char* axis, const double* values, size_t n);

#ifdef __cplusplus
}
#endif

#endif /* GROREC_H */
