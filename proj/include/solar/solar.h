/*
 * C interface to the solar library: long-tailed partial-label learning with
 * a transport-based pseudo-label refinery.
 *
 * All functions return SOLAR_OK on success; on failure they return a status
 * code and leave a human-readable message in solar_last_error() (per
 * thread). Strings returned through char** out-parameters are owned by the
 * caller and must be released with solar_string_free(). Handles are opaque
 * and freed with their matching *_free function.
 */
#ifndef SOLAR_SOLAR_H
#define SOLAR_SOLAR_H

#include <stddef.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum solar_status {
    SOLAR_OK = 0,
    SOLAR_ERR_INTERNAL = 1, /* unexpected failure */
    SOLAR_ERR_USAGE = 2,    /* invalid configuration or arguments */
    SOLAR_ERR_DATA = 3,     /* parse failure or violated data invariant */
    SOLAR_ERR_DIVERGED = 4, /* unrecoverable numerical divergence */
    SOLAR_ERR_IO = 5        /* file open/read/write failure */
} solar_status;

typedef struct solar_dataset solar_dataset;
typedef struct solar_model solar_model;

const char* solar_version(void);

/* Message for the most recent failing call on this thread. */
const char* solar_last_error(void);

void solar_string_free(char* str);

/* ---- datasets ------------------------------------------------------- */

solar_status solar_dataset_load(const char* path, solar_dataset** out);
solar_status solar_dataset_save(const solar_dataset* ds, const char* path);

/* gen_config_json: {"num_classes", "dim", "n_head", "imbalance_ratio",
 * "separation", "phi", "flip": "uniform"|"banded"|"matrix",
 * "flip_matrix": [[...]], "seed"} */
solar_status solar_dataset_generate(const char* gen_config_json, solar_dataset** out);

/* Balanced labeled evaluation set drawn from the same generator geometry. */
solar_status solar_dataset_generate_test(const char* gen_config_json, size_t per_class,
                                         unsigned long long seed, solar_dataset** out);

void solar_dataset_free(solar_dataset* ds);

size_t solar_dataset_num_samples(const solar_dataset* ds);
size_t solar_dataset_num_classes(const solar_dataset* ds);
size_t solar_dataset_num_features(const solar_dataset* ds);

/* {"num_samples", "num_classes", "dim", "mean_candidate_size",
 * "achieved_gamma" (null without class counts), "has_true_labels"} */
solar_status solar_dataset_summary(const solar_dataset* ds, char** out_json);

/* ---- standalone solver ---------------------------------------------- */

/* request: {"P": [[...]], "candidates": [[int]], "r": [...],
 *           "config": {...sinkhorn fields...}}
 * response: {"Q": [[...]], "diagnostics": {"iterations", "relaxed",
 *            "row_marginal_error", "column_marginal_error"}} */
solar_status solar_solve(const char* request_json, char** out_json);

/* ---- training -------------------------------------------------------- */

/* Validate a run config and return it with every default filled in. */
solar_status solar_resolve_run_config(const char* run_config_json, char** out_json);

/* run_config_json: {"seed" (mandatory), "train": {...}, "sinkhorn": {...},
 * "selection": {...}, "prior": {...}}. eval_data may be NULL; when given,
 * per-epoch group accuracies enter the metrics stream. metrics_jsonl_path
 * may be NULL to skip writing the stream. */
solar_status solar_train(const solar_dataset* train_data, const solar_dataset* eval_data,
                         const char* run_config_json, const char* metrics_jsonl_path,
                         solar_model** out_model);

solar_status solar_model_save(const solar_model* model, const char* path);
solar_status solar_model_load(const char* path, solar_model** out);
void solar_model_free(solar_model* model);

/* Estimated class prior carried by the model, as a JSON array. */
solar_status solar_model_prior(const solar_model* model, char** out_json);

/* ---- evaluation ------------------------------------------------------ */

/* eval_config_json (may be NULL): {"zeta": float, "groups": {"many": [...],
 * "medium": [...], "few": [...]}}; groups default to size-sorted thirds.
 * Output: {"overall", "many", "medium", "few", "num_samples", "zeta",
 * "few_prediction_count"}. */
solar_status solar_evaluate(const solar_model* model, const solar_dataset* test_data,
                            const char* eval_config_json, char** out_json);

/* ---- reporting ------------------------------------------------------- */

/* format: "csv" or "json". */
solar_status solar_report(const char* metrics_jsonl_path, const char* out_path,
                          const char* format);

#ifdef __cplusplus
}
#endif

#endif /* SOLAR_SOLAR_H */
