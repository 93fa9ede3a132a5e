#ifndef LTRKIT_H
#define LTRKIT_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum LtrStatus {
  LTR_STATUS_OK = 0,
  LTR_STATUS_NULL_POINTER = 1,
  LTR_STATUS_INVALID_ARGUMENT = 2,
  LTR_STATUS_IO = 3,
  LTR_STATUS_PARSE = 4,
  LTR_STATUS_SCHEMA = 5,
  LTR_STATUS_DOMAIN = 6,
  LTR_STATUS_MODEL_FORMAT = 7,
  /**
   * The result is mathematically undefined, e.g. NDCG with zero ideal gain.
   */
  LTR_STATUS_UNDEFINED = 8,
  LTR_STATUS_INTERNAL = 9,
} LtrStatus;

/**
 * A loaded dataset.
 */
typedef struct LtrDataset LtrDataset;

/**
 * A loaded tree ensemble.
 */
typedef struct LtrEnsemble LtrEnsemble;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null if none. Valid
 * until the next failing call on the same thread.
 */
const char *ltr_last_error_message(void);

/**
 * Library version as a static nul-terminated string.
 */
const char *ltr_version(void);

/**
 * Loads a dataset CSV. On success `*out` owns a handle to free with
 * [`ltr_dataset_free`].
 *
 * # Safety
 * `path` must be a nul-terminated string; `out` must be writable.
 */
enum LtrStatus ltr_dataset_load(const char *path, struct LtrDataset **out);

/**
 * Releases a dataset. Null is ignored.
 *
 * # Safety
 * `dataset` must come from [`ltr_dataset_load`] and not be freed twice.
 */
void ltr_dataset_free(struct LtrDataset *dataset);

/**
 * Group, item and feature counts of a dataset. Any out pointer may be null.
 *
 * # Safety
 * `dataset` must be a live handle; non-null out pointers must be writable.
 */
enum LtrStatus ltr_dataset_counts(const struct LtrDataset *dataset,
                                  size_t *n_groups,
                                  size_t *n_items,
                                  size_t *n_features);

/**
 * Loads a model file written by ltrkit. Free with [`ltr_ensemble_free`].
 *
 * # Safety
 * `path` must be a nul-terminated string; `out` must be writable.
 */
enum LtrStatus ltr_ensemble_load(const char *path, struct LtrEnsemble **out);

/**
 * Releases an ensemble. Null is ignored.
 *
 * # Safety
 * `ensemble` must come from [`ltr_ensemble_load`] and not be freed twice.
 */
void ltr_ensemble_free(struct LtrEnsemble *ensemble);

/**
 * Number of features the ensemble expects, or 0 for a null handle.
 *
 * # Safety
 * `ensemble` must be null or a live handle.
 */
size_t ltr_ensemble_n_features(const struct LtrEnsemble *ensemble);

/**
 * Scores one feature vector of length `len`.
 *
 * # Safety
 * `features` must point to `len` doubles; `out` must be writable.
 */
enum LtrStatus ltr_ensemble_predict(const struct LtrEnsemble *ensemble,
                                    const double *features,
                                    size_t len,
                                    double *out);

/**
 * TreeSHAP attributions of one feature vector. `phi` receives `len` values;
 * `base_value` (may be null) receives the expected model output.
 *
 * # Safety
 * `features` and `phi` must point to `len` doubles.
 */
enum LtrStatus ltr_ensemble_tree_shap(const struct LtrEnsemble *ensemble,
                                      const double *features,
                                      size_t len,
                                      double *phi,
                                      double *base_value);

/**
 * `1 / (1 + exp(-alpha (c - beta)))` for `c` in [0, 1].
 *
 * # Safety
 * `out` must be writable.
 */
enum LtrStatus ltr_sigmoid_transform(double c, double alpha, double beta, double *out);

/**
 * Scores where the transform's slope crosses 1. When `*degenerate` is set
 * the slope never exceeds 1 and `c1`, `c2` both equal `beta`.
 *
 * # Safety
 * Out pointers must be writable.
 */
enum LtrStatus ltr_compute_intervals(double alpha,
                                     double beta,
                                     double *c1,
                                     double *c2,
                                     bool *degenerate);

/**
 * NDCG@k of ratings given in ranked order, with gain `2^r - 1`. Returns
 * [`LtrStatus::Undefined`] when every rating is zero.
 *
 * # Safety
 * `ratings` must point to `len` doubles; `out` must be writable.
 */
enum LtrStatus ltr_ndcg_at_k(const double *ratings, size_t len, size_t k, double *out);

/**
 * Training label `sigma(c) * E` under the default engagement grades.
 * `outcome` is 0 (not engaged), 1 (clicked), 2 (added to cart) or 3
 * (ordered); the transform applies only when `use_transform` is set.
 *
 * # Safety
 * `out` must be writable.
 */
enum LtrStatus ltr_compose_label(double c,
                                 uint32_t outcome,
                                 bool use_transform,
                                 double alpha,
                                 double beta,
                                 double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LTRKIT_H */
