#ifndef ART_FFI_H
#define ART_FFI_H

/* Generated by cbindgen. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by every fallible function.
 */
typedef enum ArtStatus {
  ART_STATUS_OK = 0,
  ART_STATUS_NULL_POINTER = 1,
  ART_STATUS_INVALID_ARGUMENT = 2,
  ART_STATUS_INVALID_DATA = 3,
  ART_STATUS_IDENTIFICATION_FAILURE = 4,
  ART_STATUS_NUMERICAL_FAILURE = 5,
  ART_STATUS_PANIC = 6,
} ArtStatus;

/**
 * How sign changes are drawn.
 */
typedef enum ArtGroupMode {
  /**
   * Exhaustive up to 14 clusters, sampled beyond.
   */
  ART_GROUP_MODE_AUTO = 0,
  ART_GROUP_MODE_EXHAUSTIVE = 1,
  ART_GROUP_MODE_SAMPLED = 2,
} ArtGroupMode;

/**
 * Opaque clustered dataset.
 */
typedef struct ArtDataset ArtDataset;

typedef struct ArtGroupOptions {
  enum ArtGroupMode mode;
  /**
   * Number of sign vectors in sampled mode, identity included.
   */
  size_t draws;
  uint64_t seed;
} ArtGroupOptions;

typedef struct ArtTestOutput {
  double statistic;
  double critical_value;
  double p_value;
  /**
   * 1 when the null is rejected.
   */
  int32_t reject;
  size_t group_size;
} ArtTestOutput;

/**
 * Interval endpoints; an infinite endpoint sets its flag and stores
 * `-INFINITY` or `INFINITY`.
 */
typedef struct ArtInterval {
  double lambda0;
  double lower;
  double upper;
  int32_t lower_infinite;
  int32_t upper_infinite;
} ArtInterval;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Build a dataset from `n` observations with `d` covariates.
 *
 * `covariates` is row-major `n * d`; `cluster_ids` assigns each row to a
 * cluster. Clusters are ordered by first appearance.
 *
 * # Safety
 * `outcomes` and `cluster_ids` must point to `n` values, `covariates` to
 * `n * d` values, and `out` to writable storage for one pointer.
 */
enum ArtStatus art_dataset_new(size_t n,
                               size_t d,
                               const double *outcomes,
                               const double *covariates,
                               const int64_t *cluster_ids,
                               struct ArtDataset **out);

/**
 * Release a dataset. Null is ignored.
 *
 * # Safety
 * `ds` must come from [`art_dataset_new`] and not be used afterwards.
 */
void art_dataset_free(struct ArtDataset *ds);

/**
 * Number of clusters, or 0 for a null handle.
 *
 * # Safety
 * `ds` must be null or a live handle.
 */
size_t art_dataset_num_clusters(const struct ArtDataset *ds);

/**
 * Number of observations, or 0 for a null handle.
 *
 * # Safety
 * `ds` must be null or a live handle.
 */
size_t art_dataset_num_observations(const struct ArtDataset *ds);

/**
 * Randomization test of `c'beta = null_value`. `group` may be null for the
 * default automatic group; `studentized` selects the studentized statistic.
 *
 * # Safety
 * `ds` must be a live handle, `contrast` must point to `contrast_len`
 * values, and `out` must be writable.
 */
enum ArtStatus art_test(const struct ArtDataset *ds,
                        const double *contrast,
                        size_t contrast_len,
                        double null_value,
                        double alpha,
                        const struct ArtGroupOptions *group,
                        int32_t studentized,
                        struct ArtTestOutput *out);

/**
 * Closed-form confidence interval for `c'beta` at level `1 - alpha`.
 *
 * # Safety
 * Same requirements as [`art_test`].
 */
enum ArtStatus art_ci(const struct ArtDataset *ds,
                      const double *contrast,
                      size_t contrast_len,
                      double alpha,
                      const struct ArtGroupOptions *group,
                      struct ArtInterval *out);

/**
 * Sizes of `q` consecutive blocks over `n` observations.
 *
 * # Safety
 * `base_size` and `last_size` must be writable.
 */
enum ArtStatus art_plan_blocks(size_t n, size_t q, size_t *base_size, size_t *last_size);

/**
 * Message for the last failure on this thread, or null. The pointer stays
 * valid until the next call into this library on the same thread.
 */
const char *art_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *art_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ART_FFI_H */
