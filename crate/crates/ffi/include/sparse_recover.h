#ifndef SPARSE_RECOVER_H
#define SPARSE_RECOVER_H

/* Generated by cbindgen; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes shared by every function.
 */
typedef enum SrStatus {
  SR_STATUS_OK = 0,
  SR_STATUS_NULL_POINTER = 1,
  SR_STATUS_INVALID_PARAMETER = 2,
  SR_STATUS_DIMENSION_MISMATCH = 3,
  SR_STATUS_ZERO_COLUMN = 4,
  SR_STATUS_REGIME_VIOLATION = 5,
  SR_STATUS_INDEX_OUT_OF_RANGE = 6,
  SR_STATUS_PANIC = 7,
} SrStatus;

/**
 * Threshold regimes, matching the library order.
 */
typedef enum SrRegime {
  SR_REGIME_KNOWN_ALL = 0,
  SR_REGIME_KNOWN_A = 1,
  SR_REGIME_KNOWN_SIGMA = 2,
  SR_REGIME_FULLY_ADAPTIVE = 3,
} SrRegime;

/**
 * Opaque dataset handle.
 */
typedef struct SrDataset SrDataset;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the last error message of this thread into `buf` (NUL terminated,
 * truncated to `len - 1` bytes) and returns the full message length.
 *
 * # Safety
 * `buf` must be null or valid for `len` bytes.
 */
size_t sr_last_error(char *buf, size_t len);

/**
 * Library version as a static NUL-terminated string.
 */
const char *sr_version(void);

/**
 * Copies a row-major `n x p` design and a length-`n` response into a new
 * dataset handle.
 *
 * # Safety
 * `x` must be valid for `n * p` reads, `y` for `n`, `out` for one write.
 */
enum SrStatus sr_dataset_new(const double *x,
                             const double *y,
                             size_t n,
                             size_t p,
                             struct SrDataset **out);

/**
 * Generates a Gaussian instance with all nonzero coefficients equal to `a`.
 * When `beta` is non-null it receives the `p` true coefficients.
 *
 * # Safety
 * `out` must be valid for one write; `beta` null or valid for `p` writes.
 */
enum SrStatus sr_dataset_generate(size_t n,
                                  size_t p,
                                  size_t s,
                                  double a,
                                  double sigma,
                                  uint64_t seed,
                                  double *beta,
                                  struct SrDataset **out);

/**
 * Releases a dataset handle; null is ignored.
 *
 * # Safety
 * `handle` must come from this library and not be used afterwards.
 */
void sr_dataset_free(struct SrDataset *handle);

/**
 * Rows of the dataset, or 0 for a null handle.
 *
 * # Safety
 * `handle` must be null or a live dataset handle.
 */
size_t sr_dataset_n(const struct SrDataset *handle);

/**
 * Columns of the dataset, or 0 for a null handle.
 *
 * # Safety
 * `handle` must be null or a live dataset handle.
 */
size_t sr_dataset_p(const struct SrDataset *handle);

/**
 * Two-step selector. The first `n1` rows fit the square-root SLOPE pilot
 * (practical penalty), the rest are thresholded under `regime`. Parameters
 * not used by the regime are ignored. `support` receives `p` bytes of 0/1;
 * `sigma_hat`, when non-null, receives the residual scale on the second part.
 *
 * # Safety
 * `handle` must be live, `support` valid for `p` writes, `sigma_hat` null or
 * valid for one write.
 */
enum SrStatus sr_select(const struct SrDataset *handle,
                        enum SrRegime regime,
                        double a,
                        double sigma,
                        size_t s,
                        double delta,
                        size_t n1,
                        uint8_t *support,
                        double *sigma_hat);

/**
 * Median-of-means selector with `k` blocks (0 picks the default rule) and
 * noise scale `sigma`. Same layout conventions as [`sr_select`].
 *
 * # Safety
 * `handle` must be live and `support` valid for `p` writes.
 */
enum SrStatus sr_mom_select(const struct SrDataset *handle,
                            double sigma,
                            size_t k,
                            size_t n1,
                            uint8_t *support);

/**
 * Proximal operator of `scale * sum_j lambda_j |v|_(j)`; `lambda` must be
 * non-increasing and nonnegative.
 *
 * # Safety
 * `v`, `lambda` and `out` must be valid for `len` elements.
 */
enum SrStatus sr_prox_sorted_l1(const double *v,
                                const double *lambda,
                                size_t len,
                                double scale,
                                double *out);

/**
 * Monte Carlo estimate of `psi` (`plus == 0`) or `psi_plus` (`plus != 0`).
 * `se` receives the standard error, or NaN for a single trial.
 *
 * # Safety
 * `value` must be valid for one write; `se` null or valid for one write.
 */
enum SrStatus sr_psi(size_t n,
                     size_t p,
                     size_t s,
                     double a,
                     double sigma,
                     size_t trials,
                     uint64_t seed,
                     int32_t plus,
                     double *value,
                     double *se);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SPARSE_RECOVER_H */
