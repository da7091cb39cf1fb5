#ifndef KARLIN_H
#define KARLIN_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum KarlinStatus {
  KARLIN_STATUS_OK = 0,
  KARLIN_STATUS_NULL_POINTER = 1,
  KARLIN_STATUS_INVALID_ARGUMENT = 2,
  KARLIN_STATUS_PARAMETER = 3,
  KARLIN_STATUS_RESOURCE = 4,
  KARLIN_STATUS_CONFIG = 5,
  KARLIN_STATUS_IO = 6,
  KARLIN_STATUS_INTERNAL = 7,
} KarlinStatus;

typedef enum KarlinRegime {
  KARLIN_REGIME_NOISE = 0,
  KARLIN_REGIME_SIGNAL = 1,
  KARLIN_REGIME_CRITICAL = 2,
} KarlinRegime;

/**
 * Perturbed Karlin model with Pareto signal and noise.
 */
typedef struct KarlinModel KarlinModel;

/**
 * A simulated path.
 */
typedef struct KarlinPath KarlinPath;

/**
 * A verification report.
 */
typedef struct KarlinReport KarlinReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version, a static string.
 */
const char *karlin_version(void);

/**
 * Message of the last failed call on this thread, or NULL. Owned by the
 * library; valid until the next failing call on the same thread.
 */
const char *karlin_last_error(void);

/**
 * Releases a string returned by this library. NULL is ignored.
 *
 * # Safety
 * `s` must come from a function documented as returning an owned string and
 * must not be used afterwards.
 */
void karlin_string_free(char *s);

/**
 * Creates a model with standard Pareto signal (index `alpha`), standard
 * Pareto noise (index `alpha_prime`) and zeta labels with exponent `beta`.
 *
 * # Safety
 * `out` must be a valid pointer to writable storage for a handle.
 */
enum KarlinStatus karlin_model_new(double alpha,
                                   double alpha_prime,
                                   double beta,
                                   struct KarlinModel **out);

/**
 * # Safety
 * `model` must be NULL or a handle from [`karlin_model_new`] not yet freed.
 */
void karlin_model_free(struct KarlinModel *model);

/**
 * # Safety
 * `model` must be a live handle and `out` writable.
 */
enum KarlinStatus karlin_model_regime(const struct KarlinModel *model, enum KarlinRegime *out);

/**
 * Scaling constant of the model's regime at sample size `n`.
 *
 * # Safety
 * `model` must be a live handle and `out` writable.
 */
enum KarlinStatus karlin_model_normalizer(const struct KarlinModel *model, uint64_t n, double *out);

/**
 * Simulates `n` steps of the model with the given seed.
 *
 * # Safety
 * `model` must be a live handle and `out` writable.
 */
enum KarlinStatus karlin_simulate(const struct KarlinModel *model,
                                  uint64_t n,
                                  uint64_t seed,
                                  struct KarlinPath **out);

/**
 * # Safety
 * `path` must be NULL or a handle from [`karlin_simulate`] not yet freed.
 */
void karlin_path_free(struct KarlinPath *path);

/**
 * Number of steps in the path; 0 for NULL.
 *
 * # Safety
 * `path` must be NULL or a live handle.
 */
uint64_t karlin_path_len(const struct KarlinPath *path);

/**
 * Step `i` (zero-based): label, signal value, noise and product. Any of the
 * output pointers may be NULL.
 *
 * # Safety
 * `path` must be a live handle; non-NULL outputs must be writable.
 */
enum KarlinStatus karlin_path_get(const struct KarlinPath *path,
                                  uint64_t i,
                                  uint64_t *label,
                                  double *sigma,
                                  double *z,
                                  double *x);

/**
 * Maximum of the path over the index interval `[lo, hi)` of `[0, 1]`
 * (closed at 1), in the unscaled units of the products.
 *
 * # Safety
 * `path` must be a live handle and `out` writable.
 */
enum KarlinStatus karlin_path_box_max(const struct KarlinPath *path,
                                      double lo,
                                      double hi,
                                      double *out);

/**
 * Runs the verification suite described by a JSON config. `threads` caps
 * the worker pool; 0 uses all available cores.
 *
 * # Safety
 * `config_json` must be a NUL-terminated string and `out` writable.
 */
enum KarlinStatus karlin_verify(const char *config_json,
                                uint32_t threads,
                                struct KarlinReport **out);

/**
 * # Safety
 * `report` must be NULL or a handle from [`karlin_verify`] not yet freed.
 */
void karlin_report_free(struct KarlinReport *report);

/**
 * Whether every record passed after the multiple-testing correction.
 *
 * # Safety
 * `report` must be a live handle and `out` writable.
 */
enum KarlinStatus karlin_report_passed(const struct KarlinReport *report, bool *out);

/**
 * The report as JSON. With `canonical` set, run-dependent timing is left
 * out. The string is owned by the caller; release it with
 * [`karlin_string_free`].
 *
 * # Safety
 * `report` must be a live handle and `out` writable.
 */
enum KarlinStatus karlin_report_json(const struct KarlinReport *report, bool canonical, char **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* KARLIN_H */
