#ifndef STEINLOSS_H
#define STEINLOSS_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum SlStatus {
  SL_STATUS_OK = 0,
  SL_STATUS_NULL_POINTER = 1,
  SL_STATUS_INVALID_ARGUMENT = 2,
  SL_STATUS_SINGULAR = 3,
  SL_STATUS_RANK_DEFICIENT = 4,
  SL_STATUS_INDEX_OUT_OF_RANGE = 5,
  SL_STATUS_INTERNAL = 6,
} SlStatus;

/**
 * Regression data `y = V β + ε`.
 */
typedef struct SlModel SlModel;

/**
 * Result of a preset risk comparison.
 */
typedef struct SlRisk SlRisk;

/**
 * Cp* table over a λ grid.
 */
typedef struct SlSelection SlSelection;

typedef struct SlCpRow {
  double lambda;
  double rss;
  double df;
  double cp_star;
} SlCpRow;

typedef struct SlRiskRow {
  double theta_norm;
  double mean;
  double std_error;
  /**
   * NaN when the row has no baseline.
   */
  double baseline_mean;
  double paired_diff_mean;
  double paired_diff_se;
} SlRiskRow;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. Valid until the
 * next failing call on the same thread.
 */
const char *sl_last_error_message(void);

/**
 * Static version string.
 */
const char *sl_version(void);

/**
 * SURE `p + 2 div g + |g|²` of `x - c x/|x|²` at `x` (length `p`).
 *
 * # Safety
 * `x` must point to `p` doubles and `out` to one writable double.
 */
enum SlStatus sl_sure_james_stein(const double *x, size_t p, double c, double *out);

/**
 * `|y - fitted|²/n + 2 div σ̂²/n`.
 *
 * # Safety
 * `y` and `fitted` must point to `n` doubles, `out` to one writable double.
 */
enum SlStatus sl_cp_star(const double *y,
                         const double *fitted,
                         size_t n,
                         double divergence,
                         double sigma2_hat,
                         double *out);

/**
 * Copies `y` (length `n`) and the row-major `n x p` design `v`; with
 * `intercept` a column of ones is prepended.
 *
 * # Safety
 * `y` must point to `n` doubles, `v` to `n * p`, `out` to a writable pointer.
 */
enum SlStatus sl_model_new(const double *y,
                           const double *v,
                           size_t n,
                           size_t p,
                           bool intercept,
                           struct SlModel **out);

/**
 * # Safety
 * `model` must come from `sl_model_new` and not be used afterwards.
 */
void sl_model_free(struct SlModel *model);

/**
 * Ridge fits over `lambdas`; `sigma2_hat` NaN means the residual estimate.
 *
 * # Safety
 * `model` must be live, `lambdas` must point to `count` doubles, `out` to a
 * writable pointer.
 */
enum SlStatus sl_ridge_select(const struct SlModel *model,
                              const double *lambdas,
                              size_t count,
                              double sigma2_hat,
                              struct SlSelection **out);

/**
 * # Safety
 * `sel` must be live; `lambda`, `sigma2_hat` writable (either may be null).
 */
enum SlStatus sl_selection_chosen(const struct SlSelection *sel,
                                  double *lambda,
                                  double *sigma2_hat);

/**
 * Number of table rows; 0 for null.
 *
 * # Safety
 * `sel` must be live or null.
 */
size_t sl_selection_len(const struct SlSelection *sel);

/**
 * # Safety
 * `sel` must be live and `row` writable.
 */
enum SlStatus sl_selection_row(const struct SlSelection *sel, size_t index, struct SlCpRow *row);

/**
 * # Safety
 * `sel` must come from `sl_ridge_select` and not be used afterwards.
 */
void sl_selection_free(struct SlSelection *sel);

/**
 * Runs the risk comparison of preset `name`. `n == 0` keeps the preset's
 * replication count, `threads == 0` uses all cores.
 *
 * # Safety
 * `name` must be a NUL-terminated string and `out` a writable pointer.
 */
enum SlStatus sl_risk_preset(const char *name,
                             uint64_t n,
                             uint64_t seed,
                             size_t threads,
                             struct SlRisk **out);

/**
 * # Safety
 * `risk` must be live or null.
 */
size_t sl_risk_len(const struct SlRisk *risk);

/**
 * Whether every assertion of the preset held.
 *
 * # Safety
 * `risk` must be live and `pass` writable.
 */
enum SlStatus sl_risk_pass(const struct SlRisk *risk, bool *pass);

/**
 * # Safety
 * `risk` must be live and `row` writable.
 */
enum SlStatus sl_risk_row(const struct SlRisk *risk, size_t index, struct SlRiskRow *row);

/**
 * # Safety
 * `risk` must come from `sl_risk_preset` and not be used afterwards.
 */
void sl_risk_free(struct SlRisk *risk);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* STEINLOSS_H */
