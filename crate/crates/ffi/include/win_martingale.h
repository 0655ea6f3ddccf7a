#ifndef WIN_MARTINGALE_H
#define WIN_MARTINGALE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum {
  WM_GRID_MODE_UNIFORM = 0,
  WM_GRID_MODE_GEOMETRIC = 1,
} WmGridMode;

typedef enum {
  WM_SIGMA_SOURCE_ANALYTIC = 0,
  WM_SIGMA_SOURCE_REALIZED = 1,
} WmSigmaSource;

/**
 * Status codes returned by every fallible entry point.
 */
typedef enum {
  WM_STATUS_OK = 0,
  WM_STATUS_NULL_POINTER = 1,
  WM_STATUS_PARAMETER = 2,
  WM_STATUS_DOMAIN = 3,
  WM_STATUS_EVALUATION = 4,
  WM_STATUS_NUMERICAL = 5,
  WM_STATUS_INSUFFICIENT_DATA = 6,
  WM_STATUS_INFEASIBLE = 7,
  WM_STATUS_UNKNOWN_SPEC = 8,
  WM_STATUS_IO = 9,
  WM_STATUS_OUT_OF_RANGE = 10,
  WM_STATUS_PANIC = 11,
} WmStatus;

/**
 * Solved discrete martingale coupling.
 */
typedef struct WmCoupling WmCoupling;

/**
 * Simulated path ensemble.
 */
typedef struct WmEnsemble WmEnsemble;

/**
 * Monte-Carlo specific relative entropy with its truncation bracket.
 */
typedef struct {
  double mean;
  double std_error;
  size_t n_paths;
  double bracket_lo;
  double bracket_hi;
} WmEntropyEstimate;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *wm_version(void);

/**
 * Copies the calling thread's last error message into `buf` (truncated,
 * always NUL-terminated when `len > 0`). Returns the full message length
 * excluding the terminator; empty after a successful call.
 *
 * # Safety
 * `buf` must be null or point to `len` writable bytes.
 */
size_t wm_last_error_message(char *buf, size_t len);

/**
 * Optimal specific relative entropy of a win-martingale started at `x0`.
 *
 * # Safety
 * `out` must be null or valid for writes.
 */
WmStatus wm_optimal_value(double x0, double *out);

/**
 * Optimal cost-to-go `v_bar(s, x)`; `+inf` at `x` in `{0, 1}` for `s < 1`, NaN outside `[0,1]^2`.
 */
double wm_v_bar(double s, double x);

/**
 * Lower bound `v_tilde(s, x)`.
 */
double wm_v_tilde(double s, double x);

/**
 * Volatility `sin(pi x) / (pi sqrt(1 - t))` of the optimal martingale.
 *
 * # Safety
 * `out` must be null or valid for writes.
 */
WmStatus wm_aldous_sigma(double t, double x, double *out);

/**
 * Simulates `n_paths` paths of the model `spec_id` (`aldous`, `bass`,
 * `aldous-tc:<name>`) on `[0, 1 - epsilon_final]` and stores a new handle in `*out`.
 *
 * # Safety
 * `spec_id` must be a NUL-terminated string; `out` must be valid for writes.
 */
WmStatus wm_simulate(const char *spec_id,
                     double x0,
                     size_t n_paths,
                     size_t n_steps,
                     double epsilon_final,
                     WmGridMode mode,
                     uint64_t seed,
                     WmEnsemble **out);

/**
 * Number of paths; 0 for a null handle.
 *
 * # Safety
 * `e` must be null or a live handle from [`wm_simulate`].
 */
size_t wm_ensemble_n_paths(const WmEnsemble *e);

/**
 * Number of time nodes per path; 0 for a null handle.
 *
 * # Safety
 * `e` must be null or a live handle from [`wm_simulate`].
 */
size_t wm_ensemble_n_nodes(const WmEnsemble *e);

/**
 * Copies the time nodes into `out[0..n_nodes]`.
 *
 * # Safety
 * `e` must be a live handle; `out` must point to `len` writable doubles.
 */
WmStatus wm_ensemble_times(const WmEnsemble *e, double *out, size_t len);

/**
 * Copies path `path` into `out[0..n_nodes]`.
 *
 * # Safety
 * `e` must be a live handle; `out` must point to `len` writable doubles.
 */
WmStatus wm_ensemble_path(const WmEnsemble *e, size_t path, double *out, size_t len);

/**
 * Copies the terminal outcomes (0 or 1) into `out[0..n_paths]`.
 *
 * # Safety
 * `e` must be a live handle; `out` must point to `len` writable bytes.
 */
WmStatus wm_ensemble_terminal(const WmEnsemble *e, uint8_t *out, size_t len);

/**
 * Releases an ensemble; null is ignored.
 *
 * # Safety
 * `e` must be null or a handle from [`wm_simulate`] not yet freed.
 */
void wm_ensemble_free(WmEnsemble *e);

/**
 * Streaming Monte-Carlo estimate of the specific relative entropy.
 *
 * # Safety
 * `spec_id` must be a NUL-terminated string; `out` must be valid for writes.
 */
WmStatus wm_entropy_estimate(const char *spec_id,
                             double x0,
                             size_t n_paths,
                             size_t n_steps,
                             double epsilon_final,
                             WmGridMode mode,
                             uint64_t seed,
                             WmSigmaSource source,
                             WmEntropyEstimate *out);

/**
 * Solves a discrete problem given as JSON `{states, T, mu, nu, ref_var[, f0]}`.
 *
 * # Safety
 * `problem_json` must be a NUL-terminated string; `out` must be valid for writes.
 */
WmStatus wm_discrete_solve_json(const char *problem_json,
                                size_t max_iters,
                                double tol,
                                WmCoupling **out);

/**
 * Solves the mollified win problem on the default 201-state grid over `[-0.5, 1.5]`.
 *
 * # Safety
 * `out` must be valid for writes.
 */
WmStatus wm_discrete_solve_win(size_t n_steps,
                               double x0,
                               double width,
                               size_t max_iters,
                               double tol,
                               WmCoupling **out);

/**
 * Number of grid states; 0 for a null handle.
 *
 * # Safety
 * `c` must be null or a live coupling handle.
 */
size_t wm_coupling_n_states(const WmCoupling *c);

/**
 * Number of transition steps; 0 for a null handle.
 *
 * # Safety
 * `c` must be null or a live coupling handle.
 */
size_t wm_coupling_n_steps(const WmCoupling *c);

/**
 * Relative entropy against the reference walk: total and per step.
 *
 * # Safety
 * `c` must be a live coupling handle; outputs must be null or valid for writes.
 */
WmStatus wm_coupling_kl(const WmCoupling *c, double *total, double *per_step);

/**
 * Terminal total-variation error and largest conditional-mean error.
 *
 * # Safety
 * `c` must be a live coupling handle; outputs must be null or valid for writes.
 */
WmStatus wm_coupling_residuals(const WmCoupling *c, double *terminal_tv, double *martingale);

/**
 * Copies the grid states into `out[0..n_states]`.
 *
 * # Safety
 * `c` must be a live coupling handle; `out` must point to `len` writable doubles.
 */
WmStatus wm_coupling_states(const WmCoupling *c, double *out, size_t len);

/**
 * Copies the row-major `n_states x n_states` kernel of `step` into `out`.
 *
 * # Safety
 * `c` must be a live coupling handle; `out` must point to `len` writable doubles.
 */
WmStatus wm_coupling_kernel(const WmCoupling *c, size_t step, double *out, size_t len);

/**
 * Releases a coupling; null is ignored.
 *
 * # Safety
 * `c` must be null or a coupling handle not yet freed.
 */
void wm_coupling_free(WmCoupling *c);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* WIN_MARTINGALE_H */
