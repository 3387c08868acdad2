#ifndef TAILOR_H
#define TAILOR_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum TailorStatus {
  TAILOR_STATUS_OK = 0,
  TAILOR_STATUS_NULL_POINTER = 1,
  TAILOR_STATUS_INVALID_ARGUMENT = 2,
  TAILOR_STATUS_NUMERICAL = 3,
  TAILOR_STATUS_IO = 4,
  TAILOR_STATUS_NOT_CONVERGED = 5,
  TAILOR_STATUS_BUFFER_TOO_SMALL = 6,
  TAILOR_STATUS_PANIC = 7,
} TailorStatus;

/**
 * Opaque service-time distribution.
 */
typedef struct TailorDistribution TailorDistribution;

/**
 * Opaque solved policy.
 */
typedef struct TailorSolution TailorSolution;

/**
 * Grid parameters; a field `<= 0` selects the library default.
 * `theta_max > 0` takes precedence over `tail_eps`.
 */
typedef struct TailorGridOptions {
  double dt;
  double y_cut;
  double theta_fine;
  double theta_max;
  double tail_eps;
  uint32_t n_log;
  double far_field_slope;
} TailorGridOptions;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or NULL. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *tailor_last_error(void);

/**
 * Exponential service with the given rate.
 *
 * # Safety
 * `out` must be NULL or valid for writes.
 */
enum TailorStatus tailor_distribution_exponential(double rate, struct TailorDistribution **out);

/**
 * Lomax (Pareto II) service; `shape` must exceed 2.
 *
 * # Safety
 * `out` must be NULL or valid for writes.
 */
enum TailorStatus tailor_distribution_lomax(double scale,
                                            double shape,
                                            struct TailorDistribution **out);

/**
 * Log-normal service, `ln Y ~ N(mu, sigma2)`.
 *
 * # Safety
 * `out` must be NULL or valid for writes.
 */
enum TailorStatus tailor_distribution_lognormal(double mu,
                                                double sigma2,
                                                struct TailorDistribution **out);

/**
 * Empirical distribution of `len` observed service times.
 *
 * # Safety
 * `values` must point to `len` readable doubles; `out` must be NULL or
 * valid for writes.
 */
enum TailorStatus tailor_distribution_from_values(const double *values,
                                                  size_t len,
                                                  struct TailorDistribution **out);

/**
 * Empirical distribution read from a trace file (one value per line).
 *
 * # Safety
 * `path` must be NULL or a nul-terminated string; `out` must be NULL or
 * valid for writes.
 */
enum TailorStatus tailor_distribution_from_samples(const char *path,
                                                   struct TailorDistribution **out);

/**
 * Releases a distribution; NULL is ignored.
 *
 * # Safety
 * `d` must be NULL or a handle from a `tailor_distribution_*` constructor
 * that has not been freed.
 */
void tailor_distribution_free(struct TailorDistribution *d);

/**
 * `E[Y]` and `E[Y²]`.
 *
 * # Safety
 * Pointers must be NULL or valid.
 */
enum TailorStatus tailor_distribution_moments(const struct TailorDistribution *d,
                                              double *mean,
                                              double *second);

/**
 * Hazard rate at service age `b`.
 *
 * # Safety
 * Pointers must be NULL or valid.
 */
enum TailorStatus tailor_distribution_hazard(const struct TailorDistribution *d,
                                             double b,
                                             double *out);

/**
 * Average cost of sampling immediately after every delivery.
 *
 * # Safety
 * Pointers must be NULL or valid.
 */
enum TailorStatus tailor_zero_wait_cost(const struct TailorDistribution *d,
                                        double kappa_s,
                                        double *rho);

/**
 * Optimal threshold sampling without preemption.
 *
 * # Safety
 * Pointers must be NULL or valid.
 */
enum TailorStatus tailor_aoi_np(const struct TailorDistribution *d,
                                double kappa_s,
                                double *rho,
                                double *beta);

/**
 * Library defaults: every field selects its default.
 */
struct TailorGridOptions tailor_grid_options_default(void);

/**
 * Runs policy iteration. `grid` may be NULL for defaults.
 *
 * When iteration stops at the limit without converging, the best iterate is
 * still returned through `out` together with `NotConverged`.
 *
 * # Safety
 * Pointers must be NULL or valid; `*out` receives a handle to free with
 * [`tailor_solution_free`].
 */
enum TailorStatus tailor_solve(const struct TailorDistribution *d,
                               double kappa_s,
                               double kappa_p,
                               const struct TailorGridOptions *grid,
                               struct TailorSolution **out);

/**
 * Releases a solution; NULL is ignored.
 *
 * # Safety
 * `s` must be NULL or a handle from [`tailor_solve`] that has not been freed.
 */
void tailor_solution_free(struct TailorSolution *s);

/**
 * Optimal average cost.
 *
 * # Safety
 * Pointers must be NULL or valid.
 */
enum TailorStatus tailor_solution_rho(const struct TailorSolution *s, double *rho);

/**
 * Number of state-grid nodes (length of the per-node arrays).
 *
 * # Safety
 * Pointers must be NULL or valid.
 */
enum TailorStatus tailor_solution_len(const struct TailorSolution *s, size_t *len);

/**
 * Copies the relative value function `v(y_i)` into `buf`.
 *
 * # Safety
 * `buf` must be valid for `len` writes.
 */
enum TailorStatus tailor_solution_values(const struct TailorSolution *s, double *buf, size_t len);

/**
 * Copies the sampling AoI `z(y_i)` into `buf`.
 *
 * # Safety
 * `buf` must be valid for `len` writes.
 */
enum TailorStatus tailor_solution_sample_targets(const struct TailorSolution *s,
                                                 double *buf,
                                                 size_t len);

/**
 * Copies the preemption threshold `θ(y_i)` into `buf` (`INFINITY` = never).
 *
 * # Safety
 * `buf` must be valid for `len` writes.
 */
enum TailorStatus tailor_solution_thresholds(const struct TailorSolution *s,
                                             double *buf,
                                             size_t len);

/**
 * Simulates the solved policy for `cycles` deliveries.
 *
 * # Safety
 * Pointers must be NULL or valid.
 */
enum TailorStatus tailor_simulate(const struct TailorSolution *s,
                                  const struct TailorDistribution *d,
                                  double kappa_s,
                                  double kappa_p,
                                  uint64_t cycles,
                                  uint64_t seed,
                                  double *avg_cost,
                                  double *stderr);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TAILOR_H */
