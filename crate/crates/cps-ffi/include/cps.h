#ifndef CPS_H
#define CPS_H

/* Generated by cbindgen; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Instant dormant recovery marker for `cps_rates_custom_variant`.
 */
#define CPS_DELTA_D_INSTANT -1.0

/**
 * Status codes returned by every fallible function.
 */
typedef enum CpsStatus {
  CpsStatusOk = 0,
  CpsStatusNullPointer = 1,
  CpsStatusInvalidArgument = 2,
  CpsStatusPrecondition = 3,
  CpsStatusPanic = 4,
} CpsStatus;

/**
 * Opaque lattice handle.
 */
typedef struct CpsLattice CpsLattice;

/**
 * Opaque rate-parameter handle.
 */
typedef struct CpsRates CpsRates;

/**
 * Opaque sampled-trajectory handle.
 */
typedef struct CpsTrajectory CpsTrajectory;

/**
 * Closed-form comparison rates for one parameter set.
 */
typedef struct CpsBounds {
  double alpha;
  double lambda_star;
  double delta_star;
  double lambda_max;
  double delta_bar;
  double lambda_bar_outgoing;
  double lambda_bar_incoming;
  double delta_max;
} CpsBounds;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Latest error message for this thread; valid until the next failing call.
 */
const char *cps_last_error(void);

/**
 * Builds a named preset. `name` is one of `cp`, `cpd_microbial`,
 * `cpd_social`, `cpree`, `cpb`, `cpid`. `delta_d` is ignored by presets
 * that pin it; pass any value there.
 *
 * # Safety
 * `name` must be a NUL-terminated string and `out` a valid pointer.
 */
enum CpsStatus cps_rates_preset(const char *name,
                                double lambda,
                                double delta_a,
                                double delta_d,
                                double sigma,
                                double rho,
                                struct CpsRates **out);

/**
 * Builds a fully custom plain-variant rate set.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum CpsStatus cps_rates_custom(double lambda_aa,
                                double lambda_ad,
                                double lambda_da,
                                double lambda_dd,
                                double delta_a,
                                double delta_d,
                                double sigma,
                                double rho,
                                struct CpsRates **out);

/**
 * # Safety
 * `rates` must come from a constructor of this library, or be null.
 */
void cps_rates_free(struct CpsRates *rates);

/**
 * One-dimensional periodic ring with nearest-neighbor offsets.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum CpsStatus cps_lattice_ring(uintptr_t len, struct CpsLattice **out);

/**
 * d-dimensional box with nearest-neighbor offsets; `periodic != 0` wraps.
 *
 * # Safety
 * `sides` must point to `ndim` entries; `out` must be valid.
 */
enum CpsStatus cps_lattice_box(const uintptr_t *sides,
                               uintptr_t ndim,
                               int32_t periodic,
                               struct CpsLattice **out);

/**
 * # Safety
 * `lattice` must come from a constructor of this library, or be null.
 */
void cps_lattice_free(struct CpsLattice *lattice);

/**
 * Number of sites of a lattice handle.
 *
 * # Safety
 * `lattice` must be a valid handle.
 */
uintptr_t cps_lattice_sites(const struct CpsLattice *lattice);

/**
 * Computes every closed-form comparison rate for `rates` with the given
 * neighborhood size.
 *
 * # Safety
 * `rates` and `out` must be valid pointers.
 */
enum CpsStatus cps_bounds(const struct CpsRates *rates,
                          uintptr_t neighborhood_size,
                          struct CpsBounds *out);

/**
 * Simulates one trajectory and returns a handle to its samples.
 *
 * `x0`/`a0` list initially infected/active sites. For the blocking variant
 * initially infected sites are forced active.
 *
 * # Safety
 * Array pointers must cover their stated lengths; handles must be valid.
 */
enum CpsStatus cps_simulate(const struct CpsLattice *lattice,
                            const struct CpsRates *rates,
                            const uintptr_t *x0,
                            uintptr_t x0_len,
                            const uintptr_t *a0,
                            uintptr_t a0_len,
                            double horizon,
                            uint64_t seed,
                            const double *sample_times,
                            uintptr_t n_samples,
                            struct CpsTrajectory **out);

/**
 * # Safety
 * `traj` must come from `cps_simulate`, or be null.
 */
void cps_trajectory_free(struct CpsTrajectory *traj);

/**
 * Number of samples in a trajectory.
 *
 * # Safety
 * `traj` must be a valid handle.
 */
uintptr_t cps_trajectory_len(const struct CpsTrajectory *traj);

/**
 * Sample time at index `i`, or NaN when out of range.
 *
 * # Safety
 * `traj` must be a valid handle.
 */
double cps_trajectory_time(const struct CpsTrajectory *traj, uintptr_t i);

/**
 * Infected count at sample `i`; 0 when out of range.
 *
 * # Safety
 * `traj` must be a valid handle.
 */
uintptr_t cps_trajectory_infected(const struct CpsTrajectory *traj, uintptr_t i);

/**
 * Active count at sample `i`; 0 when out of range.
 *
 * # Safety
 * `traj` must be a valid handle.
 */
uintptr_t cps_trajectory_active(const struct CpsTrajectory *traj, uintptr_t i);

/**
 * Writes the extinction time to `out_time` and returns 1 if the infection
 * died before the horizon, else returns 0 and writes the horizon.
 *
 * # Safety
 * `traj` and `out_time` must be valid pointers.
 */
int32_t cps_trajectory_extinction(const struct CpsTrajectory *traj, double *out_time);

/**
 * Runs a survival sweep and returns the result CSV as a heap string; free
 * it with `cps_string_free`.
 *
 * # Safety
 * Array pointers must cover their stated lengths; handles must be valid.
 */
enum CpsStatus cps_survival_sweep_csv(const struct CpsLattice *lattice,
                                      const struct CpsRates *template_,
                                      const double *lambda_grid,
                                      uintptr_t n_lambda,
                                      const double *horizons,
                                      uintptr_t n_horizons,
                                      uint32_t replicas,
                                      uint64_t seed,
                                      char **out);

/**
 * Frees a string returned by this library.
 *
 * # Safety
 * `ptr` must come from this library, or be null.
 */
void cps_string_free(char *ptr);

/**
 * Builds a rate set for a non-plain variant: `variant` is 1 for blocking,
 * 2 for infection dormancy. Pass `CPS_DELTA_D_INSTANT` as `delta_d` for the
 * blocking variant.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum CpsStatus cps_rates_custom_variant(double lambda_aa,
                                        double lambda_ad,
                                        double delta_a,
                                        double delta_d,
                                        double sigma,
                                        double rho,
                                        int32_t variant,
                                        struct CpsRates **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CPS_H */
