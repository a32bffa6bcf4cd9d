#ifndef NVDEER_H
#define NVDEER_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every fallible call.
 */
typedef enum NvdeerStatus {
  NVDEER_STATUS_OK = 0,
  NVDEER_STATUS_NULL_POINTER = 1,
  NVDEER_STATUS_INVALID_ARGUMENT = 2,
  NVDEER_STATUS_INFEASIBLE = 3,
  NVDEER_STATUS_OUT_OF_RANGE = 4,
  NVDEER_STATUS_PANIC = 5,
} NvdeerStatus;

/**
 * Opaque χ² surface with its local minima.
 */
typedef struct NvdeerFitGrid NvdeerFitGrid;

/**
 * Opaque list of transition lines, ascending in frequency.
 */
typedef struct NvdeerSpectrum NvdeerSpectrum;

/**
 * Opaque spin system.
 */
typedef struct NvdeerSpinSystem NvdeerSpinSystem;

/**
 * Drive pulse: Rabi frequency and detuning in MHz, length in µs.
 */
typedef struct NvdeerPulse {
  double rabi_mhz;
  double detuning_mhz;
  double length_us;
} NvdeerPulse;

/**
 * DEER signal with its error estimate.
 */
typedef struct NvdeerSignal {
  double value;
  double est_error;
  bool converged;
} NvdeerSignal;

/**
 * One grid-local minimum with its Δχ² = 1 intervals (angles in radians).
 */
typedef struct NvdeerMinimum {
  double b_gauss;
  double theta;
  double chi2;
  double b_lower;
  double b_upper;
  double theta_lower;
  double theta_upper;
  /**
   * Some interval edge ran off the grid.
   */
  bool open;
} NvdeerMinimum;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a NUL-terminated static string.
 */
const char *nvdeer_version(void);

/**
 * Length in bytes of the last error message on this thread, excluding NUL.
 */
size_t nvdeer_last_error_length(void);

/**
 * Copies the last error message (NUL-terminated, truncated to fit) into
 * `buf` and returns the full message length excluding NUL.
 *
 * # Safety
 * `buf` must be null or valid for `len` bytes.
 */
size_t nvdeer_last_error_message(char *buf, size_t len);

/**
 * Single-target DEER signal by quadrature; each node count must be ≥ 4.
 *
 * # Safety
 * `pulse_in`, `bias_direction` (3 doubles) and `out` must be valid pointers.
 */
enum NvdeerStatus nvdeer_deer_signal_quadrature(double c,
                                                const struct NvdeerPulse *pulse_in,
                                                const double *bias_direction,
                                                size_t n_phi_rand,
                                                size_t n_cos_theta1,
                                                size_t n_phi1,
                                                struct NvdeerSignal *out);

/**
 * Single-target DEER signal by Monte Carlo (`n_samples` ≥ 1000).
 *
 * # Safety
 * `pulse_in`, `bias_direction` (3 doubles) and `out` must be valid pointers.
 */
enum NvdeerStatus nvdeer_deer_signal_montecarlo(double c,
                                                const struct NvdeerPulse *pulse_in,
                                                const double *bias_direction,
                                                size_t n_samples,
                                                uint64_t seed,
                                                struct NvdeerSignal *out);

/**
 * Closed-form ensemble signal for a given n c̄².
 *
 * # Safety
 * `pulse_in` and `out` must be valid pointers.
 */
enum NvdeerStatus nvdeer_ensemble_signal(double n_c2,
                                         const struct NvdeerPulse *pulse_in,
                                         struct NvdeerSignal *out);

/**
 * First revival detuning √(1/t_p² − Ω²), MHz. Infeasible when Ω t_p > 1.
 *
 * # Safety
 * `pulse_in` and `out` must be valid pointers.
 */
enum NvdeerStatus nvdeer_revival_detuning(const struct NvdeerPulse *pulse_in, double *out);

/**
 * κ in nm³ for an echo half length `tau_us`.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum NvdeerStatus nvdeer_kappa(double tau_us, double *out);

/**
 * n c̄² of a film above an NV at depth `nv_depth_nm`; pass `INFINITY` as
 * the thickness for an infinitely thick film.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum NvdeerStatus nvdeer_accumulate_nc2(double nv_depth_nm,
                                        double film_thickness_nm,
                                        double spin_density_nm3,
                                        double tau_us,
                                        double *out);

/**
 * Deepest NV reaching n c̄² = 1. Infeasible when no depth does.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum NvdeerStatus nvdeer_threshold_depth(double spin_density_nm3,
                                         double film_thickness_nm,
                                         double tau_us,
                                         double *out);

/**
 * Creates a preset: "Cu2+", "P1" or "free-electron".
 *
 * # Safety
 * `name` must be a NUL-terminated string and `out` a valid pointer.
 */
enum NvdeerStatus nvdeer_spin_system_preset(const char *name, struct NvdeerSpinSystem **out);

/**
 * Creates a system from principal g and hyperfine (MHz) values.
 *
 * # Safety
 * `g` and `hyperfine_mhz` must point to 3 doubles and `out` be valid.
 */
enum NvdeerStatus nvdeer_spin_system_new(double electron_spin,
                                         double nuclear_spin,
                                         const double *g,
                                         const double *hyperfine_mhz,
                                         double nuclear_g,
                                         double quadrupole_mhz,
                                         struct NvdeerSpinSystem **out);

/**
 * # Safety
 * `sys` must be null or a handle from this library not yet freed.
 */
void nvdeer_spin_system_free(struct NvdeerSpinSystem *sys);

/**
 * Transition spectrum at field magnitude `b_gauss` and angles in radians.
 *
 * # Safety
 * `sys` must be a live handle and `out` a valid pointer.
 */
enum NvdeerStatus nvdeer_spectrum_compute(const struct NvdeerSpinSystem *sys,
                                          double b_gauss,
                                          double theta,
                                          double phi,
                                          struct NvdeerSpectrum **out);

/**
 * Number of lines; 0 for a null handle.
 *
 * # Safety
 * `spec` must be null or a live handle.
 */
size_t nvdeer_spectrum_len(const struct NvdeerSpectrum *spec);

/**
 * # Safety
 * `spec` must be a live handle; `frequency_mhz` and `intensity` valid.
 */
enum NvdeerStatus nvdeer_spectrum_line(const struct NvdeerSpectrum *spec,
                                       size_t index,
                                       double *frequency_mhz,
                                       double *intensity);

/**
 * # Safety
 * `spec` must be null or a handle from this library not yet freed.
 */
void nvdeer_spectrum_free(struct NvdeerSpectrum *spec);

/**
 * χ² over a B (G) × θ (rad) grid against `n_peaks` observed peaks.
 *
 * # Safety
 * Array pointers must be valid for their stated lengths; `sys` a live
 * handle and `out` valid.
 */
enum NvdeerStatus nvdeer_fit_grid_compute(const struct NvdeerSpinSystem *sys,
                                          const double *peak_mhz,
                                          const double *peak_sigma_mhz,
                                          size_t n_peaks,
                                          const double *b_grid,
                                          size_t n_b,
                                          const double *theta_grid,
                                          size_t n_theta,
                                          double match_floor,
                                          struct NvdeerFitGrid **out);

/**
 * χ² at grid cell (`ib`, `it`); +∞ marks infeasible cells.
 *
 * # Safety
 * `grid` must be a live handle and `out` valid.
 */
enum NvdeerStatus nvdeer_fit_grid_chi2(const struct NvdeerFitGrid *grid,
                                       size_t ib,
                                       size_t it,
                                       double *out);

/**
 * Number of grid-local minima; 0 for a null handle.
 *
 * # Safety
 * `grid` must be null or a live handle.
 */
size_t nvdeer_fit_grid_minima_count(const struct NvdeerFitGrid *grid);

/**
 * The `index`-th minimum, lowest χ² first.
 *
 * # Safety
 * `grid` must be a live handle and `out` valid.
 */
enum NvdeerStatus nvdeer_fit_grid_minimum(const struct NvdeerFitGrid *grid,
                                          size_t index,
                                          struct NvdeerMinimum *out);

/**
 * # Safety
 * `grid` must be null or a handle from this library not yet freed.
 */
void nvdeer_fit_grid_free(struct NvdeerFitGrid *grid);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* NVDEER_H */
