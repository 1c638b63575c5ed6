#ifndef BEAMWAVE_H
#define BEAMWAVE_H

#pragma once

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum BwModel {
  BW_MODEL_PARABOLIC = 0,
  BW_MODEL_WHITE_NOISE = 1,
} BwModel;

typedef enum BwStatus {
  BW_STATUS_OK = 0,
  BW_STATUS_NULL_POINTER = 1,
  /*
   Invalid parameters or configuration (CLI exit code 2).
   */
  BW_STATUS_INVALID_ARGUMENT = 2,
  /*
   Numerical invariant violated (CLI exit code 3).
   */
  BW_STATUS_NUMERICAL = 3,
  BW_STATUS_IO = 4,
  BW_STATUS_BUFFER_TOO_SMALL = 5,
  BW_STATUS_PANIC = 6,
} BwStatus;

typedef enum BwVariant {
  BW_VARIANT_BOUNDED_POWER_LAW = 0,
  BW_VARIANT_VON_KARMAN = 1,
  BW_VARIANT_HILL = 2,
} BwVariant;

typedef struct BwConfig BwConfig;

typedef struct BwKernel BwKernel;

typedef struct BwSpectrum BwSpectrum;

typedef struct BwStats BwStats;

/*
 Moments of one observable `<Psi_z, theta>`.
 */
typedef struct BwObservable {
  double mean_re;
  double mean_im;
  double var_re;
  double var_im;
  double se_re;
  double se_im;
} BwObservable;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Copies the message of the last failure on this thread into `buf`
 (NUL-terminated). `needed` receives the full length including the NUL;
 returns `BW_STATUS_BUFFER_TOO_SMALL` if `len` is not enough.

 # Safety
 `buf` must be valid for `len` bytes (or null with `len == 0`).
 */
enum BwStatus bw_last_error_message(char *buf, uintptr_t len, uintptr_t *needed);

/*
 # Safety
 `out` must be a valid pointer.
 */
enum BwStatus bw_spectrum_new(enum BwVariant variant,
                              double h,
                              double eta,
                              double rho,
                              double amplitude,
                              struct BwSpectrum **out);

/*
 `Φ(|κ|)`.

 # Safety
 `spec` must come from `bw_spectrum_new`; `out` must be valid.
 */
enum BwStatus bw_spectrum_eval(const struct BwSpectrum *spec, double kappa, double *out);

/*
 `∫|κ|²Φ dκ`.

 # Safety
 As for `bw_spectrum_eval`.
 */
enum BwStatus bw_spectrum_laplacian_moment(const struct BwSpectrum *spec, double *out);

/*
 `Γ(r)` by quadrature.

 # Safety
 As for `bw_spectrum_eval`.
 */
enum BwStatus bw_gamma1_radial(const struct BwSpectrum *spec, double r, double *out);

/*
 Structure function `D(r)` of the origin-pinned kernel.

 # Safety
 As for `bw_spectrum_eval`.
 */
enum BwStatus bw_gamma_prime_structure(const struct BwSpectrum *spec, double r, double *out);

/*
 # Safety
 `spec` must be null or come from `bw_spectrum_new`, and not be used
 afterwards.
 */
void bw_spectrum_free(struct BwSpectrum *spec);

/*
 Kernel tabulated on an `n`-point (per axis) grid of spacing `dx`.

 # Safety
 `spec` must come from `bw_spectrum_new`; `out` must be valid.
 */
enum BwStatus bw_kernel_new(const struct BwSpectrum *spec,
                            uintptr_t dim_t,
                            uintptr_t n,
                            double dx,
                            bool periodic,
                            struct BwKernel **out);

/*
 `Γ₀`; fails for the origin-pinned kernel.

 # Safety
 `kernel` must come from `bw_kernel_new`; `out` must be valid.
 */
enum BwStatus bw_kernel_gamma0(const struct BwKernel *kernel, double *out);

/*
 Interpolated radial kernel at distance `r`.

 # Safety
 As for `bw_kernel_gamma0`.
 */
enum BwStatus bw_kernel_radial(const struct BwKernel *kernel, double r, double *out);

/*
 Kernel between flat grid indices `i` and `j`.

 # Safety
 As for `bw_kernel_gamma0`.
 */
enum BwStatus bw_kernel_grid_value(const struct BwKernel *kernel,
                                   uintptr_t i,
                                   uintptr_t j,
                                   double *out);

/*
 # Safety
 `kernel` must be null or come from `bw_kernel_new`.
 */
void bw_kernel_free(struct BwKernel *kernel);

/*
 The built-in desk configuration.

 # Safety
 `out` must be valid.
 */
enum BwStatus bw_config_desk(struct BwConfig **out);

/*
 Parses and validates a JSON run configuration.

 # Safety
 `json` must be a NUL-terminated string; `out` must be valid.
 */
enum BwStatus bw_config_from_json(const char *json, struct BwConfig **out);

/*
 SHA-256 of the canonical configuration JSON as 64 hex digits plus NUL.

 # Safety
 `buf` must be valid for `len` bytes.
 */
enum BwStatus bw_config_hash(const struct BwConfig *config, char *buf, uintptr_t len);

/*
 # Safety
 `config` must be null or come from a `bw_config_*` constructor.
 */
void bw_config_free(struct BwConfig *config);

/*
 Runs `realizations` realizations (seeded by `seed`) and returns their
 statistics.

 # Safety
 `config` must be a valid handle; `out` must be valid.
 */
enum BwStatus bw_run_ensemble(const struct BwConfig *config,
                              enum BwModel model,
                              uintptr_t realizations,
                              uint64_t seed,
                              struct BwStats **out);

/*
 # Safety
 `stats` must be a valid handle; `out` must be valid.
 */
enum BwStatus bw_stats_count(const struct BwStats *stats, uint64_t *out);

/*
 Moments of `<Psi, theta_j>` at checkpoint `c`.

 # Safety
 `stats` must be a valid handle; `out` must be valid.
 */
enum BwStatus bw_stats_observable(const struct BwStats *stats,
                                  uintptr_t c,
                                  uintptr_t j,
                                  struct BwObservable *out);

/*
 `into ← into ∪ from` (exact).

 # Safety
 Both must be valid handles; `into` must not alias `from`.
 */
enum BwStatus bw_stats_merge(struct BwStats *into, const struct BwStats *from);

/*
 # Safety
 `stats` must be null or come from `bw_run_ensemble`.
 */
void bw_stats_free(struct BwStats *stats);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* BEAMWAVE_H */
