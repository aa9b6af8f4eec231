#ifndef SKYLINK_H
#define SKYLINK_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stddef.h>
#include <stdint.h>

typedef enum SkylinkEstimator {
  SKYLINK_ESTIMATOR_TWO_POINT = 0,
  SKYLINK_ESTIMATOR_ENSEMBLE_RMS = 1,
} SkylinkEstimator;

typedef enum SkylinkScenario {
  SKYLINK_SCENARIO_TABLE = 0,
  SKYLINK_SCENARIO_ATMOSPHERE_FOCUSSED = 1,
  SKYLINK_SCENARIO_ATMOSPHERE_UNFOCUSSED = 2,
  SKYLINK_SCENARIO_HATCH_OPEN = 3,
} SkylinkScenario;

typedef enum SkylinkStatus {
  SKYLINK_STATUS_OK = 0,
  SKYLINK_STATUS_INVALID_ARGUMENT = 1,
  SKYLINK_STATUS_NULL_POINTER = 2,
  SKYLINK_STATUS_NUMERICAL = 3,
  SKYLINK_STATUS_TOO_SHORT = 4,
  SKYLINK_STATUS_IO = 5,
  SKYLINK_STATUS_PANIC = 6,
  SKYLINK_STATUS_OUT_OF_RANGE = 7,
} SkylinkStatus;

/**
 * Beam-center samples owned by the library.
 */
typedef struct SkylinkCenterSeries SkylinkCenterSeries;

/**
 * Signal, reference and QNL-normalized analyzer traces owned by the library.
 */
typedef struct SkylinkSpectrum SkylinkSpectrum;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failure on this thread, or null. The pointer stays
 * valid until the next failing call on the same thread.
 */
const char *skylink_last_error(void);

/**
 * Photon energy (J) at `wavelength_nm`.
 */
enum SkylinkStatus skylink_photon_energy(double wavelength_nm, double *out_joules);

/**
 * Mean photon number per video-bandwidth period.
 */
enum SkylinkStatus skylink_mean_photon_number(double power_w,
                                              double wavelength_nm,
                                              double video_bandwidth_hz,
                                              double *out_n);

/**
 * Relative shot noise `1/sqrt(n)`.
 */
enum SkylinkStatus skylink_relative_shot_noise(double mean_photon_number, double *out_rsn);

/**
 * Fraction of a unit-power Gaussian beam captured by a circular aperture.
 * Lengths in mm; `tolerance` 0 selects the default. `out_deficit` may be null.
 */
enum SkylinkStatus skylink_clipped_power_fraction(double beam_diameter_mm,
                                                  double beam_x_mm,
                                                  double beam_y_mm,
                                                  double aperture_diameter_mm,
                                                  double aperture_x_mm,
                                                  double aperture_y_mm,
                                                  double tolerance,
                                                  double *out_fraction,
                                                  double *out_deficit);

/**
 * Relative intensity noise from beam jitter on a centered aperture, with the
 * misalignment applied along +x.
 */
enum SkylinkStatus skylink_jitter_intensity_noise(double beam_diameter_mm,
                                                  double aperture_diameter_mm,
                                                  double std_x_mm,
                                                  double std_y_mm,
                                                  double misalignment_mm,
                                                  enum SkylinkEstimator estimator,
                                                  uint64_t n_samples,
                                                  uint64_t seed,
                                                  double tolerance,
                                                  double *out_noise);

/**
 * Draws `n` independent beam centers. Free the result with
 * [`skylink_center_series_free`].
 */
enum SkylinkStatus skylink_sample_centers(double std_x_mm,
                                          double std_y_mm,
                                          double sample_rate_hz,
                                          double misalignment_mm,
                                          uintptr_t n,
                                          uint64_t seed,
                                          struct SkylinkCenterSeries **out_series);

enum SkylinkStatus skylink_center_series_len(const struct SkylinkCenterSeries *series,
                                             uintptr_t *out_len);

/**
 * Center `index` in mm.
 */
enum SkylinkStatus skylink_center_series_get(const struct SkylinkCenterSeries *series,
                                             uintptr_t index,
                                             double *out_x_mm,
                                             double *out_y_mm);

/**
 * Releases a series. Null is ignored.
 *
 * # Safety
 * `series` must come from [`skylink_sample_centers`] and not be used again.
 */
void skylink_center_series_free(struct SkylinkCenterSeries *series);

/**
 * Simulates the analyzer traces of a scenario preset with the default
 * analyzer settings (10 kHz RBW, 100 Hz VBW, 401 points). `f_stop_hz` 0
 * selects the default span. Free the result with [`skylink_spectrum_free`].
 */
enum SkylinkStatus skylink_simulate_spectrum(enum SkylinkScenario scenario,
                                             double f_stop_hz,
                                             uint64_t seed,
                                             struct SkylinkSpectrum **out_spectrum);

enum SkylinkStatus skylink_spectrum_len(const struct SkylinkSpectrum *spectrum, uintptr_t *out_len);

/**
 * Point `index` of the normalized trace: frequency (Hz) and dB relative to
 * the quantum-noise-limited reference.
 */
enum SkylinkStatus skylink_spectrum_point(const struct SkylinkSpectrum *spectrum,
                                          uintptr_t index,
                                          double *out_frequency_hz,
                                          double *out_db_rel_qnl);

/**
 * Releases a spectrum. Null is ignored.
 *
 * # Safety
 * `spectrum` must come from [`skylink_simulate_spectrum`] and not be used
 * again.
 */
void skylink_spectrum_free(struct SkylinkSpectrum *spectrum);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SKYLINK_H */
