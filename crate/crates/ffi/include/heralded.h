#ifndef HERALDED_H
#define HERALDED_H

/* Generated by cbindgen from heralded-ffi. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every fallible call.
 */
typedef enum HsStatus {
  HS_STATUS_OK = 0,
  HS_STATUS_NULL_POINTER = 1,
  HS_STATUS_VALIDATION = 2,
  HS_STATUS_CONVERGENCE = 3,
  HS_STATUS_IO = 4,
  HS_STATUS_PANIC = 5,
} HsStatus;

/**
 * Opaque timestamp stream for one channel.
 */
typedef struct HsEventStream HsEventStream;

typedef struct HsSourceModel {
  double pair_rate_hz;
  double eta_signal;
  double eta_herald;
  int64_t deadtime_signal_ps;
  int64_t deadtime_herald_ps;
  int64_t jitter_fwhm_signal_ps;
  int64_t jitter_fwhm_herald_ps;
  double background_rate_signal_hz;
  double background_rate_herald_hz;
  int64_t duration_ps;
  uint64_t rng_seed;
} HsSourceModel;

typedef struct HsCoincidenceConfig {
  int64_t pulse_len_signal_ps;
  int64_t pulse_len_herald_ps;
  int64_t min_overlap_ps;
  int64_t delay_offset_ps;
} HsCoincidenceConfig;

/**
 * Measured singles and coincidences.
 */
typedef struct HsCounts {
  double singles_signal_hz;
  double singles_herald_hz;
  double coincidences_hz;
  double duration_s;
} HsCounts;

typedef struct HsWindowParams {
  int64_t tau_w_ps;
  int64_t tau_max_ps;
  int64_t tau_d_signal_ps;
  int64_t tau_d_herald_ps;
} HsWindowParams;

typedef struct HsEstimate {
  double pair_rate_hz;
  double eta_signal;
  double eta_herald;
  double sigma_eta_signal;
  double sigma_eta_herald;
  double sigma_pair_rate;
} HsEstimate;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the most recent failure on this thread, or null if the last
 * call succeeded. The pointer stays valid until the next call on the same
 * thread.
 */
const char *hs_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *hs_version(void);

/**
 * Creates a stream from strictly increasing timestamps in `[0, duration_ps)`.
 * `channel` is 1 for signal, 2 for herald.
 *
 * # Safety
 * `times` must point to `len` readable `int64_t` values (or be null when
 * `len` is 0). `out` must be valid for writing one pointer.
 */
enum HsStatus hs_event_stream_new(uint8_t channel,
                                  const int64_t *times,
                                  size_t len,
                                  int64_t duration_ps,
                                  struct HsEventStream **out);

/**
 * Number of events in the stream; 0 for a null handle.
 *
 * # Safety
 * `s` must be null or a live handle from this library.
 */
size_t hs_event_stream_len(const struct HsEventStream *s);

/**
 * Acquisition length of the stream; 0 for a null handle.
 *
 * # Safety
 * `s` must be null or a live handle from this library.
 */
int64_t hs_event_stream_duration_ps(const struct HsEventStream *s);

/**
 * Copies up to `capacity` timestamps into `buf` and stores the number
 * copied in `written`. Fails with `HS_STATUS_VALIDATION` when `capacity` is
 * smaller than the stream length, after copying what fits.
 *
 * # Safety
 * `s` must be a live handle, `buf` valid for `capacity` writes (or null when
 * `capacity` is 0), and `written` valid for one write.
 */
enum HsStatus hs_event_stream_copy_timestamps(const struct HsEventStream *s,
                                              int64_t *buf,
                                              size_t capacity,
                                              size_t *written);

/**
 * Releases a stream. Null is ignored.
 *
 * # Safety
 * `s` must be null or a handle from this library that has not been freed.
 */
void hs_event_stream_free(struct HsEventStream *s);

/**
 * Simulates both detector streams. On success the caller owns both handles.
 *
 * # Safety
 * `model` must be valid for reads; `out_signal` and `out_herald` valid for
 * one pointer write each.
 */
enum HsStatus hs_simulate(const struct HsSourceModel *model,
                          struct HsEventStream **out_signal,
                          struct HsEventStream **out_herald);

/**
 * Counts singles and coincidences between a signal and a herald stream.
 *
 * # Safety
 * All pointers must be valid; the streams must be live handles.
 */
enum HsStatus hs_count_coincidences(const struct HsEventStream *signal,
                                    const struct HsEventStream *herald,
                                    const struct HsCoincidenceConfig *config,
                                    struct HsCounts *out);

/**
 * Measured singles rate for a pair rate, arm efficiency and dead-time in
 * seconds.
 *
 * # Safety
 * `out` must be valid for one write.
 */
enum HsStatus hs_forward_singles(double r0, double eta, double tau_d_s, double *out);

/**
 * Measured coincidence rate including accidentals.
 *
 * # Safety
 * `window` must be valid for reads and `out` for one write.
 */
enum HsStatus hs_forward_cc(double r0,
                            double eta_signal,
                            double eta_herald,
                            const struct HsWindowParams *window,
                            double *out);

/**
 * Recovers pair rate and efficiencies with Jacobian uncertainties.
 *
 * # Safety
 * `counts` and `window` must be valid for reads and `out` for one write.
 */
enum HsStatus hs_solve_inverse(const struct HsCounts *counts,
                               const struct HsWindowParams *window,
                               struct HsEstimate *out);

/**
 * Expected CHSH value at the given visibility and analyzer angles in
 * radians.
 *
 * # Safety
 * `out` must be valid for one write.
 */
enum HsStatus hs_chsh_s(double visibility,
                        double a,
                        double a_prime,
                        double b,
                        double b_prime,
                        double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* HERALDED_H */
