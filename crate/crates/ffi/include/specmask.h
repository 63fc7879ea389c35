#ifndef SPECMASK_H
#define SPECMASK_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum SmStatus {
  SM_STATUS_OK = 0,
  SM_STATUS_NULL_POINTER = 1,
  SM_STATUS_INVALID_ARGUMENT = 2,
  SM_STATUS_CLIP_TOO_SHORT = 3,
  SM_STATUS_SHAPE_MISMATCH = 4,
  SM_STATUS_ASYMMETRIC_MASK = 5,
  SM_STATUS_LABEL_OUT_OF_RANGE = 6,
  SM_STATUS_RECONSTRUCTION_FAILED = 7,
  SM_STATUS_UNDEFINED_SDR = 8,
  SM_STATUS_UNSUPPORTED_FORMAT = 9,
  SM_STATUS_CORRUPT_WAV = 10,
  SM_STATUS_IO = 11,
  SM_STATUS_IMAGE = 12,
  SM_STATUS_PANIC = 13,
  SM_STATUS_OTHER = 99,
} SmStatus;

/**
 * Opaque mono audio clip.
 */
typedef struct SmClip SmClip;

/**
 * Opaque time-frequency label grid.
 */
typedef struct SmMask SmMask;

typedef struct SmStftParams {
  size_t window_len;
  size_t hop;
  size_t dft_len;
} SmStftParams;

typedef struct SmMaskScores {
  double f1;
  double iou;
  double dice;
} SmMaskScores;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread; empty after a success.
 * The pointer stays valid until the next call on the same thread.
 */
const char *sm_last_error_message(void);

/**
 * Window 128, hop 64, DFT 1024.
 */
struct SmStftParams sm_stft_params_default(void);

/**
 * # Safety
 * `samples` must point to `len` readable doubles; `out` must be writable.
 */
enum SmStatus sm_clip_new(const double *samples,
                          size_t len,
                          uint32_t sample_rate,
                          struct SmClip **out);

/**
 * # Safety
 * `clip` must be null or a handle from this library that was not yet freed.
 */
void sm_clip_free(struct SmClip *clip);

/**
 * # Safety
 * `clip` must be a live handle or null (returns 0).
 */
size_t sm_clip_len(const struct SmClip *clip);

/**
 * # Safety
 * `clip` must be a live handle or null (returns 0).
 */
uint32_t sm_clip_sample_rate(const struct SmClip *clip);

/**
 * Borrowed pointer to the clip's `sm_clip_len` samples, valid while the
 * handle lives.
 *
 * # Safety
 * `clip` must be a live handle or null (returns null).
 */
const double *sm_clip_samples(const struct SmClip *clip);

/**
 * Number of channels in a WAV file.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum SmStatus sm_wav_channels(const char *path, size_t *out);

/**
 * Reads one channel (0 = left or mono, 1 = right) of a WAV file.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum SmStatus sm_read_wav(const char *path, size_t channel, struct SmClip **out);

/**
 * `format` is an `SmSampleFormat` value.
 *
 * # Safety
 * `clip` must be a live handle; `path` a NUL-terminated string.
 */
enum SmStatus sm_write_wav(const struct SmClip *clip, const char *path, uint32_t format);

/**
 * Builds a mask from `n_bins * n_frames` labels stored frame by frame.
 *
 * # Safety
 * `labels` must point to `n_bins * n_frames` readable bytes; `out` must be
 * writable.
 */
enum SmStatus sm_mask_from_labels(const uint8_t *labels,
                                  size_t n_bins,
                                  size_t n_frames,
                                  uint8_t n_sources,
                                  struct SmMask **out);

/**
 * Loads a mask PNG and maps it onto the STFT grid of `clip`.
 *
 * # Safety
 * `path` must be a NUL-terminated string, `clip` a live handle, `params`
 * null (defaults) or readable, `out` writable.
 */
enum SmStatus sm_mask_import(const char *path,
                             const struct SmClip *clip,
                             const struct SmStftParams *params,
                             uint8_t n_sources,
                             struct SmMask **out);

/**
 * # Safety
 * `mask` must be null or a handle from this library that was not yet freed.
 */
void sm_mask_free(struct SmMask *mask);

/**
 * # Safety
 * `clip` and `mask` must be live handles, `params` null (defaults) or
 * readable, `out` writable.
 */
enum SmStatus sm_denoise(const struct SmClip *clip,
                         const struct SmMask *mask,
                         const struct SmStftParams *params,
                         struct SmClip **out);

/**
 * # Safety
 * `clip` must be a live handle and `out` writable.
 */
enum SmStatus sm_enhance(const struct SmClip *clip, double gain, struct SmClip **out);

/**
 * # Safety
 * `original` and `denoised` must be live handles and `out` writable.
 */
enum SmStatus sm_estimate_noise(const struct SmClip *original,
                                const struct SmClip *denoised,
                                struct SmClip **out);

/**
 * F1, IoU and Dice of `pred` against `gt` as fractions in [0, 1].
 *
 * # Safety
 * `pred` and `gt` must be live handles and `out` writable.
 */
enum SmStatus sm_mask_scores(const struct SmMask *pred,
                             const struct SmMask *gt,
                             struct SmMaskScores *out);

/**
 * Signal-to-distortion ratio in dB.
 *
 * # Safety
 * `reference` and `estimate` must be live handles and `out` writable.
 */
enum SmStatus sm_sdr(const struct SmClip *reference, const struct SmClip *estimate, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SPECMASK_H */
