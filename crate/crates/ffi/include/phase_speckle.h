#ifndef PHASE_SPECKLE_H
#define PHASE_SPECKLE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum {
  PS_STATUS_OK = 0,
  PS_STATUS_NULL_POINTER = 1,
  PS_STATUS_INVALID_ARGUMENT = 2,
  PS_STATUS_IO = 3,
  PS_STATUS_IMAGE = 4,
  PS_STATUS_PATTERN = 5,
  PS_STATUS_PPN = 6,
  PS_STATUS_SIMULATOR = 7,
  PS_STATUS_MATCHER = 8,
  PS_STATUS_EVAL = 9,
  PS_STATUS_RECON = 10,
  PS_STATUS_PANIC = 11,
} PsStatus;

typedef enum {
  PS_MATCH_MODE_RGB = 0,
  PS_MATCH_MODE_PHASE = 1,
} PsMatchMode;

typedef struct PsDisparity PsDisparity;

typedef struct PsPpn PsPpn;

typedef struct PsRgbImage PsRgbImage;

typedef struct {
  double a;
  double b;
  double period;
  size_t lo_width;
  size_t lo_height;
  size_t upsample;
  uint64_t seed;
} PsPatternParams;

typedef struct {
  size_t d_min;
  size_t d_max;
  /**
   * Window radius; the window is `(2·window + 1)²`.
   */
  size_t window;
  PsMatchMode mode;
  /**
   * Left-right tolerance in pixels; infinity disables the check.
   */
  double lr_threshold;
  bool subpixel;
  /**
   * Modulation threshold of the phase decode (phase mode only).
   */
  double ppn_threshold;
} PsMatchParams;

typedef struct {
  double epe;
  /**
   * Fraction in `[0, 1]`.
   */
  double d1;
  uint64_t n_evaluated;
  uint64_t n_missing;
} PsEvalSummary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or null after a
 * successful call. Valid until the next `ps_*` call on the same thread.
 */
const char *ps_last_error_message(void);

/**
 * Library version, a static NUL-terminated string.
 */
const char *ps_version(void);

PsStatus ps_pattern_params_default(PsPatternParams *out);

PsStatus ps_pattern_generate(const PsPatternParams *params, PsRgbImage **out);

/**
 * Image from `3·width·height` interleaved values.
 */
PsStatus ps_rgb_image_new(size_t width, size_t height, const double *data, PsRgbImage **out);

PsStatus ps_rgb_image_read_png(const char *path, PsRgbImage **out);

/**
 * Writes an 8-bit RGB PNG.
 */
PsStatus ps_rgb_image_write_png(const PsRgbImage *img, const char *path);

/**
 * Width in pixels; 0 for a null handle.
 */
size_t ps_rgb_image_width(const PsRgbImage *img);

/**
 * Height in pixels; 0 for a null handle.
 */
size_t ps_rgb_image_height(const PsRgbImage *img);

/**
 * Copies the pixels into `out` (`len` = 3·width·height, interleaved).
 */
PsStatus ps_rgb_image_copy(const PsRgbImage *img, double *out, size_t len);

void ps_rgb_image_free(PsRgbImage *img);

/**
 * Decodes wrapped phase and modulation; pixels with modulation at or
 * below `mod_threshold` are marked invalid.
 */
PsStatus ps_ppn_decode(const PsRgbImage *img, double mod_threshold, PsPpn **out);

size_t ps_ppn_width(const PsPpn *ppn);

size_t ps_ppn_height(const PsPpn *ppn);

/**
 * Wrapped phase in `(−π, π]` for every pixel, valid or not.
 */
PsStatus ps_ppn_copy_phase(const PsPpn *ppn, double *out, size_t len);

PsStatus ps_ppn_copy_modulation(const PsPpn *ppn, double *out, size_t len);

/**
 * 1 for valid pixels, 0 otherwise.
 */
PsStatus ps_ppn_copy_valid(const PsPpn *ppn, uint8_t *out, size_t len);

void ps_ppn_free(PsPpn *ppn);

/**
 * Renders a named scene (`flat`, `steps`, `ramp`, `boxes`, `lowalbedo`)
 * at `width`×`height` with the default rig, lit by `pattern`. Any of the
 * three outputs may be null to skip it.
 */
PsStatus ps_render_preset(const char *name,
                          size_t width,
                          size_t height,
                          const PsRgbImage *pattern,
                          PsRgbImage **left,
                          PsRgbImage **right,
                          PsDisparity **gt_disparity);

PsStatus ps_match_params_default(PsMatchParams *out);

/**
 * Left-view disparity of a rectified pair.
 */
PsStatus ps_match_stereo(const PsRgbImage *left,
                         const PsRgbImage *right,
                         const PsMatchParams *params,
                         PsDisparity **out);

/**
 * Map from `width·height` values; NaN marks invalid pixels.
 */
PsStatus ps_disparity_new(size_t width, size_t height, const float *data, PsDisparity **out);

PsStatus ps_disparity_read_pfm(const char *path, PsDisparity **out);

PsStatus ps_disparity_write_pfm(const PsDisparity *map, const char *path);

size_t ps_disparity_width(const PsDisparity *map);

size_t ps_disparity_height(const PsDisparity *map);

PsStatus ps_disparity_copy(const PsDisparity *map, float *out, size_t len);

void ps_disparity_free(PsDisparity *map);

/**
 * EPE and D1 of `pred` against `gt` over pixels with a finite `gt`.
 */
PsStatus ps_evaluate(const PsDisparity *pred,
                     const PsDisparity *gt,
                     double threshold,
                     bool penalize_missing,
                     PsEvalSummary *out);

/**
 * `Z = focal·baseline / d`, in the unit of `baseline`.
 */
double ps_depth(double focal, double baseline, double disparity);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PHASE_SPECKLE_H */
