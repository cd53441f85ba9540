#ifndef FUNKAN_H
#define FUNKAN_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every call.
 */
typedef enum FunkanStatus {
  FUNKAN_STATUS_OK = 0,
  FUNKAN_STATUS_NULL_POINTER = 1,
  FUNKAN_STATUS_INVALID_ARGUMENT = 2,
  FUNKAN_STATUS_SHAPE = 3,
  FUNKAN_STATUS_NON_FINITE = 4,
  FUNKAN_STATUS_CONFIG = 5,
  FUNKAN_STATUS_DATA = 6,
  FUNKAN_STATUS_IO = 7,
  FUNKAN_STATUS_GRADIENT = 8,
  FUNKAN_STATUS_BUFFER_TOO_SMALL = 9,
  FUNKAN_STATUS_PANIC = 10,
} FunkanStatus;

/**
 * Opaque model handle.
 */
typedef struct FunkanModel FunkanModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or null. Valid until the next call.
 */
const char *funkan_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *funkan_version(void);

/**
 * Builds a freshly initialised model from a JSON model spec
 * (for example `{"arch":"enhance"}`) or a bare name (`enhance`, `ufunkan`).
 *
 * # Safety
 * `spec` must be a NUL-terminated string and `out` a valid pointer.
 */
enum FunkanStatus funkan_model_new(const char *spec, uint64_t seed, struct FunkanModel **out);

/**
 * Loads a checkpoint manifest written by `funkan train`.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum FunkanStatus funkan_model_load(const char *path, struct FunkanModel **out);

/**
 * Releases a model. Null is ignored.
 *
 * # Safety
 * `model` must come from this library and not be used afterwards.
 */
void funkan_model_free(struct FunkanModel *model);

/**
 * Number of trainable scalars.
 *
 * # Safety
 * Pointers must be valid.
 */
enum FunkanStatus funkan_model_param_count(const struct FunkanModel *model, size_t *out);

/**
 * Forward FLOPs for one `channels × height × width` input.
 *
 * # Safety
 * Pointers must be valid.
 */
enum FunkanStatus funkan_model_flops(const struct FunkanModel *model,
                                     size_t channels,
                                     size_t height,
                                     size_t width,
                                     uint64_t *out);

/**
 * Runs inference on a `batch × channels × height × width` tensor.
 *
 * The output has `batch × out_channels × height × width` values (raw logits
 * for segmentation). `out_written` always receives the required length; if
 * `out_len` is smaller, nothing is written and `BufferTooSmall` is returned.
 *
 * # Safety
 * `input` must hold the given number of floats and `out` at least `out_len`.
 */
enum FunkanStatus funkan_model_forward(const struct FunkanModel *model,
                                       const float *input_data,
                                       size_t batch,
                                       size_t channels,
                                       size_t height,
                                       size_t width,
                                       float *out,
                                       size_t out_len,
                                       size_t *out_written);

/**
 * Value of the `k`-th orthonormal Hermite function at `x`.
 *
 * # Safety
 * `out` must be valid.
 */
enum FunkanStatus funkan_hermite(size_t k, double x, double *out);

/**
 * Band-limits `img` by keeping the central `out_h × out_w` block of its spectrum.
 *
 * # Safety
 * `img` holds `h*w` doubles and `out` room for `out_h*out_w`.
 */
enum FunkanStatus funkan_kspace_crop(const double *img,
                                     size_t h,
                                     size_t w,
                                     size_t out_h,
                                     size_t out_w,
                                     double *out);

/**
 * Peak signal-to-noise ratio in dB (infinite for identical images).
 *
 * # Safety
 * Both images hold `h*w` doubles.
 */
enum FunkanStatus funkan_psnr(const double *pred,
                              const double *target,
                              size_t h,
                              size_t w,
                              double peak,
                              double *out);

/**
 * Anisotropic total variation.
 *
 * # Safety
 * `img` holds `h*w` doubles.
 */
enum FunkanStatus funkan_total_variation(const double *img, size_t h, size_t w, double *out);

/**
 * Intersection over union of `sigmoid(logits) > threshold` against `mask >= 0.5`.
 *
 * # Safety
 * Both images hold `h*w` doubles.
 */
enum FunkanStatus funkan_iou(const double *logits,
                             const double *mask,
                             size_t h,
                             size_t w,
                             double threshold,
                             double *out);

/**
 * Sub-voxel-shift Gibbs ringing removal. Pass 0 for any parameter to use its default.
 *
 * # Safety
 * `img` holds `h*w` doubles and `out` has room for as many.
 */
enum FunkanStatus funkan_kellner_dering(const double *img,
                                        size_t h,
                                        size_t w,
                                        size_t shifts,
                                        size_t min_window,
                                        size_t max_window,
                                        double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FUNKAN_H */
