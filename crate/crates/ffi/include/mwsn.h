#ifndef MWSN_H
#define MWSN_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum MwsnStatus {
  MWSN_STATUS_OK = 0,
  MWSN_STATUS_NULL_POINTER = 1,
  MWSN_STATUS_INVALID_INPUT = 2,
  MWSN_STATUS_INVALID_CONFIG = 3,
  /*
   Labels or folds unsuitable for training.
   */
  MWSN_STATUS_DATA = 4,
  MWSN_STATUS_IO = 5,
  MWSN_STATUS_FORMAT = 6,
  MWSN_STATUS_BUFFER_TOO_SMALL = 7,
  MWSN_STATUS_STATE = 8,
  MWSN_STATUS_PANIC = 9,
} MwsnStatus;

typedef struct MwsnLinearModel MwsnLinearModel;

typedef struct MwsnPca MwsnPca;

/*
 Scattering configuration bound to one input size.
 */
typedef struct MwsnScatterer MwsnScatterer;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Description of the last failure on this thread, or NULL. Valid until the
 next call into the library from the same thread.
 */
const char *mwsn_last_error(void);

/*
 Library version as a static NUL-terminated string.
 */
const char *mwsn_version(void);

/*
 Creates a scatterer for `size × size` inputs.

 # Safety
 `out` must be a valid pointer to a handle slot.
 */
enum MwsnStatus mwsn_scatterer_new(size_t size,
                                   size_t scales,
                                   size_t rate_u,
                                   size_t rate_s,
                                   struct MwsnScatterer **out);

/*
 # Safety
 `h` must be a live scatterer and `len` writable.
 */
enum MwsnStatus mwsn_scatterer_feature_len(const struct MwsnScatterer *h, size_t *len);

/*
 Layer-2 features of one `size × size` image into `out[0..out_len)`.

 # Safety
 `image` must hold `size²` values and `out` `out_len` writable values.
 */
enum MwsnStatus mwsn_scatterer_features(const struct MwsnScatterer *h,
                                        const double *image,
                                        double *out,
                                        size_t out_len);

/*
 # Safety
 `h` must come from `mwsn_scatterer_new` or be NULL.
 */
void mwsn_scatterer_free(struct MwsnScatterer *h);

/*
 Fits PCA with `k` components on a `rows × cols` matrix.

 # Safety
 `x` must hold `rows·cols` values; `out` must be a valid handle slot.
 */
enum MwsnStatus mwsn_pca_fit(const double *x,
                             size_t rows,
                             size_t cols,
                             size_t k,
                             struct MwsnPca **out);

/*
 # Safety
 `path` must be a NUL-terminated string; `out` a valid handle slot.
 */
enum MwsnStatus mwsn_pca_load(const char *path, struct MwsnPca **out);

/*
 # Safety
 `h` must be live; `path` NUL-terminated.
 */
enum MwsnStatus mwsn_pca_save(const struct MwsnPca *h, const char *path);

/*
 Input dimension and component count.

 # Safety
 `h` must be live; `dim` and `k` writable.
 */
enum MwsnStatus mwsn_pca_dims(const struct MwsnPca *h, size_t *dim, size_t *k);

/*
 Explained variances into `out[0..k)`.

 # Safety
 `h` must be live; `out` must hold `out_len` values.
 */
enum MwsnStatus mwsn_pca_explained(const struct MwsnPca *h, double *out, size_t out_len);

/*
 Projects a `rows × cols` matrix to `rows × k` in `out`.

 # Safety
 `x` must hold `rows·cols` values and `out` `out_len` writable values.
 */
enum MwsnStatus mwsn_pca_transform(const struct MwsnPca *h,
                                   const double *x,
                                   size_t rows,
                                   size_t cols,
                                   double *out,
                                   size_t out_len);

/*
 # Safety
 `h` must come from this library or be NULL.
 */
void mwsn_pca_free(struct MwsnPca *h);

/*
 Trains the one-vs-rest linear classifier. `labels` holds `rows`
 NUL-terminated strings.

 # Safety
 `x` must hold `rows·cols` values, `labels` `rows` valid strings and `out`
 must be a valid handle slot.
 */
enum MwsnStatus mwsn_linear_train(const double *x,
                                  size_t rows,
                                  size_t cols,
                                  const char *const *labels,
                                  double c_reg,
                                  uint64_t seed,
                                  struct MwsnLinearModel **out);

/*
 # Safety
 `path` must be NUL-terminated; `out` a valid handle slot.
 */
enum MwsnStatus mwsn_linear_load(const char *path, struct MwsnLinearModel **out);

/*
 # Safety
 `h` must be live; `path` NUL-terminated.
 */
enum MwsnStatus mwsn_linear_save(const struct MwsnLinearModel *h, const char *path);

/*
 Number of classes and feature dimension.

 # Safety
 `h` must be live; outputs writable.
 */
enum MwsnStatus mwsn_linear_dims(const struct MwsnLinearModel *h, size_t *classes, size_t *dim);

/*
 Label of class `index`, owned by the model.

 # Safety
 `h` must be live; `out` writable.
 */
enum MwsnStatus mwsn_linear_class_label(const struct MwsnLinearModel *h,
                                        size_t index,
                                        const char **out);

/*
 Predicted class index of each row into `out[0..rows)`.

 # Safety
 `x` must hold `rows·cols` values and `out` `out_len` writable values.
 */
enum MwsnStatus mwsn_linear_predict(const struct MwsnLinearModel *h,
                                    const double *x,
                                    size_t rows,
                                    size_t cols,
                                    size_t *out,
                                    size_t out_len);

/*
 # Safety
 `h` must come from this library or be NULL.
 */
void mwsn_linear_free(struct MwsnLinearModel *h);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MWSN_H */
