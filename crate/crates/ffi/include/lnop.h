#ifndef LNOP_H
#define LNOP_H

/* Generated by cbindgen from lnop-ffi; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/*
 Result code of every fallible call; numerically aligned with the
 command-line exit codes.
 */
typedef enum LnopStatus {
  /*
   Success.
   */
  LNOP_STATUS_OK = 0,
  /*
   Invalid arguments, null pointers, or config errors.
   */
  LNOP_STATUS_USAGE = 1,
  /*
   Numerical failure, including a caught internal panic.
   */
  LNOP_STATUS_NUMERICAL = 2,
  /*
   File I/O or format errors.
   */
  LNOP_STATUS_IO = 3,
} LnopStatus;

/*
 Which field of a stored sample to copy.
 */
typedef enum LnopField {
  /*
   The conditioning input field.
   */
  LNOP_FIELD_INPUT = 0,
  /*
   The solution target field.
   */
  LNOP_FIELD_TARGET = 1,
} LnopField;

/*
 Opaque dataset handle.
 */
typedef struct LnopDataset LnopDataset;

/*
 Opaque trained-model handle.
 */
typedef struct LnopModel LnopModel;

/*
 Message of the most recent failure on this thread, or null if the
 last call succeeded. The pointer stays valid until the next failing
 `lnop_` call on the same thread.

 # Safety
 The returned pointer must not be freed or written through.
 */
const char *lnop_last_error(void);

/*
 Library version as a static NUL-terminated string.
 */
const char *lnop_version(void);

/*
 Loads a model checkpoint. On success writes a handle to `out`; the
 caller owns it and must release it with [`lnop_model_free`].

 # Safety
 `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum LnopStatus lnop_model_load(const char *path, struct LnopModel **out);

/*
 Writes a model checkpoint to `path`.

 # Safety
 `model` must be a live handle and `path` a NUL-terminated string.
 */
enum LnopStatus lnop_model_save(const struct LnopModel *model, const char *path);

/*
 Releases a model handle. Passing null is a no-op.

 # Safety
 `model` must be a handle from this library, released at most once.
 */
void lnop_model_free(struct LnopModel *model);

/*
 Number of spatial axes the model was trained on, or 0 for null.

 # Safety
 `model` must be null or a live handle.
 */
size_t lnop_model_rank(const struct LnopModel *model);

/*
 Training-grid extent along `axis`, or 0 when out of range.

 # Safety
 `model` must be null or a live handle.
 */
size_t lnop_model_train_extent(const struct LnopModel *model, size_t axis);

/*
 Input channels the model expects (before its internal coordinate
 channels), or 0 for null.

 # Safety
 `model` must be null or a live handle.
 */
size_t lnop_model_in_channels(const struct LnopModel *model);

/*
 Output channels the model produces, or 0 for null.

 # Safety
 `model` must be null or a live handle.
 */
size_t lnop_model_out_channels(const struct LnopModel *model);

/*
 Runs the model on one input field at its training resolution.

 `input` holds `in_channels * prod(extents)` doubles, channel axis
 leading; `output` receives `out_channels * prod(extents)` doubles on
 the same grid.

 # Safety
 `model` must be a live handle; `extents` must point to `rank`
 entries; `input` and `output` must point to `input_len` and
 `output_len` doubles.
 */
enum LnopStatus lnop_model_forward(const struct LnopModel *model,
                                   const size_t *extents,
                                   size_t rank,
                                   const double *input,
                                   size_t input_len,
                                   double *output,
                                   size_t output_len);

/*
 Runs the model on a grid other than its training resolution; each
 extent must be a positive integer multiple (or equal) per axis.
 Layout contract as in [`lnop_model_forward`].

 # Safety
 Same contracts as [`lnop_model_forward`].
 */
enum LnopStatus lnop_model_superres(const struct LnopModel *model,
                                    const size_t *extents,
                                    size_t rank,
                                    const double *input,
                                    size_t input_len,
                                    double *output,
                                    size_t output_len);

/*
 Opens a dataset container. On success writes a handle to `out`; the
 caller owns it and must release it with [`lnop_dataset_free`].

 # Safety
 `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum LnopStatus lnop_dataset_read(const char *path, struct LnopDataset **out);

/*
 Releases a dataset handle. Passing null is a no-op.

 # Safety
 `ds` must be a handle from this library, released at most once.
 */
void lnop_dataset_free(struct LnopDataset *ds);

/*
 Number of samples, or 0 for null.

 # Safety
 `ds` must be null or a live handle.
 */
size_t lnop_dataset_len(const struct LnopDataset *ds);

/*
 Number of spatial axes, or 0 for null.

 # Safety
 `ds` must be null or a live handle.
 */
size_t lnop_dataset_rank(const struct LnopDataset *ds);

/*
 Grid extent along `axis`, or 0 when out of range.

 # Safety
 `ds` must be null or a live handle.
 */
size_t lnop_dataset_extent(const struct LnopDataset *ds, size_t axis);

/*
 Channels of the input fields, or 0 for null.

 # Safety
 `ds` must be null or a live handle.
 */
size_t lnop_dataset_in_channels(const struct LnopDataset *ds);

/*
 Channels of the target fields, or 0 for null.

 # Safety
 `ds` must be null or a live handle.
 */
size_t lnop_dataset_out_channels(const struct LnopDataset *ds);

/*
 Copies one field of sample `index` into `buffer` (channel axis
 leading, row-major). `buffer_len` must equal the field's channel
 count times the grid size.

 # Safety
 `ds` must be a live handle and `buffer` must point to `buffer_len`
 doubles.
 */
enum LnopStatus lnop_dataset_copy_sample(const struct LnopDataset *ds,
                                         size_t index,
                                         enum LnopField field,
                                         double *buffer,
                                         size_t buffer_len);

#endif  /* LNOP_H */
