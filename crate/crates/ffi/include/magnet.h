#ifndef MAGNET_H
#define MAGNET_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum MagnetFormat {
  MAGNET_FORMAT_DOT = 0,
  MAGNET_FORMAT_JSON = 1,
} MagnetFormat;

typedef enum MagnetStatus {
  MAGNET_STATUS_OK = 0,
  MAGNET_STATUS_NULL_ARGUMENT = 1,
  MAGNET_STATUS_INVALID_UTF8 = 2,
  MAGNET_STATUS_INVALID_ARGUMENT = 3,
  MAGNET_STATUS_PARSE = 4,
  MAGNET_STATUS_IO = 5,
  MAGNET_STATUS_CHECKPOINT = 6,
  MAGNET_STATUS_MODEL = 7,
  MAGNET_STATUS_PANIC = 8,
} MagnetStatus;

typedef enum MagnetView {
  MAGNET_VIEW_AST = 0,
  MAGNET_VIEW_CFG = 1,
  MAGNET_VIEW_DFG = 2,
} MagnetView;

// A loaded checkpoint: weights, vocabulary, model configuration and the
// decision threshold.
typedef struct MagnetModel MagnetModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message describing the last failed call on this thread, or null if the
// last call succeeded. Valid until the next call into this library on the
// same thread.
const char *magnet_last_error(void);

// Library version as a static string.
const char *magnet_version(void);

// Loads a checkpoint file into `*out`.
//
// # Safety
// `path` must be a NUL-terminated string and `out` a valid pointer.
enum MagnetStatus magnet_model_load(const char *path, struct MagnetModel **out);

// Loads a checkpoint from `len` bytes at `data` into `*out`.
//
// # Safety
// `data` must point to `len` readable bytes and `out` must be valid.
enum MagnetStatus magnet_model_load_bytes(const uint8_t *data,
                                          size_t len,
                                          struct MagnetModel **out);

// Releases a model. Null is ignored.
//
// # Safety
// `model` must come from a load function and not be used afterwards.
void magnet_model_free(struct MagnetModel *model);

// Decision threshold stored in the checkpoint, or NaN for a null model.
//
// # Safety
// `model` must be null or a live handle.
double magnet_model_sigma(const struct MagnetModel *model);

// Scores two source fragments. `*score` receives the cosine similarity and
// `*is_clone` is set to 1 when the score exceeds `sigma`. Pass NaN as
// `sigma` to use the checkpoint's threshold. Either output may be null.
//
// # Safety
// `model` must be a live handle and the sources NUL-terminated strings.
enum MagnetStatus magnet_compare(const struct MagnetModel *model,
                                 const char *source_a,
                                 const char *source_b,
                                 double sigma,
                                 double *score,
                                 int32_t *is_clone);

// Renders one graph view of `source` as DOT or JSON into `*out`, a newly
// allocated string to be released with [`magnet_string_free`].
//
// # Safety
// `source` must be a NUL-terminated string and `out` a valid pointer.
enum MagnetStatus magnet_graph_export(const char *source,
                                      enum MagnetView view,
                                      enum MagnetFormat format,
                                      char **out);

// Releases a string returned by this library. Null is ignored.
//
// # Safety
// `s` must come from this library and not be used afterwards.
void magnet_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MAGNET_H */
