#ifndef PPG_TCN_H
#define PPG_TCN_H

#include <stddef.h>
#include <stdint.h>
#include <stdbool.h>

#define PPG_WINDOW_CHANNELS 4

#define PPG_WINDOW_SAMPLES 256

typedef enum PpgStatus {
  PPG_STATUS_OK = 0,
  PPG_STATUS_NULL_POINTER = 1,
  PPG_STATUS_INVALID_ARGUMENT = 2,
  PPG_STATUS_IO = 3,
  PPG_STATUS_FORMAT = 4,
  PPG_STATUS_UNSUPPORTED_VERSION = 5,
  PPG_STATUS_DIMENSION = 6,
  // Any other library failure.
  PPG_STATUS_INTERNAL = 7,
  // A Rust panic was caught at the boundary.
  PPG_STATUS_PANIC = 8,
} PpgStatus;

// A loaded checkpoint, float or int8.
typedef struct PpgModel PpgModel;

// Running-mean clipper over past outputs.
typedef struct PpgPostProcessor PpgPostProcessor;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or null after a success.
// Valid until the next call into the library on the same thread.
const char *ppg_last_error_message(void);

// Static, NUL-terminated library version.
const char *ppg_version(void);

// Loads a checkpoint file. On success `*out` owns a new handle.
//
// # Safety
// `path` must be a NUL-terminated string and `out` a writable pointer.
enum PpgStatus ppg_model_load(const char *path, struct PpgModel **out);

// Writes whether the handle holds an int8 model.
//
// # Safety
// `model` must come from [`ppg_model_load`]; `out` must be writable.
enum PpgStatus ppg_model_is_quantized(const struct PpgModel *model, bool *out);

// Heart rate in BPM for `n_windows` consecutive windows at `samples`
// (`len` floats in total), one output per window.
//
// # Safety
// `samples` must point to `len` floats and `out_bpm` to `n_windows` floats.
enum PpgStatus ppg_model_predict(const struct PpgModel *model,
                                 const float *samples,
                                 uintptr_t len,
                                 uintptr_t n_windows,
                                 float *out_bpm);

// Releases a model handle. Null is ignored.
//
// # Safety
// `model` must come from [`ppg_model_load`] and not be used afterwards.
void ppg_model_free(struct PpgModel *model);

// Creates a clipper with the given history length and clip fraction.
//
// # Safety
// `out` must be writable.
enum PpgStatus ppg_postprocessor_new(uintptr_t capacity,
                                     float fraction,
                                     struct PpgPostProcessor **out);

// Clips one raw estimate against the history and records the result.
//
// # Safety
// `pp` must come from [`ppg_postprocessor_new`]; `out_bpm` must be writable.
enum PpgStatus ppg_postprocessor_process(struct PpgPostProcessor *pp,
                                         float raw_bpm,
                                         float *out_bpm);

// Empties the history.
//
// # Safety
// `pp` must come from [`ppg_postprocessor_new`].
enum PpgStatus ppg_postprocessor_reset(struct PpgPostProcessor *pp);

// Releases a clipper. Null is ignored.
//
// # Safety
// `pp` must come from [`ppg_postprocessor_new`] and not be used afterwards.
void ppg_postprocessor_free(struct PpgPostProcessor *pp);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PPG_TCN_H */
