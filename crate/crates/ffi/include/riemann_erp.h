#ifndef RIEMANN_ERP_H
#define RIEMANN_ERP_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

#define ERP_LABEL_NONTARGET 0

#define ERP_LABEL_TARGET 1

#define ERP_LABEL_UNKNOWN 2

// `alpha = min(1, n / n_full)`; the parameter is `n_full`.
#define ERP_SCHEDULE_LINEAR 0

// Constant `alpha`; the parameter is `alpha`.
#define ERP_SCHEDULE_FIXED 1

// Status codes; values 2 to 6 match the command-line exit codes.
typedef enum ErpStatus {
  ERP_STATUS_OK = 0,
  ERP_STATUS_FAILURE = 1,
  ERP_STATUS_FORMAT = 2,
  ERP_STATUS_CLASS_COVERAGE = 3,
  ERP_STATUS_DIMENSION_MISMATCH = 4,
  ERP_STATUS_INVALID_CONFIG = 6,
  ERP_STATUS_NULL_POINTER = 7,
  ERP_STATUS_INVALID_ARGUMENT = 8,
  ERP_STATUS_PANIC = 9,
} ErpStatus;

// Single-writer adaptation state of one session.
typedef struct ErpAdaptation ErpAdaptation;

// Trained classifier together with its default adaptation schedule.
typedef struct ErpModel ErpModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread; empty after a success.
// The pointer stays valid until the next call on the same thread.
const char *erp_last_error_message(void);

// Library version as a static nul-terminated string.
const char *erp_version(void);

// Reads a model file.
//
// # Safety
// `path` must be a nul-terminated string; `out` must be writable.
enum ErpStatus erp_model_load(const char *path, struct ErpModel **out);

// Writes a model file.
//
// # Safety
// `model` must come from this library; `path` must be nul-terminated.
enum ErpStatus erp_model_save(const struct ErpModel *model, const char *path);

// Releases a model. Null is ignored.
//
// # Safety
// `model` must come from this library and not be used afterwards.
void erp_model_free(struct ErpModel *model);

// Trains from `n_trials` consecutive trials with one label code each.
// A negative `shrinkage` selects the shape-dependent default. The model's
// adaptation schedule defaults to linear with `n_full = 120`.
//
// # Safety
// `data` must hold `n_trials * channels * samples` doubles, `labels`
// `n_trials` bytes; `out` must be writable.
enum ErpStatus erp_model_train(const double *data,
                               const uint8_t *labels,
                               uintptr_t n_trials,
                               uintptr_t channels,
                               uintptr_t samples,
                               double shrinkage,
                               struct ErpModel **out);

// Trial shape expected by the model.
//
// # Safety
// `model` must come from this library; outputs must be writable.
enum ErpStatus erp_model_dims(const struct ErpModel *model,
                              uintptr_t *channels,
                              uintptr_t *samples);

// Score `d(nontarget mean, S) - d(target mean, S)`; positive means target.
//
// # Safety
// `data` must hold `channels * samples` doubles; `score` must be writable.
enum ErpStatus erp_model_score(const struct ErpModel *model,
                               const double *data,
                               uintptr_t channels,
                               uintptr_t samples,
                               double *score);

// Predicted label code of one trial.
//
// # Safety
// As [`erp_model_score`].
enum ErpStatus erp_model_predict(const struct ErpModel *model,
                                 const double *data,
                                 uintptr_t channels,
                                 uintptr_t samples,
                                 uint8_t *label);

// Affine-invariant distance between two `dim x dim` SPD matrices.
//
// # Safety
// `a` and `b` must hold `dim * dim` doubles; `out` must be writable.
enum ErpStatus erp_distance(const double *a, const double *b, uintptr_t dim, double *out);

// Starts adapting `model` to a new subject. `kind` is one of the
// `ERP_SCHEDULE_*` codes.
//
// # Safety
// `model` must come from this library; `out` must be writable. The model
// is copied and may be freed afterwards.
enum ErpStatus erp_adaptation_new(const struct ErpModel *model,
                                  uint32_t kind,
                                  double param,
                                  struct ErpAdaptation **out);

// Learns from one labeled trial (target or nontarget).
//
// # Safety
// `state` must come from this library; `data` must hold
// `channels * samples` doubles.
enum ErpStatus erp_adaptation_update(struct ErpAdaptation *state,
                                     const double *data,
                                     uintptr_t channels,
                                     uintptr_t samples,
                                     uint8_t label);

// Scores one trial with the current blend of generic and subject means.
//
// # Safety
// As [`erp_model_score`], with `state` in place of the model.
enum ErpStatus erp_adaptation_score(const struct ErpAdaptation *state,
                                    const double *data,
                                    uintptr_t channels,
                                    uintptr_t samples,
                                    double *score);

// Current blend weight toward the subject means.
//
// # Safety
// `state` must come from this library; `alpha` must be writable.
enum ErpStatus erp_adaptation_alpha(const struct ErpAdaptation *state, double *alpha);

// Snapshot of the current blended model as an independent handle.
//
// # Safety
// `state` must come from this library; `out` must be writable.
enum ErpStatus erp_adaptation_model(const struct ErpAdaptation *state, struct ErpModel **out);

// Releases an adaptation state. Null is ignored.
//
// # Safety
// `state` must come from this library and not be used afterwards.
void erp_adaptation_free(struct ErpAdaptation *state);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* RIEMANN_ERP_H */
