#ifndef DEBTCAST_H
#define DEBTCAST_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stddef.h>
#include <stdint.h>

// Result code of every fallible call.
typedef enum DcStatus {
  DC_STATUS_OK = 0,
  DC_STATUS_NULL_POINTER = 1,
  DC_STATUS_INVALID_ARGUMENT = 2,
  DC_STATUS_IO = 3,
  DC_STATUS_PARSE = 4,
  DC_STATUS_SHAPE = 5,
  DC_STATUS_PRECONDITION = 6,
  DC_STATUS_UNDEFINED_SCORE = 7,
  DC_STATUS_PANIC = 99,
} DcStatus;

// Feature rows, a target vector and per-row group labels.
typedef struct DcMatrix DcMatrix;

// A fitted regressor.
typedef struct DcModel DcModel;

// Mean and spread of fold scores from `k`-fold cross-validation.
typedef struct DcCvScores {
  double mae;
  double mae_std;
  double r2;
  double r2_std;
} DcCvScores;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version, static storage.
const char *dc_version(void);

// Message for the last failed call on this thread; empty after a success.
// Valid until the next call into the library on this thread.
const char *dc_last_error(void);

// Builds a matrix from `rows × cols` row-major doubles. NaN marks a missing
// cell. `target` (length `rows`) may be null for prediction-only matrices.
//
// # Safety
// `data` points to `rows * cols` doubles; `target` is null or points to
// `rows` doubles; `out` is writable.
enum DcStatus dc_matrix_new(uintptr_t rows,
                            uintptr_t cols,
                            const double *data,
                            const double *target,
                            struct DcMatrix **out);

// Loads a snapshot CSV. `target` is `"maintainability"` or `"reliability"`;
// distribution cells are reduced by weighted sum. Cells stay missing.
//
// # Safety
// `path` and `target` are NUL-terminated strings; `out` is writable.
enum DcStatus dc_matrix_from_csv(const char *path, const char *target, struct DcMatrix **out);

// Row count, or 0 for a null handle.
//
// # Safety
// `m` is null or a live matrix handle.
uintptr_t dc_matrix_rows(const struct DcMatrix *m);

// Column count, or 0 for a null handle.
//
// # Safety
// `m` is null or a live matrix handle.
uintptr_t dc_matrix_cols(const struct DcMatrix *m);

// Fills missing cells in place with column medians over all rows.
//
// # Safety
// `m` is a live matrix handle not used concurrently.
enum DcStatus dc_matrix_impute_median(struct DcMatrix *m);

// # Safety
// `m` is null or a handle from this library, not used afterwards.
void dc_matrix_free(struct DcMatrix *m);

// Fits regressor `kind` (e.g. `"random_forest"`) with optional JSON
// hyperparameter overrides such as `{"n_estimators": 50}`.
//
// # Safety
// String arguments are NUL-terminated (`params_json` may be null); `m` is a
// live matrix handle; `out` is writable.
enum DcStatus dc_model_fit(const char *kind,
                           const char *params_json,
                           uint64_t seed,
                           const struct DcMatrix *m,
                           struct DcModel **out);

// Writes one prediction per row of `m` into `out[0..out_len)`; `out_len`
// must equal the row count.
//
// # Safety
// `model` and `m` are live handles; `out` points to `out_len` writable doubles.
enum DcStatus dc_model_predict(const struct DcModel *model,
                               const struct DcMatrix *m,
                               double *out,
                               uintptr_t out_len);

// Serializes the model; free the string with `dc_string_free`.
//
// # Safety
// `model` is a live handle; `out` is writable.
enum DcStatus dc_model_to_json(const struct DcModel *model, char **out);

// # Safety
// `json` is a NUL-terminated string; `out` is writable.
enum DcStatus dc_model_from_json(const char *json, struct DcModel **out);

// # Safety
// `model` is null or a handle from this library, not used afterwards.
void dc_model_free(struct DcModel *model);

// # Safety
// `s` is null or a string returned by this library, not used afterwards.
void dc_string_free(char *s);

// Mean absolute error of two length-`n` vectors.
//
// # Safety
// `actual` and `predicted` point to `n` doubles; `out` is writable.
enum DcStatus dc_mae(const double *actual, const double *predicted, uintptr_t n, double *out);

// Coefficient of determination of two length-`n` vectors.
//
// # Safety
// As for [`dc_mae`].
enum DcStatus dc_r_squared(const double *actual, const double *predicted, uintptr_t n, double *out);

// Shuffled-row (`by_project == 0`) or project-grouped `k`-fold
// cross-validation with fold-local median imputation.
//
// # Safety
// As for [`dc_model_fit`]; `out` is writable.
enum DcStatus dc_cross_validate(const char *kind,
                                const char *params_json,
                                uint64_t seed,
                                const struct DcMatrix *m,
                                uintptr_t k,
                                int32_t by_project,
                                struct DcCvScores *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DEBTCAST_H */
