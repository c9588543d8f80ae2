#ifndef FDA_H
#define FDA_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum {
  FDA_STATUS_OK = 0,
  FDA_STATUS_NULL_POINTER = 1,
  FDA_STATUS_INVALID_ARGUMENT = 2,
  FDA_STATUS_DOMAIN = 3,
  FDA_STATUS_SINGULAR = 4,
  FDA_STATUS_PARSE = 5,
  FDA_STATUS_IO = 6,
  FDA_STATUS_BUFFER_TOO_SMALL = 7,
  FDA_STATUS_INTERNAL = 8,
} FdaStatus;

/**
 * B-spline basis on [0, 1].
 */
typedef struct FdaBasis FdaBasis;

/**
 * Curves sharing one basis.
 */
typedef struct FdaDataset FdaDataset;

/**
 * Fitted functional PCA.
 */
typedef struct FdaFpca FdaFpca;

/**
 * Fitted principal-component function-on-function regression.
 */
typedef struct FdaMfflr FdaMfflr;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message describing the last failed call on this thread, or NULL. The
 * pointer stays valid until the next call into the library on this thread.
 */
const char *fda_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *fda_version(void);

/**
 * Clamped B-spline basis of `order` with `num_basis` functions and equally
 * spaced interior knots.
 *
 * # Safety
 * `out` must be a valid pointer to a handle slot.
 */
FdaStatus fda_basis_new(size_t order, size_t num_basis, FdaBasis **out);

/**
 * # Safety
 * `basis` must be NULL or a handle from `fda_basis_new`, not yet freed.
 */
void fda_basis_free(FdaBasis *basis);

/**
 * Number of basis functions, or 0 for a NULL handle.
 *
 * # Safety
 * `basis` must be NULL or a live handle.
 */
size_t fda_basis_num_basis(const FdaBasis *basis);

/**
 * Values of every basis function at `t` into `out` (`num_basis` entries).
 *
 * # Safety
 * `basis` must be a live handle and `out` must hold `out_len` doubles.
 */
FdaStatus fda_basis_eval(const FdaBasis *basis, double t, double *out, size_t out_len);

/**
 * Gram matrix of L2 inner products, `num_basis × num_basis`, row-major.
 *
 * # Safety
 * `basis` must be a live handle and `out` must hold `out_len` doubles.
 */
FdaStatus fda_basis_gram(const FdaBasis *basis, double *out, size_t out_len);

/**
 * Least-squares coefficients of the observations `(ts[k], ys[k])`, plus the
 * mean squared residual in `mse` (may be NULL).
 *
 * # Safety
 * `ts` and `ys` must hold `m` doubles, `coeffs` must hold `coeffs_len`.
 */
FdaStatus fda_basis_fit(const FdaBasis *basis,
                        const double *ts,
                        const double *ys,
                        size_t m,
                        double *coeffs,
                        size_t coeffs_len,
                        double *mse);

/**
 * `n` curves from a row-major `n × num_basis` coefficient matrix. Curves
 * are labelled by their row index.
 *
 * # Safety
 * `basis` must be a live handle, `coeffs` must hold `n * num_basis` doubles.
 */
FdaStatus fda_dataset_new(const FdaBasis *basis, const double *coeffs, size_t n, FdaDataset **out);

/**
 * Builds a dataset from a JSON document as written by the CLI.
 *
 * # Safety
 * `json` must be a NUL-terminated UTF-8 string.
 */
FdaStatus fda_dataset_from_json(const char *json, FdaDataset **out);

/**
 * # Safety
 * `data` must be NULL or a live dataset handle.
 */
void fda_dataset_free(FdaDataset *data);

/**
 * Number of curves, or 0 for a NULL handle.
 *
 * # Safety
 * `data` must be NULL or a live handle.
 */
size_t fda_dataset_len(const FdaDataset *data);

/**
 * Coefficients as a row-major `n × num_basis` matrix.
 *
 * # Safety
 * `data` must be a live handle and `out` must hold `out_len` doubles.
 */
FdaStatus fda_dataset_coefficients(const FdaDataset *data, double *out, size_t out_len);

/**
 * Curve values at `ts` as a row-major `n × m` matrix.
 *
 * # Safety
 * `ts` must hold `m` doubles, `out` must hold `out_len` doubles.
 */
FdaStatus fda_dataset_eval(const FdaDataset *data,
                           const double *ts,
                           size_t m,
                           double *out,
                           size_t out_len);

/**
 * Functional PCA keeping at most `max_components` components (0 keeps up
 * to `n - 1`).
 *
 * # Safety
 * `data` must be a live handle and `out` a valid handle slot.
 */
FdaStatus fda_fpca_fit(const FdaDataset *data, size_t max_components, FdaFpca **out);

/**
 * # Safety
 * `model` must be NULL or a live FPCA handle.
 */
void fda_fpca_free(FdaFpca *model);

/**
 * Number of retained components, or 0 for a NULL handle.
 *
 * # Safety
 * `model` must be NULL or a live handle.
 */
size_t fda_fpca_num_components(const FdaFpca *model);

/**
 * Eigenvalues, largest first (`num_components` entries).
 *
 * # Safety
 * `model` must be a live handle and `out` must hold `out_len` doubles.
 */
FdaStatus fda_fpca_eigenvalues(const FdaFpca *model, double *out, size_t out_len);

/**
 * Share of total variance per component (`num_components` entries).
 *
 * # Safety
 * `model` must be a live handle and `out` must hold `out_len` doubles.
 */
FdaStatus fda_fpca_explained_variance(const FdaFpca *model, double *out, size_t out_len);

/**
 * Scores as a row-major `n × num_components` matrix.
 *
 * # Safety
 * `model` must be a live handle and `out` must hold `out_len` doubles.
 */
FdaStatus fda_fpca_scores(const FdaFpca *model, double *out, size_t out_len);

/**
 * Harmonic coefficients as a row-major `num_components × num_basis` matrix.
 *
 * # Safety
 * `model` must be a live handle and `out` must hold `out_len` doubles.
 */
FdaStatus fda_fpca_harmonics(const FdaFpca *model, double *out, size_t out_len);

/**
 * Regresses the first `response_components` response scores on the first
 * `predictor_components` scores of each of the `num_predictors` predictors,
 * with an intercept.
 *
 * # Safety
 * `predictors` must hold `num_predictors` live dataset handles.
 */
FdaStatus fda_mfflr_fit(const FdaDataset *response,
                        const FdaDataset *const *predictors,
                        size_t num_predictors,
                        size_t response_components,
                        size_t predictor_components,
                        FdaMfflr **out);

/**
 * # Safety
 * `model` must be NULL or a live regression handle.
 */
void fda_mfflr_free(FdaMfflr *model);

/**
 * Shape of the coefficient matrix: `K` rows and `1 + J·L` columns.
 *
 * # Safety
 * `rows` and `cols` must be valid pointers.
 */
FdaStatus fda_mfflr_shape(const FdaMfflr *model, size_t *rows, size_t *cols);

/**
 * Coefficients, row-major: column 0 is the intercept, then one block of
 * `L` columns per predictor.
 *
 * # Safety
 * `model` must be a live handle and `out` must hold `out_len` doubles.
 */
FdaStatus fda_mfflr_coefficients(const FdaMfflr *model, double *out, size_t out_len);

/**
 * OLS standard errors in the layout of the coefficients.
 *
 * # Safety
 * `model` must be a live handle and `out` must hold `out_len` doubles.
 */
FdaStatus fda_mfflr_std_errors(const FdaMfflr *model, double *out, size_t out_len);

/**
 * Predicted response curves for new predictor curves.
 *
 * # Safety
 * `predictors` must hold `num_predictors` live dataset handles.
 */
FdaStatus fda_mfflr_predict(const FdaMfflr *model,
                            const FdaDataset *const *predictors,
                            size_t num_predictors,
                            FdaDataset **out);

/**
 * Serializes the model as JSON into `buf` (NUL-terminated). `required`
 * (may be NULL) receives the buffer size needed including the NUL; call
 * with `buf_len = 0` to query it.
 *
 * # Safety
 * `buf` must hold `buf_len` bytes.
 */
FdaStatus fda_mfflr_to_json(const FdaMfflr *model, char *buf, size_t buf_len, size_t *required);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FDA_H */
