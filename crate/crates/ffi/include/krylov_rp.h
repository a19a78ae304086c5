#ifndef KRYLOV_RP_H
#define KRYLOV_RP_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result code of every fallible call.
typedef enum KrpStatus {
  KRP_STATUS_OK = 0,
  KRP_STATUS_INVALID_ARGUMENT = 1,
  KRP_STATUS_NON_FINITE = 2,
  KRP_STATUS_NOT_NORMALIZED = 3,
  KRP_STATUS_BREAKDOWN = 4,
  KRP_STATUS_NO_CONVERGENCE = 5,
  KRP_STATUS_FIT_NO_CONVERGENCE = 6,
  KRP_STATUS_SINGULAR_JACOBIAN = 7,
  KRP_STATUS_OUT_OF_REGIME = 8,
  KRP_STATUS_DIMENSION_MISMATCH = 9,
  KRP_STATUS_TRACE_TOO_SHORT = 10,
  KRP_STATUS_IO = 11,
  KRP_STATUS_FORMAT = 12,
  KRP_STATUS_NULL_POINTER = 13,
  KRP_STATUS_BUFFER_TOO_SMALL = 14,
  // A run finished but some cells failed or some checks did not pass.
  KRP_STATUS_RUN_FAILED = 15,
  KRP_STATUS_PANIC = 16,
} KrpStatus;

// Normalization convention of the generated ensemble.
typedef enum KrpNormalization {
  KRP_NORMALIZATION_STANDARD = 0,
  KRP_NORMALIZATION_UNIT_BANDWIDTH = 1,
  KRP_NORMALIZATION_HETEROSKEDASTIC = 2,
} KrpNormalization;

// Ansatz family for the Lanczos-profile fit.
typedef enum KrpAnsatzForm {
  KRP_ANSATZ_FORM_Q_LOG = 0,
  KRP_ANSATZ_FORM_SUPERPOSITION = 1,
} KrpAnsatzForm;

// Dense real symmetric matrix.
typedef struct KrpMatrix KrpMatrix;

// Tridiagonal (Lanczos) form with diagonal `a` (length n) and off-diagonal `b` (length n−1).
typedef struct KrpTridiagonal KrpTridiagonal;

// Fitted ansatz parameters with their standard errors.
typedef struct KrpAnsatzFit {
  double p;
  double q;
  double dp;
  double dq;
  double epsilon;
  double x_min;
  double scale;
} KrpAnsatzFit;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string.
const char *krp_version(void);

// Copies the calling thread's last error message (NUL-terminated, truncated
// to `cap`) and returns its full length in bytes without the terminator.
//
// # Safety
// `buf` must be NULL or point to `cap` writable bytes.
size_t krp_last_error_message(char *buf, size_t cap);

// Draws one Rosenzweig–Porter realization; `realization` selects an
// independent stream under `seed`.
//
// # Safety
// `out` must be a valid pointer; the handle written there must be released
// with [`krp_matrix_free`].
enum KrpStatus krp_matrix_generate(size_t n,
                                   double gamma,
                                   enum KrpNormalization normalization,
                                   uint64_t seed,
                                   uint64_t realization,
                                   struct KrpMatrix **out);

// Builds a matrix from its row-major `n × n` entries; symmetry is checked.
//
// # Safety
// `entries` must point to `n·n` values and `out` must be valid.
enum KrpStatus krp_matrix_from_dense(const double *entries, size_t n, struct KrpMatrix **out);

// Dimension of the matrix, or 0 for NULL.
//
// # Safety
// `m` must be NULL or a live handle.
size_t krp_matrix_dim(const struct KrpMatrix *m);

// Reads entry `(i, j)`.
//
// # Safety
// `m` must be a live handle and `out` valid.
enum KrpStatus krp_matrix_get(const struct KrpMatrix *m, size_t i, size_t j, double *out);

// # Safety
// `m` must be NULL or a handle not yet freed.
void krp_matrix_free(struct KrpMatrix *m);

// Householder tridiagonalization from the first basis vector.
//
// # Safety
// `m` must be a live handle and `out` valid; release the result with
// [`krp_tridiagonal_free`].
enum KrpStatus krp_tridiagonalize(const struct KrpMatrix *m, struct KrpTridiagonal **out);

// Wraps explicit coefficients: `a` of length `n`, `b` of length `n − 1`.
//
// # Safety
// `a`, `b` must point to the stated lengths and `out` must be valid.
enum KrpStatus krp_tridiagonal_new(const double *a,
                                   const double *b,
                                   size_t n,
                                   struct KrpTridiagonal **out);

// Krylov dimension, or 0 for NULL.
//
// # Safety
// `t` must be NULL or a live handle.
size_t krp_tridiagonal_len(const struct KrpTridiagonal *t);

// Copies the coefficients into `a_out` (capacity `a_cap`) and `b_out`
// (capacity `b_cap`).
//
// # Safety
// Buffers must hold their stated capacities.
enum KrpStatus krp_tridiagonal_coefficients(const struct KrpTridiagonal *t,
                                            double *a_out,
                                            size_t a_cap,
                                            double *b_out,
                                            size_t b_cap);

// Ascending eigenvalues of the tridiagonal form.
//
// # Safety
// `out` must hold `cap` values; `len_out` NULL or valid.
enum KrpStatus krp_tridiagonal_eigenvalues(const struct KrpTridiagonal *t,
                                           double *out,
                                           size_t cap,
                                           size_t *len_out);

// # Safety
// `t` must be NULL or a handle not yet freed.
void krp_tridiagonal_free(struct KrpTridiagonal *t);

// Mean adjacent-gap ratio over the central `window` fraction of ascending levels.
//
// # Safety
// `values` must point to `len` values and `out` must be valid.
enum KrpStatus krp_r_statistic(const double *values, size_t len, double window, double *out);

// Fits an ansatz to the profile `(x[i], b[i])`; `x_min ≤ 0` selects `2/n_dim`.
//
// # Safety
// `x`, `b` must point to `len` values and `out` must be valid.
enum KrpStatus krp_fit_ansatz(const double *x,
                              const double *b,
                              size_t len,
                              enum KrpAnsatzForm form,
                              double x_min,
                              size_t n_dim,
                              struct KrpAnsatzFit *out);

// Spread complexity K_S(t) of the thermofield double at inverse temperature
// `beta` for a spectrum `values`, at each of `n_times` times. The largest
// deviation of the total Krylov occupation from 1 goes to `defect_out` when
// not NULL.
//
// # Safety
// `values` holds `len` values, `times` and `ks_out` hold `n_times` values.
enum KrpStatus krp_spread_complexity(const double *values,
                                     size_t len,
                                     double beta,
                                     const double *times,
                                     size_t n_times,
                                     double *ks_out,
                                     double *defect_out);

// Runs the sweep described by a manifest JSON document. Returns
// `KRP_STATUS_RUN_FAILED` when the run completed with failed cells.
//
// # Safety
// `manifest_json` must be a NUL-terminated string.
enum KrpStatus krp_run_manifest(const char *manifest_json);

// Re-verifies a finished run directory. Returns `KRP_STATUS_RUN_FAILED`
// when a hash or invariant check fails.
//
// # Safety
// `dir` must be a NUL-terminated path.
enum KrpStatus krp_verify(const char *dir);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* KRYLOV_RP_H */
