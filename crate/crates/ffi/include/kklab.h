#ifndef KKLAB_H
#define KKLAB_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every exported function.
 */
typedef enum {
  KK_STATUS_OK = 0,
  KK_STATUS_NULL_POINTER = 1,
  KK_STATUS_INVALID_ARGUMENT = 2,
  KK_STATUS_PARSE = 3,
  KK_STATUS_NUMERICAL = 4,
  KK_STATUS_PRECONDITION = 5,
  KK_STATUS_INCONCLUSIVE = 6,
  KK_STATUS_BUFFER_TOO_SMALL = 7,
  KK_STATUS_IO = 8,
  KK_STATUS_PANIC = 9,
} KkStatus;

/**
 * Which discretization [`kk_op_new`] builds.
 */
typedef enum {
  /**
   * `i d/dx + f`.
   */
  KK_OP_KIND_FIRST_ORDER = 0,
  /**
   * `-d²/dx² + V`.
   */
  KK_OP_KIND_SCHRODINGER = 1,
  /**
   * Doubled `[[0, -d* + f], [d + f, 0]]` with forward differences.
   */
  KK_OP_KIND_EVEN_DIRAC = 2,
} KkOpKind;

/**
 * Opaque uniform grid.
 */
typedef struct KkGrid KkGrid;

/**
 * Opaque discretized symmetric operator.
 */
typedef struct KkSymOp KkSymOp;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the last error message of this thread into `buf` (NUL-terminated,
 * truncated to `cap`) and returns the full length without the terminator.
 *
 * # Safety
 * `buf` must be null or valid for `cap` bytes.
 */
size_t kk_last_error_message(char *buf, size_t cap);

/**
 * Library version as a static NUL-terminated string.
 */
const char *kk_version(void);

/**
 * Grid on `[-half_width, half_width]` with an odd number of points.
 *
 * # Safety
 * `out` must be null or valid for a write.
 */
KkStatus kk_grid_new(double half_width, size_t n_points, KkGrid **out);

/**
 * # Safety
 * `grid` must be null or a handle from [`kk_grid_new`] not yet freed.
 */
void kk_grid_free(KkGrid *grid);

/**
 * Number of grid points, 0 for a null handle.
 *
 * # Safety
 * `grid` must be null or a live handle.
 */
size_t kk_grid_n_points(const KkGrid *grid);

/**
 * Grid spacing, NaN for a null handle.
 *
 * # Safety
 * `grid` must be null or a live handle.
 */
double kk_grid_spacing(const KkGrid *grid);

/**
 * Discretizes an operator with potential expression `potential` on `grid`.
 *
 * # Safety
 * `grid` must be a live handle, `potential` a NUL-terminated string and
 * `out` valid for a write.
 */
KkStatus kk_op_new(const KkGrid *grid, KkOpKind kind, const char *potential, KkSymOp **out);

/**
 * # Safety
 * `op` must be null or a handle from [`kk_op_new`] not yet freed.
 */
void kk_op_free(KkSymOp *op);

/**
 * Matrix dimension, 0 for a null handle.
 *
 * # Safety
 * `op` must be null or a live handle.
 */
size_t kk_op_dim(const KkSymOp *op);

/**
 * All eigenvalues, ascending. `len` receives the count; when `cap` is too
 * small nothing is written to `values` and `KK_STATUS_BUFFER_TOO_SMALL`
 * is returned.
 *
 * # Safety
 * `op` must be a live handle, `values` valid for `cap` doubles and `len`
 * valid for a write.
 */
KkStatus kk_op_eigenvalues(const KkSymOp *op, double *values, size_t cap, size_t *len);

/**
 * Deficiency indices of an operator string such as `"i_d_dx + x"` on
 * `(a, b)`; infinite endpoints are passed as `±INFINITY`.
 *
 * # Safety
 * `op_expr` must be a NUL-terminated string; `n_plus` and `n_minus` valid
 * for writes.
 */
KkStatus kk_deficiency_indices(const char *op_expr,
                               double a,
                               double b,
                               size_t *n_plus,
                               size_t *n_minus);

/**
 * Runs the finite-module identity battery; `passed` receives the verdict.
 *
 * # Safety
 * `passed` must be valid for a write.
 */
KkStatus kk_finmod_battery(uint64_t seed, bool *passed);

/**
 * Runs a scenario file, writes report.json, spectra.csv and plots.svg into
 * `out_dir` (or the configured directory when null), and stores the
 * overall verdict in `passed`.
 *
 * # Safety
 * `config_path` must be a NUL-terminated string, `out_dir` null or a
 * NUL-terminated string, and `passed` valid for a write.
 */
KkStatus kk_run_scenario(const char *config_path, const char *out_dir, bool *passed);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* KKLAB_H */
