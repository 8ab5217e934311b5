#ifndef OTRANK_H
#define OTRANK_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Status code returned by every fallible function.
typedef enum OtrStatus {
  OTR_STATUS_OK = 0,
  OTR_STATUS_NULL_POINTER = 1,
  OTR_STATUS_INVALID_ARGUMENT = 2,
  OTR_STATUS_UNSUPPORTED = 3,
  OTR_STATUS_PARSE = 4,
  OTR_STATUS_IO = 5,
  OTR_STATUS_INTERNAL = 6,
  OTR_STATUS_PANIC = 7,
} OtrStatus;

typedef enum OtrReference {
  OTR_REFERENCE_CUBIC_UNIFORM = 0,
  OTR_REFERENCE_GAUSSIAN_CUBIC = 1,
  OTR_REFERENCE_SPHERICAL_UNIFORM = 2,
  OTR_REFERENCE_GAUSSIAN_SPHERICAL = 3,
} OtrReference;

typedef enum OtrScore {
  OTR_SCORE_WILCOXON = 0,
  OTR_SCORE_VDW_SPHERICAL = 1,
  OTR_SCORE_VDW_MARGINAL = 2,
} OtrScore;

// Reference grid handle.
typedef struct OtrGrid OtrGrid;

// Calibrated rank test handle: a grid, a score and a critical value table.
typedef struct OtrRankTest OtrRankTest;

// Outcome of a two-sample test. `reject` is 0 or 1.
typedef struct OtrTestResult {
  double statistic;
  double critical_value;
  double p_value;
  int32_t reject;
} OtrTestResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message describing the last failure on this thread, or null if none.
// The pointer stays valid until the next failing call on the same thread.
const char *otr_last_error(void);

// Frees a string returned by this library. Null is ignored.
//
// # Safety
// `s` must come from this library and not have been freed.
void otr_string_free(char *s);

// Builds a reference grid of `n` points in dimension `dim`. For spherical
// references `n_r` fixes the number of shells; pass 0 to search for the
// optimal factorization.
//
// # Safety
// `out` must be a valid pointer.
enum OtrStatus otr_grid_build(size_t dim,
                              size_t n,
                              enum OtrReference reference,
                              size_t n_r,
                              struct OtrGrid **out);

// Reads a grid from its JSON form.
//
// # Safety
// `json` must be a nul-terminated string and `out` a valid pointer.
enum OtrStatus otr_grid_from_json(const char *json, struct OtrGrid **out);

// Serializes a grid to JSON. Release the string with `otr_string_free`.
//
// # Safety
// `grid` must be a live handle and `out` a valid pointer.
enum OtrStatus otr_grid_to_json(const struct OtrGrid *grid, char **out);

// Dimension of the grid, or 0 for a null handle.
//
// # Safety
// `grid` must be null or a live handle.
size_t otr_grid_dim(const struct OtrGrid *grid);

// Number of grid points, or 0 for a null handle.
//
// # Safety
// `grid` must be null or a live handle.
size_t otr_grid_len(const struct OtrGrid *grid);

// Copies the grid points, row-major, into `out` which holds `capacity`
// doubles. Fails unless `capacity >= len * dim`.
//
// # Safety
// `grid` must be a live handle and `out` must hold `capacity` doubles.
enum OtrStatus otr_grid_points(const struct OtrGrid *grid, double *out, size_t capacity);

// Releases a grid. Null is ignored.
//
// # Safety
// `grid` must be null or a live handle, not used afterwards.
void otr_grid_free(struct OtrGrid *grid);

// Optimal assignment of `n` observations to the `n` grid points:
// observation `i` goes to grid point `perm[i]`.
//
// # Safety
// `data` must hold `n * dim` doubles with `dim` the grid dimension, and
// `perm` must hold `n` entries.
enum OtrStatus otr_assignment(const struct OtrGrid *grid,
                              const double *data,
                              size_t n,
                              size_t *perm);

// Calibrates a rank test on a copy of `grid` for first-sample size `n1`:
// the level-`alpha` critical value is estimated from `reps` random splits
// drawn from `seed`.
//
// # Safety
// `grid` must be a live handle and `out` a valid pointer.
enum OtrStatus otr_rank_test_new(const struct OtrGrid *grid,
                                 enum OtrScore score,
                                 size_t n1,
                                 double alpha,
                                 size_t reps,
                                 uint64_t seed,
                                 struct OtrRankTest **out);

// Critical value of a calibrated test, or NaN for a null handle.
//
// # Safety
// `test` must be null or a live handle.
double otr_rank_test_critical_value(const struct OtrRankTest *test);

// Runs a calibrated test on two samples whose sizes match the calibration.
//
// # Safety
// `data1` and `data2` must hold `n1 * dim` and `n2 * dim` doubles, with
// `dim` the grid dimension, and `out` must be a valid pointer.
enum OtrStatus otr_rank_test_run(const struct OtrRankTest *test,
                                 const double *data1,
                                 size_t n1,
                                 const double *data2,
                                 size_t n2,
                                 struct OtrTestResult *out);

// Releases a rank test. Null is ignored.
//
// # Safety
// `test` must be null or a live handle, not used afterwards.
void otr_rank_test_free(struct OtrRankTest *test);

// Two-sample Hotelling T² test with its asymptotic χ² calibration.
//
// # Safety
// `data1` and `data2` must hold `n1 * dim` and `n2 * dim` doubles and
// `out` must be a valid pointer.
enum OtrStatus otr_hotelling_test(const double *data1,
                                  size_t n1,
                                  const double *data2,
                                  size_t n2,
                                  size_t dim,
                                  double alpha,
                                  struct OtrTestResult *out);

// Standard normal quantile.
//
// # Safety
// `out` must be a valid pointer.
enum OtrStatus otr_inv_cdf_normal(double p, double *out);

// Quantile of the χ² law with `df` degrees of freedom.
//
// # Safety
// `out` must be a valid pointer.
enum OtrStatus otr_inv_cdf_chisq(double p, size_t df, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* OTRANK_H */
