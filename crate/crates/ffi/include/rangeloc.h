#ifndef RANGELOC_H
#define RANGELOC_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum RlStatus {
  RL_STATUS_OK = 0,
  RL_STATUS_NULL_POINTER = 1,
  RL_STATUS_INVALID_INPUT = 2,
  RL_STATUS_DIMENSION_MISMATCH = 3,
  /**
   * The solver ran but could not produce a usable estimate.
   */
  RL_STATUS_SOLVER_FAILURE = 4,
  RL_STATUS_BUFFER_TOO_SMALL = 5,
  RL_STATUS_PANIC = 6,
} RlStatus;

typedef enum RlAlgorithm {
  RL_ALGORITHM_SLCP = 0,
  RL_ALGORITHM_SLNN = 1,
  RL_ALGORITHM_SLL1_AD = 2,
  RL_ALGORITHM_SLL1_MD = 3,
  RL_ALGORITHM_SLL1_SD = 4,
  RL_ALGORITHM_SRLS = 5,
} RlAlgorithm;

typedef enum RlSolveStatus {
  RL_SOLVE_STATUS_OPTIMAL = 0,
  RL_SOLVE_STATUS_INACCURATE = 1,
  RL_SOLVE_STATUS_FAILED = 2,
} RlSolveStatus;

/**
 * Anchors and measured ranges of one instance.
 */
typedef struct RlProblem RlProblem;

typedef struct RlResult RlResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies `m` anchors of dimension `n` (row-major, `m * n` values) and `m`
 * ranges into a new problem handle stored in `*out`.
 *
 * # Safety
 * `anchors` must point to `m * n` readable doubles, `ranges` to `m`, and
 * `out` must be a valid pointer.
 */
enum RlStatus rl_problem_new(const double *anchors,
                             size_t m,
                             size_t n,
                             const double *ranges,
                             struct RlProblem **out);

/**
 * # Safety
 * `problem` must be null or a handle from [`rl_problem_new`] not yet freed.
 */
void rl_problem_free(struct RlProblem *problem);

/**
 * Solves `problem` with `algorithm` using default settings and stores a new
 * result handle in `*out`.
 *
 * # Safety
 * `problem` must be a live handle and `out` a valid pointer.
 */
enum RlStatus rl_localize(const struct RlProblem *problem,
                          enum RlAlgorithm algorithm,
                          struct RlResult **out);

/**
 * # Safety
 * `result` must be null or a handle from [`rl_localize`] not yet freed.
 */
void rl_result_free(struct RlResult *result);

/**
 * Dimension of the estimated position; 0 for a null handle.
 *
 * # Safety
 * `result` must be null or a live handle.
 */
size_t rl_result_dim(const struct RlResult *result);

/**
 * Copies the position into `buf`, which holds `len` doubles.
 *
 * # Safety
 * `result` must be a live handle and `buf` must hold `len` writable doubles.
 */
enum RlStatus rl_result_position(const struct RlResult *result, double *buf, size_t len);

/**
 * Dominant-eigenvalue ratio of the relaxed solution; NaN for a null handle.
 *
 * # Safety
 * `result` must be null or a live handle.
 */
double rl_result_eig_ratio(const struct RlResult *result);

/**
 * # Safety
 * `result` must be null or a live handle.
 */
double rl_result_objective(const struct RlResult *result);

/**
 * # Safety
 * `result` must be null or a live handle.
 */
size_t rl_result_iterations(const struct RlResult *result);

/**
 * # Safety
 * `result` must be null or a live handle.
 */
enum RlSolveStatus rl_result_status(const struct RlResult *result);

/**
 * Message of the last failure on this thread, or null if none. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *rl_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *rl_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* RANGELOC_H */
