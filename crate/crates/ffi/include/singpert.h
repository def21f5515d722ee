#ifndef SINGPERT_H
#define SINGPERT_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum SpStatus {
  SP_STATUS_OK = 0,
  SP_STATUS_NULL_ARGUMENT = 1,
  SP_STATUS_INVALID_UTF8 = 2,
  /**
   * Problem text, expression or unknown built-in name.
   */
  SP_STATUS_PARSE = 3,
  /**
   * A pipeline stage failed: solve, transform or validation.
   */
  SP_STATUS_PIPELINE = 4,
  SP_STATUS_IO = 5,
  /**
   * Index or option out of range.
   */
  SP_STATUS_OUT_OF_RANGE = 6,
  SP_STATUS_PANIC = 7,
} SpStatus;

/**
 * A parsed problem file.
 */
typedef struct SpProblem SpProblem;

/**
 * The outcome of a pipeline run.
 */
typedef struct SpReport SpReport;

/**
 * Overrides for [`sp_run_with`]. Zero and null fields keep the problem's value.
 */
typedef struct SpOverrides {
  double tol;
  const double *eps_ladder;
  size_t eps_len;
  /**
   * Negative keeps the problem's depth.
   */
  int32_t ansatz_depth;
} SpOverrides;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failure on this thread, or null. Valid until the
 * next failing call on the same thread; do not free.
 */
const char *sp_last_error(void);

/**
 * Library version, static.
 */
const char *sp_version(void);

/**
 * Parse a problem file from TOML text.
 *
 * # Safety
 * `text` must be a NUL-terminated string; `out` must be writable.
 */
enum SpStatus sp_problem_from_toml(const char *text, struct SpProblem **out);

/**
 * Load one of the built-in cases by name.
 *
 * # Safety
 * `name` must be a NUL-terminated string; `out` must be writable.
 */
enum SpStatus sp_problem_builtin(const char *name, struct SpProblem **out);

/**
 * # Safety
 * `p` must come from an `sp_problem_*` constructor, or be null.
 */
void sp_problem_free(struct SpProblem *p);

/**
 * Run the pipeline; `validate` adds the numeric validation stage.
 *
 * # Safety
 * `problem` must be a live handle; `out` must be writable.
 */
enum SpStatus sp_run(const struct SpProblem *problem, bool validate, struct SpReport **out);

/**
 * [`sp_run`] with overrides; `ov` may be null.
 *
 * # Safety
 * As [`sp_run`]; a non-null `ov.eps_ladder` must point to `ov.eps_len` doubles.
 */
enum SpStatus sp_run_with(const struct SpProblem *problem,
                          bool validate,
                          const struct SpOverrides *ov,
                          struct SpReport **out);

/**
 * # Safety
 * `r` must come from [`sp_run`] or [`sp_run_with`], or be null.
 */
void sp_report_free(struct SpReport *r);

/**
 * Whether every check of the report passed. False for a null handle.
 *
 * # Safety
 * `r` must be a live report handle or null.
 */
bool sp_report_passed(const struct SpReport *r);

/**
 * Number of checks, expectation and validation together.
 *
 * # Safety
 * `r` must be a live report handle or null.
 */
size_t sp_report_check_count(const struct SpReport *r);

/**
 * Name and outcome of check `index`. The name is a new string to release
 * with [`sp_string_free`].
 *
 * # Safety
 * `r` must be a live handle; `name` and `passed` must be writable.
 */
enum SpStatus sp_report_check(const struct SpReport *r, size_t index, char **name, bool *passed);

/**
 * The report as JSON; release with [`sp_string_free`].
 *
 * # Safety
 * `r` must be a live handle; `out` must be writable.
 */
enum SpStatus sp_report_json(const struct SpReport *r, char **out);

/**
 * Write report.json, solution.txt and, with validation, errors.csv into `dir`.
 *
 * # Safety
 * `r` must be a live handle; `dir` a NUL-terminated path.
 */
enum SpStatus sp_report_emit(const struct SpReport *r, const char *dir);

/**
 * # Safety
 * `s` must be a string returned by this library, or null.
 */
void sp_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SINGPERT_H */
