#ifndef RANKSCOPE_H
#define RANKSCOPE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

// Result of every fallible call.
typedef enum RankscopeStatus {
  RANKSCOPE_STATUS_OK = 0,
  RANKSCOPE_STATUS_NULL_POINTER = 1,
  RANKSCOPE_STATUS_INVALID_UTF8 = 2,
  RANKSCOPE_STATUS_INVALID_INPUT = 3,
  RANKSCOPE_STATUS_INVALID_MEASURE = 4,
  RANKSCOPE_STATUS_NOT_FOUND = 5,
  RANKSCOPE_STATUS_FAILED = 6,
  RANKSCOPE_STATUS_PANIC = 7,
} RankscopeStatus;

typedef enum RankscopePolicy {
  RANKSCOPE_POLICY_ZERO_FILL = 0,
  RANKSCOPE_POLICY_INTERSECT = 1,
} RankscopePolicy;

typedef enum RankscopeTest {
  RANKSCOPE_TEST_T_TEST = 0,
  RANKSCOPE_TEST_WILCOXON = 1,
} RankscopeTest;

typedef enum RankscopeCorrection {
  RANKSCOPE_CORRECTION_HOLM = 0,
  RANKSCOPE_CORRECTION_BONFERRONI = 1,
} RankscopeCorrection;

// Per-query scores of runs under a set of measures.
typedef struct RankscopeMatrix RankscopeMatrix;

// Parsed relevance judgments.
typedef struct RankscopeQrels RankscopeQrels;

// Runs parsed from one file.
typedef struct RankscopeRuns RankscopeRuns;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string.
const char *rankscope_version(void);

// Message of the last failed call on this thread, or NULL. The pointer stays
// valid until the next call into the library from the same thread.
const char *rankscope_last_error(void);

// Error code name (for example `MISSING_CUTOFF`) of the last failed call on
// this thread, or NULL.
const char *rankscope_last_error_code(void);

// Releases a string returned by this library. NULL is ignored.
//
// # Safety
// `s` must come from this library and not have been freed already.
void rankscope_string_free(char *s);

// Parses a qrels file held in memory.
//
// # Safety
// `data` must point to `len` readable bytes and `out` to writable storage.
enum RankscopeStatus rankscope_qrels_parse(const uint8_t *data,
                                           uintptr_t len,
                                           struct RankscopeQrels **out);

// Number of judged queries.
//
// # Safety
// `qrels` must be NULL or a live handle.
uintptr_t rankscope_qrels_query_count(const struct RankscopeQrels *qrels);

// # Safety
// `qrels` must be NULL or a handle not freed before.
void rankscope_qrels_free(struct RankscopeQrels *qrels);

// Parses a run file held in memory; a file may contain several runs.
//
// # Safety
// `data` must point to `len` readable bytes and `out` to writable storage.
enum RankscopeStatus rankscope_runs_parse(const uint8_t *data,
                                          uintptr_t len,
                                          struct RankscopeRuns **out);

// Number of runs in the handle.
//
// # Safety
// `runs` must be NULL or a live handle.
uintptr_t rankscope_runs_count(const struct RankscopeRuns *runs);

// Copies the id of run `index` into a new string.
//
// # Safety
// `runs` must be a live handle and `out` writable.
enum RankscopeStatus rankscope_runs_id(const struct RankscopeRuns *runs,
                                       uintptr_t index,
                                       char **out);

// # Safety
// `runs` must be NULL or a handle not freed before.
void rankscope_runs_free(struct RankscopeRuns *runs);

// Scores every run under a comma-separated measure list such as
// `"AP,nDCG@10"`.
//
// # Safety
// Handles must be live, `measures` a NUL-terminated string and `out` writable.
enum RankscopeStatus rankscope_evaluate(const struct RankscopeQrels *qrels,
                                        const struct RankscopeRuns *runs,
                                        const char *measures,
                                        enum RankscopePolicy policy,
                                        struct RankscopeMatrix **out);

// Mean of one run under one measure.
//
// # Safety
// `matrix` must be live, strings NUL-terminated and `out` writable.
enum RankscopeStatus rankscope_matrix_mean(const struct RankscopeMatrix *matrix,
                                           const char *run_id,
                                           const char *measure,
                                           double *out);

// Score of one run on one query under one measure.
//
// # Safety
// `matrix` must be live, strings NUL-terminated and `out` writable.
enum RankscopeStatus rankscope_matrix_score(const struct RankscopeMatrix *matrix,
                                            const char *run_id,
                                            const char *measure,
                                            const char *qid,
                                            double *out);

// The `run_id,measure,qid,score` CSV table.
//
// # Safety
// `matrix` must be live and `out` writable.
enum RankscopeStatus rankscope_matrix_csv(const struct RankscopeMatrix *matrix, char **out);

// The matrix as canonical JSON.
//
// # Safety
// `matrix` must be live and `out` writable.
enum RankscopeStatus rankscope_matrix_json(const struct RankscopeMatrix *matrix, char **out);

// Tests every run against `baseline` and returns the comparison as
// canonical JSON.
//
// # Safety
// `matrix` must be live, `baseline` NUL-terminated and `out` writable.
enum RankscopeStatus rankscope_compare_json(const struct RankscopeMatrix *matrix,
                                            const char *baseline,
                                            enum RankscopeTest test,
                                            enum RankscopeCorrection correction,
                                            double alpha,
                                            char **out);

// # Safety
// `matrix` must be NULL or a handle not freed before.
void rankscope_matrix_free(struct RankscopeMatrix *matrix);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* RANKSCOPE_H */
