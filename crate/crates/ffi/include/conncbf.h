#ifndef CONNCBF_H
#define CONNCBF_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum ConncbfStatus {
  CONNCBF_STATUS_OK = 0,
  // A required pointer argument was null.
  CONNCBF_STATUS_NULL_POINTER = 1,
  // A numeric argument was out of range or a string was not UTF-8.
  CONNCBF_STATUS_INVALID_ARGUMENT = 2,
  // The scenario file or text failed validation.
  CONNCBF_STATUS_INVALID_SCENARIO = 3,
  // Reading or writing files failed.
  CONNCBF_STATUS_IO = 4,
  // The simulation stopped early; a partial log may still be returned.
  CONNCBF_STATUS_RUN_FAILED = 5,
  // The constraint set of the filter has no feasible point.
  CONNCBF_STATUS_INFEASIBLE = 6,
  CONNCBF_STATUS_PANIC = 7,
} ConncbfStatus;

// Trajectory log of a finished or aborted run.
typedef struct ConncbfLog ConncbfLog;

// Validated scenario.
typedef struct ConncbfScenario ConncbfScenario;

// Parameters of `conncbf_filter_velocity`.
typedef struct ConncbfFilterParams {
  // Communication radius R, meters.
  double comm_radius;
  // Connectivity threshold ε on λ₂.
  double epsilon;
  // Gain of the linear class-K function of the connectivity barrier.
  double phi;
  // Minimum pairwise distance, meters; used only when `safety` is true.
  double d_min;
  // Gain of the safety barriers.
  double gain_safety;
  // Add pairwise collision-avoidance rows to the filter.
  bool safety;
} ConncbfFilterParams;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string.
const char *conncbf_version(void);

// Description of the last failure on this thread, or NULL. The pointer is
// valid until the next library call on the same thread.
const char *conncbf_last_error_message(void);

// Loads and validates a scenario file.
//
// # Safety
// `path` must be a NUL-terminated string and `out` a valid pointer.
enum ConncbfStatus conncbf_scenario_from_file(const char *path, struct ConncbfScenario **out);

// Parses and validates scenario TOML held in memory.
//
// # Safety
// `text` must be a NUL-terminated string and `out` a valid pointer.
enum ConncbfStatus conncbf_scenario_from_toml(const char *text, struct ConncbfScenario **out);

// # Safety
// `scenario` must be NULL or a handle from this library not yet freed.
void conncbf_scenario_free(struct ConncbfScenario *scenario);

// Number of robots and of integration steps of a scenario.
//
// # Safety
// `scenario` must be a live handle; `robots` and `steps` valid pointers.
enum ConncbfStatus conncbf_scenario_size(const struct ConncbfScenario *scenario,
                                         size_t *robots,
                                         size_t *steps);

// Runs a scenario to its horizon.
//
// On `CONNCBF_STATUS_RUN_FAILED` the records up to the failing step are
// still returned through `out` and must be freed. On any other failure
// `*out` is NULL.
//
// # Safety
// `scenario` must be a live handle and `out` a valid pointer.
enum ConncbfStatus conncbf_run(const struct ConncbfScenario *scenario, struct ConncbfLog **out);

// # Safety
// `log` must be NULL or a handle from this library not yet freed.
void conncbf_log_free(struct ConncbfLog *log);

// Number of records (steps + 1 for a complete run).
//
// # Safety
// `log` must be a live handle and `len` a valid pointer.
enum ConncbfStatus conncbf_log_len(const struct ConncbfLog *log, size_t *len);

// Copies up to `capacity` values of λ₂, one per record, into `buffer`
// and stores the number copied in `written`.
//
// # Safety
// `buffer` must hold `capacity` doubles; the other pointers must be valid.
enum ConncbfStatus conncbf_log_lambda2(const struct ConncbfLog *log,
                                       double *buffer,
                                       size_t capacity,
                                       size_t *written);

// Copies the stacked positions of record `step` (robot-major, `N * n`
// values) into `buffer`, which must hold at least that many doubles.
//
// # Safety
// `buffer` must hold `capacity` doubles and `log` must be a live handle.
enum ConncbfStatus conncbf_log_positions(const struct ConncbfLog *log,
                                         size_t step,
                                         double *buffer,
                                         size_t capacity);

// Writes `metrics.csv`, `positions.csv`, `resolved_scenario.toml` and, for
// aborted runs, `error.txt` into `dir`, creating it if needed.
//
// # Safety
// `log` and `scenario` must be live handles; `dir` a NUL-terminated string.
enum ConncbfStatus conncbf_log_write_outputs(const struct ConncbfLog *log,
                                             const struct ConncbfScenario *scenario,
                                             const char *dir);

// λ₂ of the proximity graph of `robots` points in `dim` dimensions with
// the default edge-weight scale for `comm_radius`.
//
// # Safety
// `positions` must hold `robots * dim` doubles; `lambda2` must be valid.
enum ConncbfStatus conncbf_algebraic_connectivity(const double *positions,
                                                  size_t robots,
                                                  size_t dim,
                                                  double comm_radius,
                                                  double *lambda2);

// Filters one desired team velocity through the connectivity barrier
// (and, if enabled, pairwise safety barriers). `u_des` and `u_out` hold
// `robots * dim` doubles each and may not alias.
//
// # Safety
// All pointers must be valid for the stated lengths.
enum ConncbfStatus conncbf_filter_velocity(const double *positions,
                                           size_t robots,
                                           size_t dim,
                                           const double *u_des,
                                           const struct ConncbfFilterParams *params,
                                           double *u_out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CONNCBF_H */
