#ifndef DFL_H
#define DFL_H

#pragma once

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum DflStatus {
  DFL_STATUS_OK = 0,
  DFL_STATUS_NULL_POINTER = 1,
  DFL_STATUS_INVALID_ARGUMENT = 2,
  /**
   * Configuration rejected (bad JSON, unknown key, out-of-range value).
   */
  DFL_STATUS_VALIDATION = 3,
  /**
   * Inputs break an operation's preconditions.
   */
  DFL_STATUS_CONTRACT = 4,
  DFL_STATUS_RUNTIME = 5,
  DFL_STATUS_PANIC = 6,
} DflStatus;

/**
 * A generated network scenario.
 */
typedef struct DflScenario DflScenario;

/**
 * An allocation with its cost and solver trace.
 */
typedef struct DflSolution DflSolution;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failure on this thread, or an empty string. The
 * pointer stays valid until the next failing call on this thread.
 */
const char *dfl_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *dfl_version(void);

/**
 * Generate a scenario from a JSON scenario config (NULL or `{}` for the
 * defaults). On success `*out` owns a new handle.
 *
 * # Safety
 * `json` must be NULL or a valid C string; `out` must be writable.
 */
enum DflStatus dfl_scenario_from_json(const char *json, struct DflScenario **out);

/**
 * # Safety
 * `scenario` must be NULL or a handle from [`dfl_scenario_from_json`] not yet freed.
 */
void dfl_scenario_free(struct DflScenario *scenario);

/**
 * Write the number of cars, RSUs and resource blocks (any pointer may be NULL).
 *
 * # Safety
 * `scenario` must be a live handle; non-NULL outputs must be writable.
 */
enum DflStatus dfl_scenario_dims(const struct DflScenario *scenario,
                                 size_t *num_cars,
                                 size_t *num_rsus,
                                 size_t *num_rbs);

/**
 * Run the full solver from the default starting allocation.
 * `solver_json` may be NULL for the default solver config.
 *
 * # Safety
 * `scenario` must be a live handle, `solver_json` NULL or a C string, `out` writable.
 */
enum DflStatus dfl_solve(const struct DflScenario *scenario,
                         const char *solver_json,
                         struct DflSolution **out);

/**
 * Run a comparison scheme by name: `baseline_a`, `baseline_p`,
 * `baseline_r`, `equal_power` or `random`.
 *
 * # Safety
 * As [`dfl_solve`]; `kind` must be a C string.
 */
enum DflStatus dfl_run_baseline(const struct DflScenario *scenario,
                                const char *kind,
                                const char *solver_json,
                                uint64_t seed,
                                struct DflSolution **out);

/**
 * # Safety
 * `solution` must be NULL or a handle from a solve call not yet freed.
 */
void dfl_solution_free(struct DflSolution *solution);

/**
 * Final cost components (any pointer may be NULL).
 *
 * # Safety
 * `solution` must be a live handle; non-NULL outputs must be writable.
 */
enum DflStatus dfl_solution_cost(const struct DflSolution *solution,
                                 double *per_sum,
                                 double *latency_sum,
                                 double *total);

/**
 * Outer iterations used and whether the stopping test was met.
 *
 * # Safety
 * `solution` must be a live handle; non-NULL outputs must be writable.
 */
enum DflStatus dfl_solution_convergence(const struct DflSolution *solution,
                                        size_t *iterations_used,
                                        bool *converged);

/**
 * Copy the cost after each outer iteration (index 0 is the starting
 * point) into `costs`. `*len` holds the buffer capacity on entry and the
 * number of values on exit; a short buffer yields `InvalidArgument` with
 * `*len` set to the size needed.
 *
 * # Safety
 * `solution` must be a live handle; `costs` must hold `*len` doubles.
 */
enum DflStatus dfl_solution_objective(const struct DflSolution *solution,
                                      double *costs,
                                      size_t *len);

/**
 * Per-car RSU index, RB index (-1 when unassigned) and transmit power in
 * watts. Each non-NULL array must hold `len` entries, `len` being the
 * number of cars.
 *
 * # Safety
 * `solution` must be a live handle; non-NULL arrays must hold `len` elements.
 */
enum DflStatus dfl_solution_allocation(const struct DflSolution *solution,
                                       int64_t *rsu,
                                       int64_t *rb,
                                       double *power,
                                       size_t len);

/**
 * Evaluate the weighted cost of an arbitrary allocation given as per-car
 * RSU and RB indices (negative for none) and powers, with weights
 * `alpha` and `1 - alpha`. Feasibility is not checked.
 *
 * # Safety
 * `scenario` must be a live handle; the three arrays must hold `len`
 * elements; `total` must be writable.
 */
enum DflStatus dfl_global_cost(const struct DflScenario *scenario,
                               const int64_t *rsu,
                               const int64_t *rb,
                               const double *power,
                               size_t len,
                               double alpha,
                               double *total);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DFL_H */
