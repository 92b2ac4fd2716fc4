#ifndef NOMA_WATERFILL_H
#define NOMA_WATERFILL_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum NwfStatus {
  NWF_STATUS_OK = 0,
  NWF_STATUS_NULL_POINTER = 1,
  NWF_STATUS_INVALID_INPUT = 2,
  /**
   * The demands cannot be met under the power limits.
   */
  NWF_STATUS_INFEASIBLE = 3,
  NWF_STATUS_INDEX_OUT_OF_RANGE = 4,
  /**
   * A Rust panic was caught at the boundary.
   */
  NWF_STATUS_INTERNAL = 5,
} NwfStatus;

/**
 * Problem under construction.
 */
typedef struct NwfProblem NwfProblem;

/**
 * Optimal allocation of a solved problem.
 */
typedef struct NwfSolution NwfSolution;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message describing the last failed call on this thread, or NULL if none
 * has failed. The pointer stays valid until the next failing call on the
 * same thread.
 */
const char *nwf_last_error_message(void);

/**
 * Converts a power in dBm to watts.
 */
double nwf_dbm_to_watt(double dbm);

/**
 * Creates an empty problem with total power limit `p_max_watt` and per
 * subchannel bandwidth `bandwidth_hz`. Returns NULL if either is not
 * positive and finite.
 */
struct NwfProblem *nwf_problem_new(double p_max_watt, double bandwidth_hz);

/**
 * Releases a problem. NULL is ignored.
 *
 * # Safety
 * `problem` must be NULL or a handle from [`nwf_problem_new`] that has not
 * been freed.
 */
void nwf_problem_free(struct NwfProblem *problem);

/**
 * Adds the users sharing one subchannel. The three arrays hold `len`
 * entries each: user ids, channel-to-noise ratios (1/W) and minimum rates
 * (bit/s). `p_mask_watt` caps the subchannel's total power.
 *
 * # Safety
 * `problem` must be a live handle; each array must point to `len` readable
 * elements.
 */
enum NwfStatus nwf_problem_add_cluster(struct NwfProblem *problem,
                                       size_t subchannel_id,
                                       const size_t *user_ids,
                                       const double *cnrs,
                                       const double *min_rates_bps,
                                       size_t len,
                                       double p_mask_watt);

/**
 * Number of clusters added so far.
 *
 * # Safety
 * `problem` must be NULL or a live handle; NULL yields 0.
 */
size_t nwf_problem_num_clusters(const struct NwfProblem *problem);

/**
 * Writes the smallest budget under which every user of cluster `index`
 * (in insertion order) meets its minimum rate.
 *
 * # Safety
 * `problem` must be a live handle and `out` writable.
 */
enum NwfStatus nwf_problem_q_min(const struct NwfProblem *problem, size_t index, double *out);

/**
 * Solves the problem. `eps` is the relative tolerance on the total power
 * and `max_iter` the bisection limit; pass 0 for either to use the
 * defaults. On success `*out` receives a new solution handle.
 *
 * # Safety
 * `problem` must be a live handle and `out` writable.
 */
enum NwfStatus nwf_solve(const struct NwfProblem *problem,
                         double eps,
                         size_t max_iter,
                         struct NwfSolution **out);

/**
 * Releases a solution. NULL is ignored.
 *
 * # Safety
 * `solution` must be NULL or a handle from [`nwf_solve`] that has not been
 * freed.
 */
void nwf_solution_free(struct NwfSolution *solution);

/**
 * Number of users in the solution.
 *
 * # Safety
 * `solution` must be NULL or a live handle; NULL yields 0.
 */
size_t nwf_solution_num_users(const struct NwfSolution *solution);

/**
 * Writes the id, power (W) and rate (bit/s) of the `index`-th user in
 * ascending id order. Any output pointer may be NULL to skip it.
 *
 * # Safety
 * `solution` must be a live handle; non-NULL outputs must be writable.
 */
enum NwfStatus nwf_solution_user(const struct NwfSolution *solution,
                                 size_t index,
                                 size_t *user_id,
                                 double *power_watt,
                                 double *rate_bps);

/**
 * Writes the budget (W) of cluster `index`, in insertion order.
 *
 * # Safety
 * `solution` must be a live handle and `out` writable.
 */
enum NwfStatus nwf_solution_cluster_budget(const struct NwfSolution *solution,
                                           size_t index,
                                           double *out);

/**
 * Total achieved rate in bit/s; NaN for NULL.
 *
 * # Safety
 * `solution` must be NULL or a live handle.
 */
double nwf_solution_sum_rate(const struct NwfSolution *solution);

/**
 * Total allocated power in watts; NaN for NULL.
 *
 * # Safety
 * `solution` must be NULL or a live handle.
 */
double nwf_solution_total_power(const struct NwfSolution *solution);

/**
 * Dual variable of the total power limit; zero when the limit is slack.
 *
 * # Safety
 * `solution` must be NULL or a live handle.
 */
double nwf_solution_dual(const struct NwfSolution *solution);

/**
 * Whether the bisection met its tolerance; false for NULL.
 *
 * # Safety
 * `solution` must be NULL or a live handle.
 */
bool nwf_solution_converged(const struct NwfSolution *solution);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* NOMA_WATERFILL_H */
