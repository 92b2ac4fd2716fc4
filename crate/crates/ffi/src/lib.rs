//! C ABI for the `noma-waterfill` solver.
//!
//! A problem is built incrementally behind an opaque `NwfProblem` handle,
//! solved into an opaque `NwfSolution`, and both are released with their
//! `_free` functions. Every fallible call returns an [`NwfStatus`]; the
//! message for the most recent failure on the calling thread is available
//! from [`nwf_last_error_message`].

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use noma_waterfill::allocator;
use noma_waterfill::model::{self, ClusterInstance, PowerSolution, ProblemInstance, UserChannel};
use noma_waterfill::{Error, SolverOptions};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NwfStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidInput = 2,
    /// The demands cannot be met under the power limits.
    Infeasible = 3,
    IndexOutOfRange = 4,
    /// A Rust panic was caught at the boundary.
    Internal = 5,
}

/// Problem under construction.
pub struct NwfProblem {
    p_max: f64,
    bandwidth: f64,
    clusters: Vec<ClusterInstance>,
    masks: Vec<f64>,
}

/// Optimal allocation of a solved problem.
pub struct NwfSolution {
    solution: PowerSolution,
    /// Users in ascending id order, cached for indexed access.
    user_ids: Vec<usize>,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: String) {
    let message = CString::new(message.replace('\0', " ")).expect("interior NULs removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(message));
}

fn fail(status: NwfStatus, message: impl Into<String>) -> NwfStatus {
    set_error(message.into());
    status
}

fn from_error(e: Error) -> NwfStatus {
    let status = match &e {
        Error::Infeasible(_) | Error::BudgetBelowMinimum { .. } => NwfStatus::Infeasible,
        Error::IndexOutOfRange { .. } => NwfStatus::IndexOutOfRange,
        _ => NwfStatus::InvalidInput,
    };
    fail(status, e.to_string())
}

fn out_of_range(what: &str, index: usize, len: usize) -> NwfStatus {
    fail(NwfStatus::IndexOutOfRange, format!("{what} index {index} out of range for {len} {what}s"))
}

/// Runs `f`, turning a panic into [`NwfStatus::Internal`].
fn guard(f: impl FnOnce() -> NwfStatus) -> NwfStatus {
    catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|_| fail(NwfStatus::Internal, "internal error"))
}

/// Message describing the last failed call on this thread, or NULL if none
/// has failed. The pointer stays valid until the next failing call on the
/// same thread.
#[no_mangle]
pub extern "C" fn nwf_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |m| m.as_ptr()))
}

/// Converts a power in dBm to watts.
#[no_mangle]
pub extern "C" fn nwf_dbm_to_watt(dbm: f64) -> f64 {
    model::dbm_to_watt(dbm)
}

/// Creates an empty problem with total power limit `p_max_watt` and per
/// subchannel bandwidth `bandwidth_hz`. Returns NULL if either is not
/// positive and finite.
#[no_mangle]
pub extern "C" fn nwf_problem_new(p_max_watt: f64, bandwidth_hz: f64) -> *mut NwfProblem {
    for (name, v) in [("p_max_watt", p_max_watt), ("bandwidth_hz", bandwidth_hz)] {
        if !(v.is_finite() && v > 0.0) {
            set_error(format!("{name} must be positive and finite, got {v}"));
            return ptr::null_mut();
        }
    }
    Box::into_raw(Box::new(NwfProblem {
        p_max: p_max_watt,
        bandwidth: bandwidth_hz,
        clusters: Vec::new(),
        masks: Vec::new(),
    }))
}

/// Releases a problem. NULL is ignored.
///
/// # Safety
/// `problem` must be NULL or a handle from [`nwf_problem_new`] that has not
/// been freed.
#[no_mangle]
pub unsafe extern "C" fn nwf_problem_free(problem: *mut NwfProblem) {
    if !problem.is_null() {
        drop(Box::from_raw(problem));
    }
}

/// Adds the users sharing one subchannel. The three arrays hold `len`
/// entries each: user ids, channel-to-noise ratios (1/W) and minimum rates
/// (bit/s). `p_mask_watt` caps the subchannel's total power.
///
/// # Safety
/// `problem` must be a live handle; each array must point to `len` readable
/// elements.
#[no_mangle]
pub unsafe extern "C" fn nwf_problem_add_cluster(
    problem: *mut NwfProblem,
    subchannel_id: usize,
    user_ids: *const usize,
    cnrs: *const f64,
    min_rates_bps: *const f64,
    len: usize,
    p_mask_watt: f64,
) -> NwfStatus {
    guard(|| {
        if problem.is_null() || user_ids.is_null() || cnrs.is_null() || min_rates_bps.is_null() {
            return fail(NwfStatus::NullPointer, "null pointer argument");
        }
        let problem = &mut *problem;
        let ids = slice::from_raw_parts(user_ids, len);
        let cnrs = slice::from_raw_parts(cnrs, len);
        let rates = slice::from_raw_parts(min_rates_bps, len);
        if !(p_mask_watt.is_finite() && p_mask_watt > 0.0) {
            return fail(
                NwfStatus::InvalidInput,
                format!("p_mask_watt must be positive and finite, got {p_mask_watt}"),
            );
        }
        let users: Result<Vec<_>, _> = (0..len).map(|i| UserChannel::new(ids[i], cnrs[i], rates[i])).collect();
        let cluster = match users.and_then(|u| ClusterInstance::new(subchannel_id, u, problem.bandwidth)) {
            Ok(c) => c,
            Err(e) => return from_error(e),
        };
        problem.clusters.push(cluster);
        problem.masks.push(p_mask_watt);
        NwfStatus::Ok
    })
}

/// Number of clusters added so far.
///
/// # Safety
/// `problem` must be NULL or a live handle; NULL yields 0.
#[no_mangle]
pub unsafe extern "C" fn nwf_problem_num_clusters(problem: *const NwfProblem) -> usize {
    problem.as_ref().map_or(0, |p| p.clusters.len())
}

/// Writes the smallest budget under which every user of cluster `index`
/// (in insertion order) meets its minimum rate.
///
/// # Safety
/// `problem` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn nwf_problem_q_min(problem: *const NwfProblem, index: usize, out: *mut f64) -> NwfStatus {
    guard(|| {
        let (Some(problem), false) = (problem.as_ref(), out.is_null()) else {
            return fail(NwfStatus::NullPointer, "null pointer argument");
        };
        match problem.clusters.get(index) {
            Some(c) => {
                *out = allocator::q_min(c);
                NwfStatus::Ok
            }
            None => out_of_range("cluster", index, problem.clusters.len()),
        }
    })
}

/// Solves the problem. `eps` is the relative tolerance on the total power
/// and `max_iter` the bisection limit; pass 0 for either to use the
/// defaults. On success `*out` receives a new solution handle.
///
/// # Safety
/// `problem` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn nwf_solve(
    problem: *const NwfProblem,
    eps: f64,
    max_iter: usize,
    out: *mut *mut NwfSolution,
) -> NwfStatus {
    guard(|| {
        let (Some(problem), false) = (problem.as_ref(), out.is_null()) else {
            return fail(NwfStatus::NullPointer, "null pointer argument");
        };
        *out = ptr::null_mut();
        let defaults = SolverOptions::default();
        let options = SolverOptions {
            eps: if eps == 0.0 { defaults.eps } else { eps },
            max_iter: if max_iter == 0 { defaults.max_iter } else { max_iter },
        };
        let solved = ProblemInstance::new(problem.clusters.clone(), problem.p_max, problem.masks.clone())
            .and_then(|instance| allocator::solve(&instance, options));
        match solved {
            Ok(solution) => {
                let user_ids = solution.powers.keys().copied().collect();
                *out = Box::into_raw(Box::new(NwfSolution { solution, user_ids }));
                NwfStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// Releases a solution. NULL is ignored.
///
/// # Safety
/// `solution` must be NULL or a handle from [`nwf_solve`] that has not been
/// freed.
#[no_mangle]
pub unsafe extern "C" fn nwf_solution_free(solution: *mut NwfSolution) {
    if !solution.is_null() {
        drop(Box::from_raw(solution));
    }
}

/// Number of users in the solution.
///
/// # Safety
/// `solution` must be NULL or a live handle; NULL yields 0.
#[no_mangle]
pub unsafe extern "C" fn nwf_solution_num_users(solution: *const NwfSolution) -> usize {
    solution.as_ref().map_or(0, |s| s.user_ids.len())
}

/// Writes the id, power (W) and rate (bit/s) of the `index`-th user in
/// ascending id order. Any output pointer may be NULL to skip it.
///
/// # Safety
/// `solution` must be a live handle; non-NULL outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn nwf_solution_user(
    solution: *const NwfSolution,
    index: usize,
    user_id: *mut usize,
    power_watt: *mut f64,
    rate_bps: *mut f64,
) -> NwfStatus {
    guard(|| {
        let Some(s) = solution.as_ref() else {
            return fail(NwfStatus::NullPointer, "null solution");
        };
        let Some(&id) = s.user_ids.get(index) else {
            return out_of_range("user", index, s.user_ids.len());
        };
        if let Some(o) = user_id.as_mut() {
            *o = id;
        }
        if let Some(o) = power_watt.as_mut() {
            *o = s.solution.powers[&id];
        }
        if let Some(o) = rate_bps.as_mut() {
            *o = s.solution.rates[&id];
        }
        NwfStatus::Ok
    })
}

/// Writes the budget (W) of cluster `index`, in insertion order.
///
/// # Safety
/// `solution` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn nwf_solution_cluster_budget(
    solution: *const NwfSolution,
    index: usize,
    out: *mut f64,
) -> NwfStatus {
    guard(|| {
        let (Some(s), false) = (solution.as_ref(), out.is_null()) else {
            return fail(NwfStatus::NullPointer, "null pointer argument");
        };
        match s.solution.cluster_budgets.get(index) {
            Some(&b) => {
                *out = b;
                NwfStatus::Ok
            }
            None => out_of_range("cluster", index, s.solution.cluster_budgets.len()),
        }
    })
}

/// Total achieved rate in bit/s; NaN for NULL.
///
/// # Safety
/// `solution` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn nwf_solution_sum_rate(solution: *const NwfSolution) -> f64 {
    solution.as_ref().map_or(f64::NAN, |s| s.solution.sum_rate())
}

/// Total allocated power in watts; NaN for NULL.
///
/// # Safety
/// `solution` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn nwf_solution_total_power(solution: *const NwfSolution) -> f64 {
    solution.as_ref().map_or(f64::NAN, |s| s.solution.total_power())
}

/// Dual variable of the total power limit; zero when the limit is slack.
///
/// # Safety
/// `solution` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn nwf_solution_dual(solution: *const NwfSolution) -> f64 {
    solution.as_ref().map_or(f64::NAN, |s| s.solution.dual_nu)
}

/// Whether the bisection met its tolerance; false for NULL.
///
/// # Safety
/// `solution` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn nwf_solution_converged(solution: *const NwfSolution) -> bool {
    solution.as_ref().is_some_and(|s| s.solution.converged)
}
