//! Slow, independent reference methods for checking the allocator.
//!
//! Nothing here uses the allocator's closed forms. Rates come from
//! [`crate::model`] and every other quantity is found by scalar bisection,
//! exhaustive grids or an exact breakpoint scan.

use std::f64::consts::LN_2;

use rand::Rng;
use serde::Serialize;

use crate::allocator::{self, SolverOptions, VirtualUser};
use crate::error::{Error, Result};
use crate::model::{self, ClusterInstance, ProblemInstance, UserChannel};

/// Worst-case disagreement between two methods over a corpus.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct OracleReport {
    pub max_abs_gap: f64,
    pub max_rel_gap: f64,
    /// JSON of the instance with the largest relative gap.
    pub argmax_case: String,
}

impl OracleReport {
    pub fn record(&mut self, abs_gap: f64, rel_gap: f64, case: impl FnOnce() -> String) {
        let abs_gap = abs_gap.abs();
        let rel_gap = rel_gap.abs();
        if abs_gap > self.max_abs_gap {
            self.max_abs_gap = abs_gap;
        }
        if rel_gap > self.max_rel_gap || (self.argmax_case.is_empty() && rel_gap >= self.max_rel_gap) {
            self.max_rel_gap = rel_gap;
            self.argmax_case = case();
        }
    }
}

/// Finds the smallest `p` in `[0, inf)` with `f(p) >= target`, for `f`
/// nondecreasing.
fn bisect_up(target: f64, f: impl Fn(f64) -> f64, start: f64) -> f64 {
    if target <= 0.0 {
        return 0.0;
    }
    let mut hi = start.max(f64::MIN_POSITIVE);
    while f(hi) < target {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    for _ in 0..2000 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

/// Minimum cluster budget found by solving each member's rate equation with
/// scalar bisection, strongest member first.
pub fn qmin_by_bisection(cluster: &ClusterInstance) -> f64 {
    let n = cluster.len();
    let mut powers = vec![0.0; n];
    for k in (0..n).rev() {
        let target = cluster.users()[k].min_rate;
        let start = 1.0 / cluster.users()[k].cnr;
        let p = bisect_up(
            target,
            |p| {
                let mut trial = powers.clone();
                trial[k] = p;
                model::rate(cluster, &trial, k).expect("index in range")
            },
            start,
        );
        powers[k] = p;
    }
    powers.iter().sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridSearch {
    /// Best split found, decoding order.
    pub powers: Vec<f64>,
    pub sum_rate: f64,
    /// Grid points accepted as feasible.
    pub feasible_points: usize,
    /// Upper bound on how much the sum-rate can change over one grid step.
    pub resolution: f64,
}

/// Exhaustive search over power splits of `q` on a uniform grid.
///
/// A grid point is accepted when each member misses its demand by no more than
/// one grid step could account for, so the feasible set never vanishes
/// between grid points when it shrinks to a single split.
pub fn grid_search_intra(cluster: &ClusterInstance, q: f64, grid_points: usize) -> Result<GridSearch> {
    let n = cluster.len();
    if n > 3 {
        return Err(Error::ClusterTooLarge(n));
    }
    if grid_points == 0 || !(q.is_finite() && q >= 0.0) {
        return Err(Error::InvalidInput("grid needs at least one point and q >= 0".into()));
    }
    let w = cluster.bandwidth();
    let step = q / grid_points as f64;
    let users = cluster.users();
    // Sum-rate moves by at most 2 W h step / ln2 per member over one step.
    let resolution: f64 = users.iter().map(|u| 2.0 * w * u.cnr * step / LN_2).sum();

    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut feasible_points = 0;
    let mut consider = |powers: Vec<f64>| {
        let rates = model::member_rates(cluster, &powers).expect("sized");
        let ok = (0..n).all(|k| {
            if rates[k] >= users[k].min_rate {
                return true;
            }
            // Accept a shortfall that one grid step towards member k would
            // close: move `step` from the largest other power to k.
            let donor = (0..n).filter(|&j| j != k).max_by(|&a, &b| powers[a].total_cmp(&powers[b]));
            let Some(donor) = donor else { return false };
            let mut moved = powers.clone();
            let shift = step.min(moved[donor]);
            moved[donor] -= shift;
            moved[k] += shift;
            let reach = model::rate(cluster, &moved, k).expect("sized");
            reach >= users[k].min_rate
        });
        if ok {
            feasible_points += 1;
            let total: f64 = rates.iter().sum();
            if best.as_ref().is_none_or(|(b, _)| total > *b) {
                best = Some((total, powers));
            }
        }
    };
    match n {
        1 => consider(vec![q]),
        2 => {
            for i in 0..=grid_points {
                let weak = step * i as f64;
                consider(vec![weak, (q - weak).max(0.0)]);
            }
        }
        _ => {
            for i in 0..=grid_points {
                for j in 0..=(grid_points - i) {
                    let a = step * i as f64;
                    let b = step * j as f64;
                    consider(vec![a, b, (q - a - b).max(0.0)]);
                }
            }
        }
    }
    let (sum_rate, powers) =
        best.ok_or_else(|| Error::InvalidInput(format!("no grid point meets the demands at q = {q}")))?;
    Ok(GridSearch { powers, sum_rate, feasible_points, resolution })
}

fn box_fill(users: &[VirtualUser], level: f64) -> f64 {
    users.iter().map(|u| (level - 1.0 / u.h_eff).clamp(u.q_min_shifted, u.p_mask_shifted)).sum()
}

/// Exact box-constrained water-filling over shifted budgets.
///
/// The total fill is piecewise linear in the water level with kinks where a
/// user leaves its lower or reaches its upper bound. Scanning the sorted kinks
/// brackets the level; it is then solved on that linear piece.
pub fn breakpoint_waterfill(users: &[VirtualUser], p_max_shifted: f64) -> Result<Vec<f64>> {
    if users.is_empty() {
        return Err(Error::InvalidInput("no virtual users".into()));
    }
    if users.iter().any(|u| u.q_min_shifted > u.p_mask_shifted) {
        return Err(Error::InvalidInput("a virtual user's box is empty".into()));
    }
    let hi_sum: f64 = users.iter().map(|u| u.p_mask_shifted).sum();
    if hi_sum <= p_max_shifted {
        return Ok(users.iter().map(|u| u.p_mask_shifted).collect());
    }
    let lo_sum: f64 = users.iter().map(|u| u.q_min_shifted).sum();
    if lo_sum > p_max_shifted * (1.0 + 1e-12) {
        return Err(Error::InvalidInput(format!("minimum shifted budgets {lo_sum} exceed {p_max_shifted}")));
    }
    if lo_sum >= p_max_shifted {
        return Ok(users.iter().map(|u| u.q_min_shifted).collect());
    }

    let mut kinks: Vec<f64> =
        users.iter().flat_map(|u| [u.q_min_shifted + 1.0 / u.h_eff, u.p_mask_shifted + 1.0 / u.h_eff]).collect();
    kinks.sort_by(f64::total_cmp);
    kinks.dedup();

    let mut level = *kinks.last().expect("nonempty");
    for pair in kinks.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        let fill_b = box_fill(users, b);
        if fill_b >= p_max_shifted {
            let fill_a = box_fill(users, a);
            let slope = users
                .iter()
                .filter(|u| u.q_min_shifted + 1.0 / u.h_eff <= a && u.p_mask_shifted + 1.0 / u.h_eff >= b)
                .count();
            level = if slope == 0 { b } else { a + (p_max_shifted - fill_a) / slope as f64 };
            break;
        }
    }
    Ok(users.iter().map(|u| (level - 1.0 / u.h_eff).clamp(u.q_min_shifted, u.p_mask_shifted)).collect())
}

/// Sum of virtual-user rates at shifted budgets.
pub fn virtual_objective(users: &[VirtualUser], shifted: &[f64]) -> f64 {
    users.iter().zip(shifted).map(|(u, &q)| u.rate(q)).sum()
}

/// A cluster with `size` users: CNRs log-uniform over `[1, 10^decades]` and
/// spectral-efficiency demands uniform in `[0, max_r]`.
pub fn random_cluster<R: Rng + ?Sized>(
    rng: &mut R,
    subchannel_id: usize,
    first_user_id: usize,
    size: usize,
    bandwidth: f64,
    decades: f64,
    max_r: f64,
) -> ClusterInstance {
    let users = (0..size)
        .map(|i| {
            let h = 10f64.powf(rng.gen_range(0.0..=decades));
            let r = rng.gen_range(0.0..=max_r);
            UserChannel::new(first_user_id + i, h, r * bandwidth).expect("valid draw")
        })
        .collect();
    ClusterInstance::new(subchannel_id, users, bandwidth).expect("valid cluster")
}

/// A feasible multi-cluster instance with up to `max_clusters` clusters of up
/// to `max_size` users. Masks and the cellular budget are drawn above the
/// minimum budgets so that any mix of binding and slack bounds occurs.
pub fn random_feasible_instance<R: Rng + ?Sized>(
    rng: &mut R,
    max_clusters: usize,
    max_size: usize,
    decades: f64,
    max_r: f64,
) -> ProblemInstance {
    let bandwidth = 1e6;
    let n = rng.gen_range(1..=max_clusters);
    let mut next_id = 0;
    let clusters: Vec<ClusterInstance> = (0..n)
        .map(|s| {
            let size = rng.gen_range(1..=max_size);
            let c = random_cluster(rng, s, next_id, size, bandwidth, decades, max_r);
            next_id += size;
            c
        })
        .collect();
    let q_min: Vec<f64> = clusters.iter().map(qmin_by_bisection).collect();
    let total: f64 = q_min.iter().sum();
    // Headroom on the order of the largest minimum budget keeps every
    // cluster in play.
    let spread = q_min.iter().cloned().fold(0.0, f64::max).max(total / n as f64);
    let p_max = total + spread * rng.gen_range(0.05..=4.0);
    let masks = q_min
        .iter()
        .map(|&q| if rng.gen_bool(0.4) { q * (1.0 + 1e-9) + spread * rng.gen_range(0.0..=1.5) } else { p_max })
        .collect();
    ProblemInstance::new(clusters, p_max, masks).expect("valid instance")
}

/// Agreement of the allocator with the oracles over a random corpus.
#[derive(Debug, Clone, Default, Serialize)]
pub struct AgreementReport {
    pub instances: usize,
    /// allocator q_min vs bisection, relative.
    pub q_min: OracleReport,
    /// Per-cluster budget gap; relative column is normalised by `P_max`.
    pub budgets: OracleReport,
    /// Virtual sum-rate gap, relative.
    pub objective: OracleReport,
    /// Largest `|sum shifted - P~max| / P~max` over instances where the
    /// cellular constraint binds.
    pub max_residual: f64,
    /// Instances where every cluster sits at its mask below `P_max`.
    pub slack_instances: usize,
    pub max_iterations: usize,
    pub nonconverged: usize,
    /// Largest relative gap between a free virtual user's marginal rate and
    /// the dual `nu`.
    pub max_kkt_gap: f64,
    /// Clamped virtual users not sitting exactly on their box edge.
    pub box_edge_violations: usize,
}

/// Runs the bisection water-filler and the breakpoint oracle side by side on
/// `count` random feasible instances.
pub fn agreement_suite<R: Rng + ?Sized>(rng: &mut R, count: usize, options: SolverOptions) -> Result<AgreementReport> {
    let mut report = AgreementReport { instances: count, ..Default::default() };
    for _ in 0..count {
        let instance = random_feasible_instance(rng, 8, 6, 6.0, 4.0);
        let case = || serde_json::to_string(&instance).unwrap_or_default();
        for cluster in instance.clusters() {
            let closed = allocator::q_min(cluster);
            let oracle = qmin_by_bisection(cluster);
            let rel = if oracle > 0.0 { (closed - oracle) / oracle } else { closed };
            report.q_min.record(closed - oracle, rel, case);
        }
        let users: Vec<VirtualUser> = instance
            .clusters()
            .iter()
            .zip(instance.p_mask())
            .map(|(c, &m)| allocator::intra_cluster_constants(c, m).virtual_user)
            .collect();
        let wf = allocator::waterfill(&users, instance.p_max(), options)?;
        let exact = breakpoint_waterfill(&users, wf.p_max_shifted)?;
        if wf.cellular_binding {
            report.max_residual = report.max_residual.max(wf.residual);
        } else {
            report.slack_instances += 1;
        }
        report.max_iterations = report.max_iterations.max(wf.iterations);
        if !wf.converged {
            report.nonconverged += 1;
        }
        for ((u, &q), state) in users.iter().zip(&wf.shifted).zip(&wf.states) {
            match state {
                allocator::BoxState::Free => {
                    let gap = (u.marginal(q) - wf.nu).abs() / wf.nu;
                    report.max_kkt_gap = report.max_kkt_gap.max(gap);
                }
                allocator::BoxState::Lower if q != u.q_min_shifted => report.box_edge_violations += 1,
                allocator::BoxState::Upper if q != u.p_mask_shifted => report.box_edge_violations += 1,
                _ => {}
            }
        }
        for (a, b) in wf.shifted.iter().zip(&exact) {
            report.budgets.record(a - b, (a - b) / instance.p_max(), case);
        }
        let ours = virtual_objective(&users, &wf.shifted);
        let theirs = virtual_objective(&users, &exact);
        let scale = theirs.abs().max(f64::MIN_POSITIVE);
        report.objective.record(ours - theirs, (ours - theirs) / scale, case);
    }
    Ok(report)
}
