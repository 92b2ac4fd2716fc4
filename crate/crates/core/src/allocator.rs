//! Globally optimal sum-rate power allocation for a fixed user grouping.
//!
//! The solve runs in four stages:
//!
//! 1. **Feasibility.** Each cluster needs at least `Q_min` Watt so that every
//!    member exactly meets its minimum rate. The instance is feasible iff every
//!    `Q_min` fits under its subchannel mask and their sum fits under `P_max`.
//! 2. **Intra-cluster closed form.** For any budget `q` above `Q_min`, only the
//!    cluster head receives more than it needs; every weaker member's power is
//!    an affine function of `q` that keeps its rate tight at the demand. The head
//!    gets `alpha * q - c`.
//! 3. **Virtual OMA reduction.** Substituting the closed form turns each cluster
//!    into one virtual OMA user with effective gain `H = alpha * h_head` and a
//!    box `[Q_min - c/alpha, P_mask - c/alpha]` on its shifted budget.
//! 4. **Water-filling.** The shifted budgets are found by bisection on the dual
//!    variable of the cellular power constraint.

use std::collections::BTreeMap;
use std::f64::consts::LN_2;
use std::fmt;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{self, ClusterInstance, PowerSolution, ProblemInstance};

/// Tolerance used when checking a budget against `Q_min` and rates against
/// demands.
pub const RATE_TOLERANCE: f64 = 1e-9;

/// The two forms of a member's minimum spectral efficiency `r = R_min / W_s`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateFraction {
    pub r: f64,
    /// `2^r - 1`: the SINR the member needs.
    pub beta_pm: f64,
    /// `(2^r - 1) / 2^r`: the share of the remaining power the member takes.
    pub beta_sr: f64,
    /// `1 - beta_sr = 2^-r`, kept separately to avoid cancellation when `r` is
    /// large.
    pub one_minus_beta_sr: f64,
}

impl RateFraction {
    pub fn new(r: f64) -> Self {
        let beta_pm = (r * LN_2).exp_m1();
        let beta_sr = -(-r * LN_2).exp_m1();
        Self { r, beta_pm, beta_sr, one_minus_beta_sr: (-r).exp2() }
    }

    pub fn of(cluster: &ClusterInstance, index: usize) -> Self {
        Self::new(cluster.rate_fraction(index))
    }
}

/// A cluster reduced to a single OMA user.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VirtualUser {
    /// Fraction of each extra Watt of cluster budget that reaches the head.
    pub alpha: f64,
    /// Power offset in the head's affine law `p_head = alpha * q - c`, Watt.
    pub c: f64,
    /// Effective gain `alpha * h_head`, 1/Watt.
    pub h_eff: f64,
    pub q_min: f64,
    pub q_min_shifted: f64,
    pub p_mask_shifted: f64,
    /// Subchannel bandwidth, Hz.
    pub bandwidth: f64,
}

impl VirtualUser {
    /// Shift `c / alpha` between real and virtual budgets.
    pub fn offset(&self) -> f64 {
        self.c / self.alpha
    }

    /// Rate of the virtual user (the head's rate) at shifted budget `q_shifted`.
    pub fn rate(&self, q_shifted: f64) -> f64 {
        self.bandwidth * (q_shifted * self.h_eff).ln_1p() / LN_2
    }

    /// Derivative of [`VirtualUser::rate`].
    pub fn marginal(&self, q_shifted: f64) -> f64 {
        self.bandwidth * self.h_eff / (LN_2 * (1.0 + q_shifted * self.h_eff))
    }
}

/// Affine intra-cluster allocation law of one cluster.
#[derive(Debug, Clone, PartialEq)]
pub struct IntraClusterConstants {
    /// Per non-head member, in decoding order: `p_k = slope_k * q + intercept_k`.
    pub slopes: Vec<f64>,
    pub intercepts: Vec<f64>,
    /// Member powers at `q = Q_min`, all demands tight.
    pub min_powers: Vec<f64>,
    pub virtual_user: VirtualUser,
}

/// Which bound of a cluster was violated.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "violated_bound", rename_all = "snake_case")]
pub enum Infeasibility {
    /// A cluster's minimum budget exceeds its subchannel mask.
    Mask { cluster_index: usize, subchannel_id: usize, q_min_watt: f64, p_mask_watt: f64 },
    /// The minimum budgets together exceed the cellular power.
    Cellular { total_q_min_watt: f64, p_max_watt: f64 },
}

impl fmt::Display for Infeasibility {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Infeasibility::Mask { subchannel_id, q_min_watt, p_mask_watt, .. } => {
                write!(f, "subchannel {subchannel_id} needs {q_min_watt:e} W but its mask is {p_mask_watt:e} W")
            }
            Infeasibility::Cellular { total_q_min_watt, p_max_watt } => {
                write!(f, "clusters need {total_q_min_watt:e} W in total but the cellular budget is {p_max_watt:e} W")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Feasibility {
    Feasible { q_min: Vec<f64> },
    Infeasible(Infeasibility),
}

impl Feasibility {
    pub fn is_feasible(&self) -> bool {
        matches!(self, Feasibility::Feasible { .. })
    }
}

/// Component-wise minimum powers: every member's rate is exactly its demand.
///
/// Computed from the head downward; each member needs
/// `beta_pm * (stronger power + 1/h)`.
pub fn min_powers(cluster: &ClusterInstance) -> Vec<f64> {
    let users = cluster.users();
    let mut powers = vec![0.0; users.len()];
    let mut stronger = 0.0;
    for k in (0..users.len()).rev() {
        let beta = RateFraction::of(cluster, k).beta_pm;
        let p = beta * (stronger + 1.0 / users[k].cnr);
        powers[k] = p;
        stronger += p;
    }
    powers
}

/// Smallest cluster budget under which every member meets its demand.
pub fn q_min(cluster: &ClusterInstance) -> f64 {
    min_powers(cluster).iter().sum()
}

pub fn feasibility(instance: &ProblemInstance) -> Feasibility {
    let q_min: Vec<f64> = instance.clusters().iter().map(q_min).collect();
    for (n, (&q, &mask)) in q_min.iter().zip(instance.p_mask()).enumerate() {
        if q > mask {
            return Feasibility::Infeasible(Infeasibility::Mask {
                cluster_index: n,
                subchannel_id: instance.clusters()[n].subchannel_id(),
                q_min_watt: q,
                p_mask_watt: mask,
            });
        }
    }
    let total: f64 = q_min.iter().sum();
    if total > instance.p_max() {
        return Feasibility::Infeasible(Infeasibility::Cellular {
            total_q_min_watt: total,
            p_max_watt: instance.p_max(),
        });
    }
    Feasibility::Feasible { q_min }
}

/// Closed-form intra-cluster constants and the virtual user of `cluster` under
/// subchannel mask `p_mask`.
///
/// Member `k` (not the head) gets
/// `beta_sr_k * prod_{j weaker}(1 - beta_sr_j) * q + c_k` with
/// `c_k = beta_sr_k * (1/h_k - sum_{j weaker} prod_{j<l<k}(1 - beta_sr_l) beta_sr_j / h_j)`.
pub fn intra_cluster_constants(cluster: &ClusterInstance, p_mask: f64) -> IntraClusterConstants {
    let users = cluster.users();
    let head = cluster.head_index();
    let mut slopes = Vec::with_capacity(head);
    let mut intercepts = Vec::with_capacity(head);
    // Running product of (1 - beta_sr) over weaker members, and the running sum
    // subtracted inside c_k. The sum only accumulates positive terms.
    let mut weaker_product = 1.0;
    let mut weaker_sum = 0.0;
    for (k, user) in users[..head].iter().enumerate() {
        let f = RateFraction::of(cluster, k);
        slopes.push(f.beta_sr * weaker_product);
        intercepts.push(f.beta_sr * (1.0 / user.cnr - weaker_sum));
        weaker_product *= f.one_minus_beta_sr;
        weaker_sum = weaker_sum * f.one_minus_beta_sr + f.beta_sr / user.cnr;
    }
    let alpha = weaker_product;
    let c = weaker_sum;
    let min_powers = min_powers(cluster);
    let h_head = users[head].cnr;
    let h_eff = alpha * h_head;
    let head_beta = RateFraction::of(cluster, head).beta_pm;
    let virtual_user = VirtualUser {
        alpha,
        c,
        h_eff,
        q_min: min_powers.iter().sum(),
        // Equal to Q_min - c/alpha; evaluated directly to avoid cancellation.
        q_min_shifted: head_beta / h_eff,
        p_mask_shifted: p_mask - c / alpha,
        bandwidth: cluster.bandwidth(),
    };
    IntraClusterConstants { slopes, intercepts, min_powers, virtual_user }
}

fn check_budget(cluster: &ClusterInstance, q: f64) -> Result<f64> {
    let q_min = q_min(cluster);
    if !(q.is_finite() && q >= q_min - RATE_TOLERANCE * q_min) {
        return Err(Error::BudgetBelowMinimum { budget: q, q_min });
    }
    Ok(q_min)
}

/// Member powers at budget `Q_min + excess`. Each power is its tight minimum
/// plus its slope times the excess, which stays accurate when `q` is close to
/// `Q_min` (the `slope * q + intercept` form cancels badly there).
fn allocate_excess(constants: &IntraClusterConstants, excess: f64) -> Vec<f64> {
    let excess = excess.max(0.0);
    let alpha = constants.virtual_user.alpha;
    constants
        .min_powers
        .iter()
        .zip(constants.slopes.iter().chain(std::iter::once(&alpha)))
        .map(|(p, s)| p + s * excess)
        .collect()
}

/// Optimal member powers (decoding order) for cluster budget `q`.
pub fn intra_cluster_allocate(cluster: &ClusterInstance, q: f64) -> Result<Vec<f64>> {
    check_budget(cluster, q)?;
    let constants = intra_cluster_constants(cluster, f64::INFINITY);
    Ok(allocate_excess(&constants, q - constants.virtual_user.q_min))
}

/// Cluster sum-rate at budget `q` in closed form: the non-head members sit at
/// their demands and the head gets `alpha * q - c`.
pub fn cluster_rate_at_budget(cluster: &ClusterInstance, q: f64) -> Result<f64> {
    check_budget(cluster, q)?;
    let constants = intra_cluster_constants(cluster, f64::INFINITY);
    let vu = constants.virtual_user;
    let head = cluster.head_index();
    let demands: f64 = cluster.users()[..head].iter().map(|u| u.min_rate).sum();
    // alpha * q - c, anchored at the head's tight power.
    let head_power = constants.min_powers[head] + vu.alpha * (q - vu.q_min).max(0.0);
    Ok(demands + cluster.bandwidth() * (head_power * cluster.head().cnr).ln_1p() / LN_2)
}

/// Bisection parameters of the water-filling step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Relative tolerance on the cellular power residual.
    pub eps: f64,
    pub max_iter: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { eps: 1e-10, max_iter: 200 }
    }
}

/// Where a virtual user ended up relative to its box.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BoxState {
    Lower,
    Free,
    Upper,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WaterfillOutput {
    /// Real cluster budgets `q_n`.
    pub budgets: Vec<f64>,
    /// Shifted budgets `q_n - c_n/alpha_n`.
    pub shifted: Vec<f64>,
    pub states: Vec<BoxState>,
    /// Dual of the cellular constraint; zero when it does not bind.
    pub nu: f64,
    /// Shifted cellular budget `P_max - sum c_n/alpha_n`.
    pub p_max_shifted: f64,
    /// `|sum shifted - p_max_shifted| / p_max_shifted`. Only meaningful when
    /// `cellular_binding`; otherwise the masks leave the budget partly unused.
    pub residual: f64,
    /// False when every cluster sits at its mask with power to spare.
    pub cellular_binding: bool,
    pub iterations: usize,
    pub converged: bool,
}

fn level_fill(users: &[VirtualUser], level: f64) -> impl Iterator<Item = f64> + '_ {
    users.iter().map(move |u| (level - 1.0 / u.h_eff).min(u.p_mask_shifted).max(u.q_min_shifted))
}

/// Water-filling over virtual users by bisection on the dual `nu`.
///
/// Each shifted budget is `clamp(W_s/(ln2 nu) - 1/H_n, lo_n, hi_n)`; `nu` is
/// bisected until the shifted budgets exhaust `P_max - sum c_n/alpha_n`. When
/// all masks fit under the cellular budget the masks are returned directly.
pub fn waterfill(users: &[VirtualUser], p_max: f64, options: SolverOptions) -> Result<WaterfillOutput> {
    if users.is_empty() {
        return Err(Error::InvalidInput("no virtual users".into()));
    }
    if !(options.eps.is_finite() && options.eps > 0.0) {
        return Err(Error::InvalidInput(format!("eps must be positive, got {}", options.eps)));
    }
    for (n, u) in users.iter().enumerate() {
        if u.q_min > u.p_mask_shifted + u.offset() {
            return Err(Error::Infeasible(Infeasibility::Mask {
                cluster_index: n,
                subchannel_id: n,
                q_min_watt: u.q_min,
                p_mask_watt: u.p_mask_shifted + u.offset(),
            }));
        }
    }
    let total_q_min: f64 = users.iter().map(|u| u.q_min).sum();
    if total_q_min > p_max {
        return Err(Error::Infeasible(Infeasibility::Cellular { total_q_min_watt: total_q_min, p_max_watt: p_max }));
    }

    let offsets: Vec<f64> = users.iter().map(VirtualUser::offset).collect();
    let p_tilde = p_max - offsets.iter().sum::<f64>();
    let finish = |shifted: Vec<f64>, nu: f64, iterations: usize, converged: bool, cellular_binding: bool| {
        let sum: f64 = shifted.iter().sum();
        let residual = if p_tilde > 0.0 { (sum - p_tilde).abs() / p_tilde } else { (sum - p_tilde).abs() };
        let states = users
            .iter()
            .zip(&shifted)
            .map(|(u, &q)| {
                if q >= u.p_mask_shifted {
                    BoxState::Upper
                } else if q <= u.q_min_shifted {
                    BoxState::Lower
                } else {
                    BoxState::Free
                }
            })
            .collect();
        let budgets = shifted.iter().zip(&offsets).map(|(q, o)| q + o).collect();
        WaterfillOutput {
            budgets,
            shifted,
            states,
            nu,
            p_max_shifted: p_tilde,
            residual,
            cellular_binding,
            iterations,
            converged,
        }
    };

    // The cellular constraint cannot bind: every subchannel takes its mask.
    let mask_sum: f64 = users.iter().map(|u| u.p_mask_shifted).sum();
    if mask_sum <= p_tilde {
        let shifted = users.iter().map(|u| u.p_mask_shifted).collect();
        return Ok(finish(shifted, 0.0, 0, true, false));
    }
    // Nothing left above the minimums.
    let lo_sum: f64 = users.iter().map(|u| u.q_min_shifted).sum();
    if lo_sum >= p_tilde * (1.0 - options.eps) {
        let shifted: Vec<f64> = users.iter().map(|u| u.q_min_shifted).collect();
        let nu = users.iter().map(|u| u.marginal(u.q_min_shifted)).fold(0.0, f64::max);
        return Ok(finish(shifted, nu, 0, true, true));
    }

    let w = users[0].bandwidth;
    let level = |nu: f64| w / (LN_2 * nu);
    let fill = |nu: f64| level_fill(users, level(nu)).sum::<f64>();

    let widest = users.iter().map(|u| 1.0 / u.h_eff + u.p_mask_shifted).fold(f64::NEG_INFINITY, f64::max);
    let max_gain = users.iter().map(|u| u.h_eff).fold(0.0, f64::max);
    let mut nu_lo = w / (LN_2 * (p_tilde + widest));
    let mut nu_hi = w * max_gain / LN_2 * 1e6;
    for _ in 0..1100 {
        if fill(nu_lo) >= p_tilde {
            break;
        }
        nu_lo /= 2.0;
    }
    for _ in 0..1100 {
        if fill(nu_hi) <= p_tilde {
            break;
        }
        nu_hi *= 2.0;
    }

    let mut best = (f64::INFINITY, nu_lo);
    let mut iterations = 0;
    let mut converged = false;
    for l in 1..=options.max_iter {
        iterations = l;
        let nu_mid = 0.5 * (nu_lo + nu_hi);
        let sum = fill(nu_mid);
        if sum < p_tilde {
            nu_hi = nu_mid;
        } else {
            nu_lo = nu_mid;
        }
        let residual = (p_tilde - sum).abs() / p_tilde;
        if residual < best.0 {
            best = (residual, nu_mid);
        }
        if residual <= options.eps {
            converged = true;
            break;
        }
    }
    let nu = best.1;
    let shifted = level_fill(users, level(nu)).collect();
    Ok(finish(shifted, nu, iterations, converged, true))
}

/// Solves the joint intra- and inter-cluster power allocation.
pub fn solve(instance: &ProblemInstance, options: SolverOptions) -> Result<PowerSolution> {
    if let Feasibility::Infeasible(why) = feasibility(instance) {
        return Err(Error::Infeasible(why));
    }
    let constants: Vec<IntraClusterConstants> =
        instance.clusters().iter().zip(instance.p_mask()).map(|(c, &mask)| intra_cluster_constants(c, mask)).collect();
    let virtual_users: Vec<VirtualUser> = constants.iter().map(|c| c.virtual_user).collect();
    let wf = waterfill(&virtual_users, instance.p_max(), options)?;

    let mut powers = BTreeMap::new();
    let mut rates = BTreeMap::new();
    let mut budgets = Vec::with_capacity(wf.budgets.len());
    for ((cluster, consts), &shifted) in instance.clusters().iter().zip(&constants).zip(&wf.shifted) {
        // q - Q_min equals the shifted excess, which is free of the c/alpha offset.
        let p = allocate_excess(consts, shifted - consts.virtual_user.q_min_shifted);
        for (k, user) in cluster.users().iter().enumerate() {
            powers.insert(user.user_id, p[k]);
            rates.insert(user.user_id, model::rate(cluster, &p, k)?);
        }
        budgets.push(p.iter().sum());
    }
    Ok(PowerSolution {
        powers,
        cluster_budgets: budgets,
        rates,
        dual_nu: wf.nu,
        iterations: wf.iterations,
        converged: wf.converged,
    })
}
