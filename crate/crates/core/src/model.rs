//! Domain types and rate evaluation shared by the allocator, the oracle and the
//! harness.
//!
//! Everything here is in linear units: Watt, Hz, bits/second. The channel of a
//! user on its subchannel is carried as a single channel-to-noise ratio
//! `cnr = |g|^2 / noise_power` (1/Watt), so a received SNR is simply `p * cnr`.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Converts a power level in dBm to Watt.
pub fn dbm_to_watt(x_dbm: f64) -> f64 {
    10f64.powf((x_dbm - 30.0) / 10.0)
}

/// Converts a power level in Watt to dBm.
pub fn watt_to_dbm(x_watt: f64) -> f64 {
    10.0 * x_watt.log10() + 30.0
}

/// One user as seen on the subchannel it is multiplexed on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UserChannel {
    pub user_id: usize,
    /// Channel-to-noise ratio, 1/Watt.
    pub cnr: f64,
    /// Minimum rate demand, bits/second.
    pub min_rate: f64,
}

impl UserChannel {
    pub fn new(user_id: usize, cnr: f64, min_rate: f64) -> Result<Self> {
        if !(cnr.is_finite() && cnr > 0.0) {
            return Err(Error::InvalidInput(format!("user {user_id}: cnr must be positive and finite, got {cnr}")));
        }
        if !(min_rate.is_finite() && min_rate >= 0.0) {
            return Err(Error::InvalidInput(format!(
                "user {user_id}: min_rate must be nonnegative and finite, got {min_rate}"
            )));
        }
        Ok(Self { user_id, cnr, min_rate })
    }
}

/// The users multiplexed on one subchannel, in SIC decoding order.
///
/// `users[0]` is the weakest user and the last element is the cluster head,
/// which decodes and cancels every other member's signal. A user at a higher
/// index is "stronger" than every user below it; exact CNR ties are ordered by
/// ascending `user_id`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClusterInstance {
    subchannel_id: usize,
    users: Vec<UserChannel>,
    bandwidth: f64,
}

impl ClusterInstance {
    /// Builds a cluster from users in any order; they are sorted into decoding
    /// order here.
    pub fn new(subchannel_id: usize, mut users: Vec<UserChannel>, bandwidth: f64) -> Result<Self> {
        if users.is_empty() {
            return Err(Error::InvalidInput(format!("subchannel {subchannel_id}: cluster has no users")));
        }
        if !(bandwidth.is_finite() && bandwidth > 0.0) {
            return Err(Error::InvalidInput(format!(
                "subchannel {subchannel_id}: bandwidth must be positive, got {bandwidth}"
            )));
        }
        for u in &users {
            UserChannel::new(u.user_id, u.cnr, u.min_rate)?;
        }
        users.sort_by(|a, b| a.cnr.total_cmp(&b.cnr).then(a.user_id.cmp(&b.user_id)));
        if users.windows(2).any(|w| w[0].user_id == w[1].user_id) {
            return Err(Error::InvalidInput(format!("subchannel {subchannel_id}: duplicate user id")));
        }
        Ok(Self { subchannel_id, users, bandwidth })
    }

    pub fn subchannel_id(&self) -> usize {
        self.subchannel_id
    }

    /// Members in decoding order, weakest first.
    pub fn users(&self) -> &[UserChannel] {
        &self.users
    }

    pub fn len(&self) -> usize {
        self.users.len()
    }

    pub fn is_empty(&self) -> bool {
        self.users.is_empty()
    }

    /// Subchannel bandwidth `W_s`, Hz.
    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn head_index(&self) -> usize {
        self.users.len() - 1
    }

    pub fn head(&self) -> &UserChannel {
        &self.users[self.head_index()]
    }

    /// Minimum spectral efficiency `R_min / W_s` of member `index`.
    pub fn rate_fraction(&self, index: usize) -> f64 {
        self.users[index].min_rate / self.bandwidth
    }
}

/// A complete multi-cluster power allocation problem.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProblemInstance {
    clusters: Vec<ClusterInstance>,
    p_max: f64,
    p_mask: Vec<f64>,
}

impl ProblemInstance {
    pub fn new(clusters: Vec<ClusterInstance>, p_max: f64, p_mask: Vec<f64>) -> Result<Self> {
        if clusters.is_empty() {
            return Err(Error::InvalidInput("problem has no clusters".into()));
        }
        if !(p_max.is_finite() && p_max > 0.0) {
            return Err(Error::InvalidInput(format!("p_max must be positive and finite, got {p_max}")));
        }
        if p_mask.len() != clusters.len() {
            return Err(Error::InvalidInput(format!(
                "expected {} per-subchannel masks, got {}",
                clusters.len(),
                p_mask.len()
            )));
        }
        if let Some(m) = p_mask.iter().find(|m| !(m.is_finite() && **m > 0.0)) {
            return Err(Error::InvalidInput(format!("p_mask entries must be positive and finite, got {m}")));
        }
        let w = clusters[0].bandwidth();
        if clusters.iter().any(|c| c.bandwidth() != w) {
            return Err(Error::InvalidInput("all clusters must share the same subchannel bandwidth".into()));
        }
        let mut seen = BTreeSet::new();
        for c in &clusters {
            for u in c.users() {
                if !seen.insert(u.user_id) {
                    return Err(Error::InvalidInput(format!("user {} appears in more than one cluster", u.user_id)));
                }
            }
        }
        Ok(Self { clusters, p_max, p_mask })
    }

    /// Builds an instance with every per-subchannel mask equal to `p_max`.
    pub fn with_unit_masks(clusters: Vec<ClusterInstance>, p_max: f64) -> Result<Self> {
        let masks = vec![p_max; clusters.len()];
        Self::new(clusters, p_max, masks)
    }

    pub fn clusters(&self) -> &[ClusterInstance] {
        &self.clusters
    }

    pub fn p_max(&self) -> f64 {
        self.p_max
    }

    pub fn p_mask(&self) -> &[f64] {
        &self.p_mask
    }

    pub fn num_users(&self) -> usize {
        self.clusters.iter().map(ClusterInstance::len).sum()
    }
}

/// Output of the joint power allocation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PowerSolution {
    /// Per-user transmit power, Watt.
    pub powers: BTreeMap<usize, f64>,
    /// Per-cluster total power `q_n`, Watt, in cluster order.
    pub cluster_budgets: Vec<f64>,
    /// Per-user achieved rate, bits/second.
    pub rates: BTreeMap<usize, f64>,
    /// Dual variable of the cellular power constraint.
    pub dual_nu: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl PowerSolution {
    pub fn sum_rate(&self) -> f64 {
        self.rates.values().sum()
    }

    pub fn total_power(&self) -> f64 {
        self.cluster_budgets.iter().sum()
    }
}

fn check_powers(cluster: &ClusterInstance, powers: &[f64], user_index: usize) -> Result<()> {
    if powers.len() != cluster.len() {
        return Err(Error::InvalidInput(format!("expected {} powers, got {}", cluster.len(), powers.len())));
    }
    if user_index >= cluster.len() {
        return Err(Error::IndexOutOfRange { index: user_index, len: cluster.len() });
    }
    Ok(())
}

/// SINR of member `user_index` when decoding its own signal after SIC: only
/// stronger members interfere.
pub fn sinr(cluster: &ClusterInstance, powers: &[f64], user_index: usize) -> Result<f64> {
    check_powers(cluster, powers, user_index)?;
    let h = cluster.users()[user_index].cnr;
    let interference: f64 = powers[user_index + 1..].iter().sum();
    Ok(powers[user_index] * h / (interference * h + 1.0))
}

/// Shannon rate of member `user_index`, bits/second.
pub fn rate(cluster: &ClusterInstance, powers: &[f64], user_index: usize) -> Result<f64> {
    let gamma = sinr(cluster, powers, user_index)?;
    Ok(cluster.bandwidth() * gamma.ln_1p() / std::f64::consts::LN_2)
}

/// Per-member rates in decoding order.
pub fn member_rates(cluster: &ClusterInstance, powers: &[f64]) -> Result<Vec<f64>> {
    (0..cluster.len()).map(|k| rate(cluster, powers, k)).collect()
}

pub fn cluster_sum_rate(cluster: &ClusterInstance, powers: &[f64]) -> Result<f64> {
    Ok(member_rates(cluster, powers)?.iter().sum())
}
