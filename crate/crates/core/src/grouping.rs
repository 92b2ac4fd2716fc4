//! User grouping for the three multiple-access schemes.
//!
//! Users are dealt to subchannels in round-robin passes: in each pass every
//! subchannel that still has room takes the unassigned user with the highest
//! CNR on that subchannel. The first pass therefore picks the cluster heads and
//! cluster sizes never differ by more than one.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ClusterInstance, UserChannel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SchemeSpec {
    /// Every user superposed on the whole band.
    FullyScSic,
    /// Clusters of at most `u_max` users on `ceil(K / u_max)` subchannels.
    Noma { u_max: usize },
    /// One user per subchannel.
    Fdma,
}

impl SchemeSpec {
    pub fn noma(u_max: usize) -> Result<Self> {
        let s = SchemeSpec::Noma { u_max };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            SchemeSpec::Noma { u_max } if u_max < 2 => {
                Err(Error::InvalidInput(format!("NOMA needs u_max >= 2, got {u_max}")))
            }
            _ => Ok(()),
        }
    }

    pub fn u_max(&self) -> Option<usize> {
        match *self {
            SchemeSpec::Noma { u_max } => Some(u_max),
            _ => None,
        }
    }

    /// Largest cluster allowed for `k` users.
    fn capacity(&self, k: usize) -> usize {
        match *self {
            SchemeSpec::FullyScSic => k,
            SchemeSpec::Noma { u_max } => u_max,
            SchemeSpec::Fdma => 1,
        }
    }
}

impl fmt::Display for SchemeSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SchemeSpec::FullyScSic => f.write_str("SC-SIC"),
            SchemeSpec::Noma { u_max } => write!(f, "{u_max}-NOMA"),
            SchemeSpec::Fdma => f.write_str("FDMA"),
        }
    }
}

pub fn num_subchannels(spec: SchemeSpec, k: usize) -> usize {
    match spec {
        SchemeSpec::FullyScSic => 1,
        SchemeSpec::Noma { u_max } => k.div_ceil(u_max),
        SchemeSpec::Fdma => k,
    }
}

/// Groups users given their CNR table `cnrs[user][subchannel]`.
///
/// Every user gets `min_rates[user]` as demand and the clusters share
/// `bandwidth` Hz each. The number of subchannels is the table's width; it is
/// usually [`num_subchannels`] for the scheme.
pub fn group_users(
    cnrs: &[Vec<f64>],
    min_rates: &[f64],
    bandwidth: f64,
    spec: SchemeSpec,
) -> Result<Vec<ClusterInstance>> {
    spec.validate()?;
    let k = cnrs.len();
    let n = cnrs.first().map_or(0, Vec::len);
    if cnrs.iter().any(|row| row.len() != n) {
        return Err(Error::InvalidInput("cnr table rows differ in length".into()));
    }
    if min_rates.len() != k {
        return Err(Error::InvalidInput(format!("{} minimum rates for {k} users", min_rates.len())));
    }
    if n == 0 || k < n {
        return Err(Error::TooFewUsers { count: k, subchannels: n });
    }
    let capacity = spec.capacity(k);
    if capacity * n < k {
        return Err(Error::InvalidInput(format!("{n} subchannels of at most {capacity} users cannot hold {k} users")));
    }

    let mut assigned = vec![false; k];
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut remaining = k;
    while remaining > 0 {
        for (sub, group) in members.iter_mut().enumerate() {
            if remaining == 0 {
                break;
            }
            if group.len() >= capacity {
                continue;
            }
            // Highest CNR on this subchannel; ties go to the lower user id.
            let best = (0..k)
                .filter(|&u| !assigned[u])
                .max_by(|&a, &b| cnrs[a][sub].total_cmp(&cnrs[b][sub]).then(b.cmp(&a)))
                .expect("remaining > 0");
            assigned[best] = true;
            group.push(best);
            remaining -= 1;
        }
    }

    members
        .into_iter()
        .enumerate()
        .map(|(sub, group)| {
            let users = group
                .into_iter()
                .map(|u| UserChannel::new(u, cnrs[u][sub], min_rates[u]))
                .collect::<Result<Vec<_>>>()?;
            ClusterInstance::new(sub, users, bandwidth)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(c: &ClusterInstance) -> Vec<usize> {
        c.users().iter().map(|u| u.user_id).collect()
    }

    #[test]
    fn subchannel_counts() {
        assert_eq!(num_subchannels(SchemeSpec::Noma { u_max: 4 }, 30), 8);
        assert_eq!(num_subchannels(SchemeSpec::Fdma, 7), 7);
        assert_eq!(num_subchannels(SchemeSpec::Noma { u_max: 4 }, 8), 2);
        assert_eq!(num_subchannels(SchemeSpec::FullyScSic, 60), 1);
        assert!(SchemeSpec::noma(1).is_err());
    }

    #[test]
    fn fdma_gives_singletons() {
        let cnrs = vec![vec![1.0, 5.0, 2.0], vec![3.0, 1.0, 1.0], vec![2.0, 2.0, 9.0]];
        let clusters = group_users(&cnrs, &[0.0; 3], 1.0, SchemeSpec::Fdma).unwrap();
        assert_eq!(clusters.len(), 3);
        assert_eq!(ids(&clusters[0]), [1]);
        assert_eq!(ids(&clusters[1]), [0]);
        assert_eq!(ids(&clusters[2]), [2]);
    }

    #[test]
    fn strongest_user_goes_to_first_subchannel() {
        // user 0 is best on both subchannels
        let cnrs = vec![vec![10.0, 10.0], vec![1.0, 4.0], vec![2.0, 3.0], vec![3.0, 1.0]];
        let clusters = group_users(&cnrs, &[0.0; 4], 1.0, SchemeSpec::Noma { u_max: 2 }).unwrap();
        // pass 1: sub 0 <- user 0, sub 1 <- user 1 (4.0 best of the rest)
        // pass 2: sub 0 <- user 3 (3.0), sub 1 <- user 2
        assert_eq!(clusters[0].head().user_id, 0);
        assert_eq!(clusters[1].head().user_id, 1);
        assert_eq!(ids(&clusters[0]), [3, 0]);
        assert_eq!(ids(&clusters[1]), [2, 1]);
    }

    #[test]
    fn fully_sc_sic_sorts_one_cluster() {
        let cnrs: Vec<Vec<f64>> = [5.0, 1.0, 4.0, 2.0, 3.0].iter().map(|&h| vec![h]).collect();
        let clusters = group_users(&cnrs, &[0.0; 5], 1.0, SchemeSpec::FullyScSic).unwrap();
        assert_eq!(clusters.len(), 1);
        assert_eq!(ids(&clusters[0]), [1, 3, 4, 2, 0]);
    }

    #[test]
    fn too_few_users() {
        let cnrs = vec![vec![1.0, 2.0, 3.0]; 2];
        assert!(matches!(group_users(&cnrs, &[0.0; 2], 1.0, SchemeSpec::Fdma), Err(Error::TooFewUsers { .. })));
    }

    #[test]
    fn sizes_balanced_and_capped() {
        let k = 30;
        let n = num_subchannels(SchemeSpec::Noma { u_max: 4 }, k);
        let cnrs: Vec<Vec<f64>> =
            (0..k).map(|u| (0..n).map(|s| 1.0 + ((u * 7 + s * 13) % 17) as f64).collect()).collect();
        let clusters = group_users(&cnrs, &vec![0.0; k], 1.0, SchemeSpec::Noma { u_max: 4 }).unwrap();
        let sizes: Vec<usize> = clusters.iter().map(ClusterInstance::len).collect();
        assert!(sizes.iter().all(|&s| s <= 4));
        assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
        let mut all: Vec<usize> = clusters.iter().flat_map(ids).collect();
        all.sort_unstable();
        assert_eq!(all, (0..k).collect::<Vec<_>>());
    }
}
