//! Instance and solution documents.
//!
//! Documents are JSON, or TOML when the file name ends in `.toml`. Field names
//! carry their units.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::allocator::{self, Feasibility, Infeasibility, SolverOptions};
use crate::error::{Error, Result};
use crate::model::{ClusterInstance, PowerSolution, ProblemInstance, UserChannel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UserDocument {
    pub user_id: usize,
    pub cnr_per_watt: f64,
    pub min_rate_bps: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClusterDocument {
    pub subchannel_id: usize,
    pub users: Vec<UserDocument>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceDocument {
    pub p_max_watt: f64,
    /// One mask per cluster; every mask defaults to `p_max_watt`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_mask_watt: Option<Vec<f64>>,
    /// Bandwidth of each subchannel.
    pub bandwidth_hz: f64,
    pub clusters: Vec<ClusterDocument>,
}

impl InstanceDocument {
    pub fn from_instance(instance: &ProblemInstance) -> Self {
        Self {
            p_max_watt: instance.p_max(),
            p_mask_watt: Some(instance.p_mask().to_vec()),
            bandwidth_hz: instance.clusters()[0].bandwidth(),
            clusters: instance
                .clusters()
                .iter()
                .map(|c| ClusterDocument {
                    subchannel_id: c.subchannel_id(),
                    users: c
                        .users()
                        .iter()
                        .map(|u| UserDocument { user_id: u.user_id, cnr_per_watt: u.cnr, min_rate_bps: u.min_rate })
                        .collect(),
                })
                .collect(),
        }
    }

    /// Validates every field, naming the first bad one.
    pub fn to_instance(&self) -> std::result::Result<ProblemInstance, String> {
        let positive = |name: String, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(format!("{name}: must be positive and finite, got {v}"))
            }
        };
        positive("p_max_watt".into(), self.p_max_watt)?;
        positive("bandwidth_hz".into(), self.bandwidth_hz)?;
        if self.clusters.is_empty() {
            return Err("clusters: must not be empty".into());
        }
        let masks = match &self.p_mask_watt {
            Some(m) if m.len() != self.clusters.len() => {
                return Err(format!("p_mask_watt: expected {} entries, got {}", self.clusters.len(), m.len()))
            }
            Some(m) => {
                for (i, &v) in m.iter().enumerate() {
                    positive(format!("p_mask_watt[{i}]"), v)?;
                }
                m.clone()
            }
            None => vec![self.p_max_watt; self.clusters.len()],
        };
        let mut clusters = Vec::with_capacity(self.clusters.len());
        for (n, c) in self.clusters.iter().enumerate() {
            if c.users.is_empty() {
                return Err(format!("clusters[{n}].users: must not be empty"));
            }
            let mut users = Vec::with_capacity(c.users.len());
            for (i, u) in c.users.iter().enumerate() {
                positive(format!("clusters[{n}].users[{i}].cnr_per_watt"), u.cnr_per_watt)?;
                if !(u.min_rate_bps.is_finite() && u.min_rate_bps >= 0.0) {
                    return Err(format!(
                        "clusters[{n}].users[{i}].min_rate_bps: must be nonnegative and finite, got {}",
                        u.min_rate_bps
                    ));
                }
                users.push(UserChannel::new(u.user_id, u.cnr_per_watt, u.min_rate_bps).map_err(|e| e.to_string())?);
            }
            clusters.push(
                ClusterInstance::new(c.subchannel_id, users, self.bandwidth_hz)
                    .map_err(|e| format!("clusters[{n}]: {e}"))?,
            );
        }
        ProblemInstance::new(clusters, self.p_max_watt, masks).map_err(|e| e.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserSolution {
    pub user_id: usize,
    pub power_watt: f64,
    pub rate_bps: f64,
    pub min_rate_bps: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterSolution {
    pub subchannel_id: usize,
    pub budget_watt: f64,
    /// Members in decoding order; the last one is the cluster head.
    pub users: Vec<UserSolution>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum SolutionDocument {
    Optimal {
        sum_rate_bps: f64,
        total_power_watt: f64,
        dual_nu: f64,
        iterations: usize,
        converged: bool,
        clusters: Vec<ClusterSolution>,
    },
    Infeasible {
        #[serde(flatten)]
        reason: Infeasibility,
    },
}

impl SolutionDocument {
    pub fn from_solution(instance: &ProblemInstance, solution: &PowerSolution) -> Self {
        let clusters = instance
            .clusters()
            .iter()
            .zip(&solution.cluster_budgets)
            .map(|(c, &budget)| ClusterSolution {
                subchannel_id: c.subchannel_id(),
                budget_watt: budget,
                users: c
                    .users()
                    .iter()
                    .map(|u| UserSolution {
                        user_id: u.user_id,
                        power_watt: solution.powers[&u.user_id],
                        rate_bps: solution.rates[&u.user_id],
                        min_rate_bps: u.min_rate,
                    })
                    .collect(),
            })
            .collect();
        SolutionDocument::Optimal {
            sum_rate_bps: solution.sum_rate(),
            total_power_watt: solution.total_power(),
            dual_nu: solution.dual_nu,
            iterations: solution.iterations,
            converged: solution.converged,
            clusters,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeasibilityDocument {
    pub feasible: bool,
    pub q_min_watt: Vec<f64>,
    pub total_q_min_watt: f64,
    pub p_max_watt: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub violation: Option<Infeasibility>,
}

fn is_toml(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("toml"))
}

pub fn read_instance(path: &Path) -> Result<ProblemInstance> {
    let text = fs::read_to_string(path).map_err(|source| Error::Io { path: path.into(), source })?;
    let parse_err = |message: String| Error::Parse { path: path.into(), message };
    let doc: InstanceDocument = if is_toml(path) {
        toml::from_str(&text).map_err(|e| parse_err(e.to_string()))?
    } else {
        serde_json::from_str(&text).map_err(|e| parse_err(e.to_string()))?
    };
    doc.to_instance().map_err(parse_err)
}

pub fn write_document<T: Serialize>(value: &T, path: Option<&Path>) -> Result<()> {
    let text = match path {
        Some(p) if is_toml(p) => {
            toml::to_string_pretty(value).map_err(|e| Error::InvalidInput(format!("cannot encode TOML: {e}")))?
        }
        _ => {
            serde_json::to_string_pretty(value).map_err(|e| Error::InvalidInput(format!("cannot encode JSON: {e}")))?
                + "\n"
        }
    };
    match path {
        Some(p) => fs::write(p, text).map_err(|source| Error::Io { path: p.into(), source }),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SolveOutcome {
    Optimal(PowerSolution),
    Infeasible(Infeasibility),
}

/// Reads an instance, solves it and writes the solution (or infeasibility
/// report) to `output` or stdout.
pub fn solve_file(instance_path: &Path, output: Option<&Path>, options: SolverOptions) -> Result<SolveOutcome> {
    let instance = read_instance(instance_path)?;
    match allocator::solve(&instance, options) {
        Ok(solution) => {
            write_document(&SolutionDocument::from_solution(&instance, &solution), output)?;
            Ok(SolveOutcome::Optimal(solution))
        }
        Err(Error::Infeasible(reason)) => {
            write_document(&SolutionDocument::Infeasible { reason: reason.clone() }, output)?;
            Ok(SolveOutcome::Infeasible(reason))
        }
        Err(e) => Err(e),
    }
}

/// Reads an instance and writes its feasibility report.
pub fn feasibility_file(instance_path: &Path, output: Option<&Path>) -> Result<FeasibilityDocument> {
    let instance = read_instance(instance_path)?;
    let q_min: Vec<f64> = instance.clusters().iter().map(allocator::q_min).collect();
    let violation = match allocator::feasibility(&instance) {
        Feasibility::Feasible { .. } => None,
        Feasibility::Infeasible(why) => Some(why),
    };
    let doc = FeasibilityDocument {
        feasible: violation.is_none(),
        total_q_min_watt: q_min.iter().sum(),
        q_min_watt: q_min,
        p_max_watt: instance.p_max(),
        violation,
    };
    write_document(&doc, output)?;
    Ok(doc)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_the_bad_field() {
        let doc: InstanceDocument = serde_json::from_str(
            r#"{"p_max_watt": 3, "bandwidth_hz": 1,
                "clusters": [{"subchannel_id": 0, "users": [
                    {"user_id": 0, "cnr_per_watt": 1, "min_rate_bps": 1},
                    {"user_id": 1, "cnr_per_watt": -4, "min_rate_bps": 1}]}]}"#,
        )
        .unwrap();
        let err = doc.to_instance().unwrap_err();
        assert!(err.contains("clusters[0].users[1].cnr_per_watt"), "{err}");
    }

    #[test]
    fn missing_and_unknown_fields_are_reported() {
        let err =
            serde_json::from_str::<InstanceDocument>(r#"{"bandwidth_hz": 1, "clusters": []}"#).unwrap_err().to_string();
        assert!(err.contains("p_max_watt"), "{err}");
        let err = serde_json::from_str::<InstanceDocument>(
            r#"{"p_max_watt": 1, "bandwidth_hz": 1, "clusters": [], "p_maks_watt": [1]}"#,
        )
        .unwrap_err()
        .to_string();
        assert!(err.contains("p_maks_watt"), "{err}");
    }

    #[test]
    fn infeasible_report_is_tagged() {
        let doc =
            SolutionDocument::Infeasible { reason: Infeasibility::Cellular { total_q_min_watt: 2.0, p_max_watt: 1.0 } };
        let v: serde_json::Value = serde_json::to_value(&doc).unwrap();
        assert_eq!(v["status"], "infeasible");
        assert_eq!(v["violated_bound"], "cellular");
        assert_eq!(v["total_q_min_watt"], 2.0);
    }
}
