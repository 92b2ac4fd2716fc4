//! Monte Carlo comparison of fully SC-SIC, NOMA and FDMA.
//!
//! A trial drops users, groups them for a scheme, checks feasibility of the
//! common minimum-rate demand and, when feasible, solves for the optimal
//! powers. Infeasible trials count as outages with zero sum-rate.

pub mod document;

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::allocator::{self, Feasibility, SolverOptions};
use crate::channel::{realize_cnrs, ChannelRealization, ScenarioConfig};
use crate::error::{Error, Result};
use crate::grouping::{group_users, num_subchannels, SchemeSpec};
use crate::model::ProblemInstance;

pub use document::{feasibility_file, solve_file, SolveOutcome};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variable", rename_all = "snake_case", deny_unknown_fields)]
pub enum Sweep {
    MinRate { values_bps: Vec<f64> },
    NumUsers { values: Vec<usize> },
}

impl Sweep {
    fn name(&self) -> &'static str {
        match self {
            Sweep::MinRate { .. } => "min_rate_bps",
            Sweep::NumUsers { .. } => "num_users",
        }
    }

    fn len(&self) -> usize {
        match self {
            Sweep::MinRate { values_bps } => values_bps.len(),
            Sweep::NumUsers { values } => values.len(),
        }
    }
}

impl Default for Sweep {
    fn default() -> Self {
        Sweep::MinRate { values_bps: (1..=20).map(|i| 0.25e6 * i as f64).collect() }
    }
}

pub fn default_schemes() -> Vec<SchemeSpec> {
    vec![
        SchemeSpec::FullyScSic,
        SchemeSpec::Noma { u_max: 6 },
        SchemeSpec::Noma { u_max: 4 },
        SchemeSpec::Noma { u_max: 2 },
        SchemeSpec::Fdma,
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: ScenarioConfig,
    pub schemes: Vec<SchemeSpec>,
    pub sweep: Sweep,
    pub fixed_min_rate_bps: f64,
    pub fixed_num_users: usize,
    pub trials: usize,
    pub output_path: PathBuf,
    pub eps: f64,
    pub max_iter: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let solver = SolverOptions::default();
        Self {
            scenario: ScenarioConfig::default(),
            schemes: default_schemes(),
            sweep: Sweep::default(),
            fixed_min_rate_bps: 3e6,
            fixed_num_users: 30,
            trials: 500,
            output_path: PathBuf::from("results.csv"),
            eps: solver.eps,
            max_iter: solver.max_iter,
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|source| Error::Io { path: path.into(), source })?;
        let config: Self =
            toml::from_str(&text).map_err(|e| Error::Parse { path: path.into(), message: e.to_string() })?;
        config.validate().map_err(|e| Error::Parse { path: path.into(), message: e.to_string() })?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        let mut scenario = self.scenario.clone();
        scenario.num_users = scenario.num_users.max(1);
        scenario.validate()?;
        if self.trials == 0 {
            return Err(Error::InvalidInput("trials must be at least 1".into()));
        }
        if self.schemes.is_empty() {
            return Err(Error::InvalidInput("schemes must not be empty".into()));
        }
        for s in &self.schemes {
            s.validate()?;
        }
        if self.sweep.len() == 0 {
            return Err(Error::InvalidInput("sweep values must not be empty".into()));
        }
        if let Sweep::NumUsers { values } = &self.sweep {
            if values.contains(&0) {
                return Err(Error::InvalidInput("sweep user counts must be positive".into()));
            }
        }
        if let Sweep::MinRate { values_bps } = &self.sweep {
            if values_bps.iter().any(|r| !(r.is_finite() && *r >= 0.0)) {
                return Err(Error::InvalidInput("sweep rates must be nonnegative".into()));
            }
        }
        if self.fixed_num_users == 0 || !(self.fixed_min_rate_bps.is_finite() && self.fixed_min_rate_bps >= 0.0) {
            return Err(Error::InvalidInput("fixed_num_users and fixed_min_rate_bps must be valid".into()));
        }
        if !(self.eps.is_finite() && self.eps > 0.0) || self.max_iter == 0 {
            return Err(Error::InvalidInput("eps and max_iter must be positive".into()));
        }
        Ok(())
    }

    pub fn solver_options(&self) -> SolverOptions {
        SolverOptions { eps: self.eps, max_iter: self.max_iter }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrialOutcome {
    pub feasible: bool,
    pub sum_rate_bps: f64,
    /// False if the water-filling bisection ran out of iterations.
    pub converged: bool,
}

/// SplitMix64 finaliser, used to derive per-trial seeds.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of trial `trial` with `num_users` users. Independent of the scheme and
/// the demand, so every scheme and every demand level sees the same drops.
pub fn trial_seed(base_seed: u64, num_users: usize, trial: usize) -> u64 {
    mix(mix(mix(base_seed) ^ num_users as u64) ^ trial as u64)
}

/// The power allocation problem one scheme faces in one drop.
pub fn build_instance(
    scenario: &ScenarioConfig,
    scheme: SchemeSpec,
    min_rate_bps: f64,
    realization: &ChannelRealization,
) -> Result<ProblemInstance> {
    let k = scenario.num_users;
    let n = num_subchannels(scheme, k);
    let cnrs = realize_cnrs(scenario, realization, n)?;
    let bandwidth = scenario.total_bandwidth_hz / n as f64;
    let clusters = group_users(&cnrs, &vec![min_rate_bps; k], bandwidth, scheme)?;
    ProblemInstance::with_unit_masks(clusters, scenario.p_max_watt())
}

pub fn run_trial(
    scenario: &ScenarioConfig,
    scheme: SchemeSpec,
    min_rate_bps: f64,
    num_users: usize,
    seed: u64,
    options: SolverOptions,
) -> Result<TrialOutcome> {
    let scenario = ScenarioConfig { num_users, ..scenario.clone() };
    let realization = ChannelRealization::generate(&scenario, seed)?;
    let instance = build_instance(&scenario, scheme, min_rate_bps, &realization)?;
    if let Feasibility::Infeasible(_) = allocator::feasibility(&instance) {
        return Ok(TrialOutcome { feasible: false, sum_rate_bps: 0.0, converged: true });
    }
    let solution = allocator::solve(&instance, options)?;
    Ok(TrialOutcome { feasible: true, sum_rate_bps: solution.sum_rate(), converged: solution.converged })
}

/// One row of the results table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub sweep_variable: String,
    pub sweep_value: f64,
    pub scheme: String,
    pub u_max: Option<usize>,
    /// Trials that count towards the averages (non-converged ones excluded).
    pub trials: usize,
    pub outage_probability: f64,
    pub avg_sum_rate_bps: f64,
    pub infeasible_count: usize,
    pub nonconverged_count: usize,
}

/// Aggregates trial outcomes in order, so the result does not depend on how
/// the trials were scheduled.
pub fn aggregate(outcomes: &[TrialOutcome]) -> (usize, f64, f64, usize, usize) {
    let nonconverged = outcomes.iter().filter(|o| o.feasible && !o.converged).count();
    let counted: Vec<&TrialOutcome> = outcomes.iter().filter(|o| !o.feasible || o.converged).collect();
    let infeasible = counted.iter().filter(|o| !o.feasible).count();
    let n = counted.len();
    let (outage, avg) = if n == 0 {
        (f64::NAN, f64::NAN)
    } else {
        let total: f64 = counted.iter().map(|o| o.sum_rate_bps).sum();
        (infeasible as f64 / n as f64, total / n as f64)
    };
    (n, outage, avg, infeasible, nonconverged)
}

/// Runs every (sweep point, scheme) pair over `config.trials` drops.
pub fn run_sweep(config: &ExperimentConfig) -> Result<Vec<SweepRow>> {
    config.validate()?;
    let options = config.solver_options();
    let points: Vec<(f64, usize, f64)> = match &config.sweep {
        Sweep::MinRate { values_bps } => values_bps.iter().map(|&r| (r, config.fixed_num_users, r)).collect(),
        Sweep::NumUsers { values } => values.iter().map(|&k| (config.fixed_min_rate_bps, k, k as f64)).collect(),
    };
    let mut rows = Vec::with_capacity(points.len() * config.schemes.len());
    for (min_rate, k, value) in points {
        for &scheme in &config.schemes {
            let outcomes = (0..config.trials)
                .into_par_iter()
                .map(|t| {
                    let seed = trial_seed(config.scenario.seed, k, t);
                    run_trial(&config.scenario, scheme, min_rate, k, seed, options)
                })
                .collect::<Result<Vec<_>>>()?;
            let (trials, outage, avg, infeasible, nonconverged) = aggregate(&outcomes);
            rows.push(SweepRow {
                sweep_variable: config.sweep.name().to_string(),
                sweep_value: value,
                scheme: scheme.to_string(),
                u_max: scheme.u_max(),
                trials,
                outage_probability: outage,
                avg_sum_rate_bps: avg,
                infeasible_count: infeasible,
                nonconverged_count: nonconverged,
            });
        }
    }
    Ok(rows)
}

pub fn emit_csv(rows: &[SweepRow], path: &Path) -> Result<()> {
    if rows.is_empty() {
        return Err(Error::InvalidInput("no results to write".into()));
    }
    let file = fs::File::create(path).map_err(|source| Error::Io { path: path.into(), source })?;
    let mut writer = csv::Writer::from_writer(file);
    for row in rows {
        writer.serialize(row)?;
    }
    writer.flush().map_err(|source| Error::Io { path: path.into(), source })?;
    Ok(())
}

pub fn read_csv(path: &Path) -> Result<Vec<SweepRow>> {
    let mut reader = csv::Reader::from_path(path)?;
    reader.deserialize().map(|r| r.map_err(Error::from)).collect()
}
