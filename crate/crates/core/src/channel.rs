//! Random single-cell downlink channels: uniform user drop in an annulus,
//! log-distance path loss, per-user lognormal shadowing and i.i.d. Rayleigh
//! block fading on each subchannel.
//!
//! Randomness is split into substreams keyed by purpose, user and grid size,
//! so a user's position and shadowing do not depend on how many subchannels a
//! scheme uses, and two schemes on the same seed see the same geometry.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::dbm_to_watt;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub num_users: usize,
    pub cell_radius_m: f64,
    pub min_distance_m: f64,
    pub total_bandwidth_hz: f64,
    pub bs_power_dbm: f64,
    pub noise_density_dbm_hz: f64,
    pub shadowing_sigma_db: f64,
    pub seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            num_users: 30,
            cell_radius_m: 500.0,
            min_distance_m: 20.0,
            total_bandwidth_hz: 5e6,
            bs_power_dbm: 46.0,
            noise_density_dbm_hz: -174.0,
            shadowing_sigma_db: 8.0,
            seed: 0,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidInput(msg));
        if self.num_users == 0 {
            return bad("scenario.num_users must be at least 1".into());
        }
        if !(self.min_distance_m > 0.0 && self.min_distance_m < self.cell_radius_m) {
            return bad(format!(
                "scenario.min_distance_m ({}) must be positive and below cell_radius_m ({})",
                self.min_distance_m, self.cell_radius_m
            ));
        }
        if !(self.total_bandwidth_hz.is_finite() && self.total_bandwidth_hz > 0.0) {
            return bad("scenario.total_bandwidth_hz must be positive".into());
        }
        if !(self.shadowing_sigma_db.is_finite() && self.shadowing_sigma_db >= 0.0) {
            return bad("scenario.shadowing_sigma_db must be nonnegative".into());
        }
        if !self.bs_power_dbm.is_finite() || !self.noise_density_dbm_hz.is_finite() {
            return bad("scenario power levels must be finite".into());
        }
        Ok(())
    }

    pub fn p_max_watt(&self) -> f64 {
        dbm_to_watt(self.bs_power_dbm)
    }

    /// Noise power over one of `num_subchannels` equal subchannels, Watt.
    pub fn noise_power_watt(&self, num_subchannels: usize) -> f64 {
        dbm_to_watt(self.noise_density_dbm_hz) * self.total_bandwidth_hz / num_subchannels as f64
    }
}

const STREAM_POSITION: u64 = 1;
const STREAM_SHADOWING: u64 = 2;
const STREAM_FADING: u64 = 3;

/// Independent generator for `(purpose, a, b)` under `seed`.
fn substream(seed: u64, purpose: u64, a: u64, b: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((purpose << 56) ^ (b << 32) ^ a);
    rng
}

/// Uniform-by-area distances in `[min_distance_m, cell_radius_m]`.
pub fn sample_positions<R: Rng + ?Sized>(config: &ScenarioConfig, rng: &mut R) -> Vec<f64> {
    (0..config.num_users).map(|_| sample_distance(config, rng)).collect()
}

fn sample_distance<R: Rng + ?Sized>(config: &ScenarioConfig, rng: &mut R) -> f64 {
    let lo = config.min_distance_m * config.min_distance_m;
    let hi = config.cell_radius_m * config.cell_radius_m;
    rng.gen_range(lo..=hi).sqrt()
}

/// Path loss in dB at `d_m` metres: `128.1 + 37.6 log10(d / 1 km)`.
pub fn path_loss_db(d_m: f64) -> Result<f64> {
    if !(d_m.is_finite() && d_m > 0.0) {
        return Err(Error::InvalidInput(format!("distance must be positive, got {d_m}")));
    }
    Ok(128.1 + 37.6 * (d_m / 1000.0).log10())
}

/// Linear power attenuation at `d_m` metres.
pub fn path_loss_linear(d_m: f64) -> Result<f64> {
    Ok(10f64.powf(-path_loss_db(d_m)? / 10.0))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Fading {
    /// Unit-mean exponential power gain per (user, subchannel, grid).
    Rayleigh { seed: u64 },
    /// No small-scale fading.
    Unit,
}

/// Large-scale terms of one drop plus the key for its small-scale fading.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    /// Distance of each user to the base station, metres.
    pub positions: Vec<f64>,
    /// Path loss times shadowing, linear.
    pub large_scale: Vec<f64>,
    pub fading: Fading,
}

impl ChannelRealization {
    /// Draws a realization from `seed`; the config's own `seed` field is not used.
    pub fn generate(config: &ScenarioConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let shadowing =
            Normal::new(0.0, config.shadowing_sigma_db).map_err(|e| Error::InvalidInput(format!("shadowing: {e}")))?;
        let mut positions = Vec::with_capacity(config.num_users);
        let mut large_scale = Vec::with_capacity(config.num_users);
        for k in 0..config.num_users as u64 {
            let d = sample_distance(config, &mut substream(seed, STREAM_POSITION, k, 0));
            let shadow_db: f64 = shadowing.sample(&mut substream(seed, STREAM_SHADOWING, k, 0));
            positions.push(d);
            large_scale.push(path_loss_linear(d)? * 10f64.powf(shadow_db / 10.0));
        }
        Ok(Self { positions, large_scale, fading: Fading::Rayleigh { seed } })
    }

    /// Fading power gains of `user` on each subchannel of an `n`-subchannel grid.
    pub fn fading_row(&self, user: usize, n: usize) -> Vec<f64> {
        match self.fading {
            Fading::Unit => vec![1.0; n],
            Fading::Rayleigh { seed } => {
                let mut rng = substream(seed, STREAM_FADING, user as u64, n as u64);
                (0..n)
                    .map(|_| {
                        let g: f64 = Exp1.sample(&mut rng);
                        // Exp1 can return exactly 0.
                        g.max(f64::MIN_POSITIVE)
                    })
                    .collect()
            }
        }
    }

    pub fn fading(&self, user: usize, subchannel: usize, n: usize) -> f64 {
        self.fading_row(user, n)[subchannel]
    }
}

/// Per-user, per-subchannel CNR (1/Watt) on an `n`-subchannel grid.
pub fn realize_cnrs(config: &ScenarioConfig, realization: &ChannelRealization, n: usize) -> Result<Vec<Vec<f64>>> {
    if n == 0 {
        return Err(Error::InvalidInput("number of subchannels must be at least 1".into()));
    }
    let noise = config.noise_power_watt(n);
    Ok(realization
        .large_scale
        .iter()
        .enumerate()
        .map(|(k, g)| realization.fading_row(k, n).into_iter().map(|f| g * f / noise).collect())
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn path_loss_reference_points() {
        assert_relative_eq!(path_loss_db(1000.0).unwrap(), 128.1, max_relative = 1e-15);
        assert_relative_eq!(path_loss_linear(1000.0).unwrap(), 1.548_816_618_912_48e-13, max_relative = 1e-9);
        assert_relative_eq!(path_loss_db(100.0).unwrap(), 90.5, max_relative = 1e-14);
        assert_relative_eq!(path_loss_db(20.0).unwrap(), 64.218_727_837, max_relative = 1e-10);
        assert!(path_loss_linear(0.0).is_err());
        assert!(path_loss_linear(-3.0).is_err());
    }

    #[test]
    fn noise_power_over_full_band() {
        let cfg = ScenarioConfig::default();
        assert_relative_eq!(cfg.noise_power_watt(1), 1.990_535_852_767_49e-14, max_relative = 1e-9);
        assert_relative_eq!(crate::model::watt_to_dbm(cfg.noise_power_watt(1)), -107.010_3, max_relative = 1e-6);
    }

    #[test]
    fn positions_stay_in_annulus() {
        let cfg = ScenarioConfig { num_users: 10_000, ..Default::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let d = sample_positions(&cfg, &mut rng);
        assert!(d.iter().all(|&x| (20.0..=500.0).contains(&x)));
    }

    #[test]
    fn degenerate_annulus() {
        let cfg = ScenarioConfig { num_users: 100, min_distance_m: 500.0 - 1e-6, ..Default::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for d in sample_positions(&cfg, &mut rng) {
            assert_relative_eq!(d, 500.0, max_relative = 1e-8);
        }
    }

    #[test]
    fn squared_distance_moment() {
        let cfg = ScenarioConfig { num_users: 100_000, ..Default::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let d = sample_positions(&cfg, &mut rng);
        let mean_sq = d.iter().map(|x| x * x).sum::<f64>() / d.len() as f64;
        let expected = (20.0f64.powi(2) + 500.0f64.powi(2)) / 2.0;
        assert!((mean_sq / expected - 1.0).abs() < 0.01, "{mean_sq} vs {expected}");
    }

    #[test]
    fn fading_is_unit_mean() {
        let cfg = ScenarioConfig { num_users: 1, ..Default::default() };
        let r = ChannelRealization::generate(&cfg, 9).unwrap();
        let row = r.fading_row(0, 100_000);
        let mean = row.iter().sum::<f64>() / row.len() as f64;
        assert!((mean - 1.0).abs() < 0.01, "{mean}");
        assert!(row.iter().all(|&g| g > 0.0));
    }

    #[test]
    fn deterministic_limb_matches_path_loss() {
        let cfg = ScenarioConfig { num_users: 3, shadowing_sigma_db: 0.0, ..Default::default() };
        let mut r = ChannelRealization::generate(&cfg, 4).unwrap();
        r.fading = Fading::Unit;
        let cnr = realize_cnrs(&cfg, &r, 1).unwrap();
        for (k, row) in cnr.iter().enumerate() {
            let expected = path_loss_linear(r.positions[k]).unwrap() / cfg.noise_power_watt(1);
            assert_eq!(row[0], expected);
        }
    }

    #[test]
    fn same_seed_same_realization() {
        let cfg = ScenarioConfig::default();
        let a = ChannelRealization::generate(&cfg, 77).unwrap();
        let b = ChannelRealization::generate(&cfg, 77).unwrap();
        assert_eq!(a, b);
        assert_eq!(realize_cnrs(&cfg, &a, 8).unwrap(), realize_cnrs(&cfg, &b, 8).unwrap());
        let c = ChannelRealization::generate(&cfg, 78).unwrap();
        assert_ne!(a.positions, c.positions);
    }

    #[test]
    fn geometry_does_not_depend_on_user_count() {
        let small = ScenarioConfig { num_users: 5, ..Default::default() };
        let big = ScenarioConfig { num_users: 30, ..Default::default() };
        let a = ChannelRealization::generate(&small, 11).unwrap();
        let b = ChannelRealization::generate(&big, 11).unwrap();
        assert_eq!(a.positions[..], b.positions[..5]);
        assert_eq!(a.large_scale[..], b.large_scale[..5]);
    }

    #[test]
    fn doubling_subchannels_doubles_cnr_for_fixed_gains() {
        let cfg = ScenarioConfig { num_users: 4, ..Default::default() };
        let mut r = ChannelRealization::generate(&cfg, 5).unwrap();
        r.fading = Fading::Unit;
        let one = realize_cnrs(&cfg, &r, 4).unwrap();
        let two = realize_cnrs(&cfg, &r, 8).unwrap();
        for (a, b) in one.iter().zip(&two) {
            assert_relative_eq!(b[0], 2.0 * a[0], max_relative = 1e-14);
        }
    }

    #[test]
    fn rejects_bad_scenarios() {
        assert!(ScenarioConfig { num_users: 0, ..Default::default() }.validate().is_err());
        assert!(ScenarioConfig { min_distance_m: 600.0, ..Default::default() }.validate().is_err());
        let cfg = ScenarioConfig::default();
        let r = ChannelRealization::generate(&cfg, 0).unwrap();
        assert!(realize_cnrs(&cfg, &r, 0).is_err());
    }
}
