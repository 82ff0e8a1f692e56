//! Independent verification engines: Monte-Carlo simulation of the drift-
//! uncertain Brownian motions and of repeated binary bets, plus quadrature of
//! expected utilities. The closed forms elsewhere in the crate are tested
//! against these.
//!
//! Every path (or antithetic pair) draws from its own ChaCha stream keyed by
//! `(seed, index)`, and per-path results are reduced in index order, so the
//! statistics are a bitwise-deterministic function of the seed and config
//! whatever the thread count. `GMV_ALLOC_THREADS` caps the worker pool.

mod bessel;
mod kde;
mod paths;
mod quadrature;

pub use bessel::{bessel_k, gamma_lognormal_log_density, gamma_lognormal_log_moments, ln_bessel_k, DensityMoments};
pub use kde::kde_mode;
pub use paths::{simulate_abm, simulate_binary, simulate_gbm, AbmStats, BetSource, GbmStats};
pub use quadrature::{expected_utility_quadrature, Affine, DensitySpec, QuadratureResult};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

pub const THREADS_ENV: &str = "GMV_ALLOC_THREADS";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub n_paths: usize,
    pub dt: f64,
    pub seed: u64,
    /// Pairs each path with its mirror image (all Gaussian draws negated).
    /// `n_paths` is rounded up to an even count.
    #[serde(default)]
    pub antithetic: bool,
}

impl SimConfig {
    pub fn new(n_paths: usize, dt: f64, seed: u64, antithetic: bool) -> Result<Self> {
        let c = Self {
            n_paths,
            dt,
            seed,
            antithetic,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_paths < 1 {
            return domain("n_paths must be at least 1");
        }
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return domain(format!("dt must be positive, got {}", self.dt));
        }
        Ok(())
    }

    fn units(&self) -> usize {
        if self.antithetic {
            self.n_paths.div_ceil(2)
        } else {
            self.n_paths
        }
    }
}

/// Sample statistics of one simulated quantity. Standard errors treat each
/// antithetic pair as one independent unit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathStats {
    pub n: usize,
    pub sample_mean: f64,
    pub sample_var: f64,
    pub sample_mode_kde: f64,
    pub mean_se: f64,
    pub var_se: f64,
}

impl PathStats {
    /// Summarizes `values`; when `paired`, consecutive entries `(2i, 2i+1)` are
    /// antithetic partners.
    pub fn from_values(values: &[f64], paired: bool) -> Self {
        let n = values.len();
        let mean = neumaier_sum(values.iter().copied()) / n as f64;
        let ss = neumaier_sum(values.iter().map(|x| (x - mean) * (x - mean)));
        let var = if n > 1 { ss / (n - 1) as f64 } else { 0.0 };
        let chunk = if paired { 2 } else { 1 };
        let unit_means: Vec<f64> = values
            .chunks(chunk)
            .map(|c| c.iter().sum::<f64>() / c.len() as f64)
            .collect();
        let unit_sq: Vec<f64> = values
            .chunks(chunk)
            .map(|c| c.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / c.len() as f64)
            .collect();
        Self {
            n,
            sample_mean: mean,
            sample_var: var,
            sample_mode_kde: kde_mode(values),
            mean_se: standard_error(&unit_means),
            var_se: standard_error(&unit_sq),
        }
    }
}

fn standard_error(units: &[f64]) -> f64 {
    let m = units.len();
    if m < 2 {
        return 0.0;
    }
    let mean = neumaier_sum(units.iter().copied()) / m as f64;
    let ss = neumaier_sum(units.iter().map(|x| (x - mean) * (x - mean)));
    (ss / ((m - 1) as f64 * m as f64)).sqrt()
}

fn neumaier_sum(it: impl Iterator<Item = f64>) -> f64 {
    let (mut s, mut c) = (0.0f64, 0.0f64);
    for x in it {
        let t = s + x;
        if s.abs() >= x.abs() {
            c += (s - t) + x;
        } else {
            c += (x - t) + s;
        }
        s = t;
    }
    s + c
}

/// Runs `op` on a pool sized by `GMV_ALLOC_THREADS` when it is set.
fn with_pool<R: Send>(op: impl FnOnce() -> R + Send) -> R {
    let threads = std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|n| *n >= 1);
    match threads.and_then(|n| rayon::ThreadPoolBuilder::new().num_threads(n).build().ok()) {
        Some(pool) => pool.install(op),
        None => op(),
    }
}

/// Simulates `cfg.n_paths` paths. `path(rng, sign)` must scale every Gaussian
/// draw by `sign`; antithetic partners replay the same stream with `sign = −1`.
fn simulate<const K: usize, F>(cfg: &SimConfig, path: F) -> Vec<[f64; K]>
where
    F: Fn(&mut ChaCha8Rng, f64) -> [f64; K] + Sync,
{
    let base = ChaCha8Rng::seed_from_u64(cfg.seed);
    let units = cfg.units();
    let per_unit = |i: usize| {
        let mut rng = base.clone();
        rng.set_stream(i as u64);
        if cfg.antithetic {
            let mut mirror = rng.clone();
            let a = path(&mut rng, 1.0);
            let b = path(&mut mirror, -1.0);
            vec![a, b]
        } else {
            vec![path(&mut rng, 1.0)]
        }
    };
    with_pool(|| {
        (0..units)
            .into_par_iter()
            .with_min_len(1024)
            .flat_map_iter(per_unit)
            .collect()
    })
}
