use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Binomial, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{simulate, PathStats, SimConfig};
use crate::error::{domain, Result};
use crate::kelly::{BayesBinaryBet, BinaryBet};
use crate::market_model::{HorizonSpec, PosteriorBelief};

/// Terminal statistics of the arithmetic process plus statistics of the
/// increment over `[t0, t0 + dt]` of the horizon spec, measured on the same
/// paths.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AbmStats {
    pub terminal: PathStats,
    pub increment: PathStats,
    pub n_steps: usize,
}

/// `log_terminal` is `ln(S_T/S_0)`; `wealth` is `S_T`, whose KDE mode is the
/// quantity of interest for mode suppression.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GbmStats {
    pub log_terminal: PathStats,
    pub log_increment: PathStats,
    pub wealth: PathStats,
    pub n_steps: usize,
}

/// Step indices bracketing the simulation: total steps and the increment window.
fn step_plan(horizon: &HorizonSpec, cfg: &SimConfig) -> Result<(usize, usize, usize)> {
    cfg.validate()?;
    horizon.validate()?;
    let steps = |t: f64| (t / cfg.dt).round() as usize;
    let n = steps(horizon.horizon).max(1);
    let k0 = steps(horizon.t0);
    let k1 = steps(horizon.t0 + horizon.dt);
    if k1 > n || k1 <= k0 {
        return domain(format!(
            "increment window [{}, {}] must lie inside the horizon {} on the dt = {} grid",
            horizon.t0,
            horizon.t0 + horizon.dt,
            horizon.horizon,
            cfg.dt
        ));
    }
    Ok((n, k0, k1))
}

/// Euler path of `dX = μ dt + σ dW`, `dμ = σ_μ dB`, `μ(0) ~ N(μ_pd, σ_pd²)`.
/// `ito` is subtracted from the drift each step (½σ² for log prices).
/// Returns `[X_n − X_0, X_{k1} − X_{k0}]`.
#[allow(clippy::too_many_arguments)]
fn drift_path(
    rng: &mut ChaCha8Rng,
    sign: f64,
    belief: &PosteriorBelief,
    sigma: f64,
    ito: f64,
    dt: f64,
    (n, k0, k1): (usize, usize, usize),
) -> [f64; 2] {
    let sq = dt.sqrt();
    let sd_pd = belief.sigma_pd2().sqrt();
    let sd_mu = belief.sigma_mu2().sqrt();
    let z0: f64 = rng.sample(StandardNormal);
    let mut mu = belief.mu_pd() + sd_pd * sign * z0;
    let (mut x, mut x_k0, mut x_k1) = (0.0, 0.0, 0.0);
    for k in 0..n {
        if k == k0 {
            x_k0 = x;
        }
        let eps: f64 = rng.sample(StandardNormal);
        let eta: f64 = rng.sample(StandardNormal);
        x += (mu - ito) * dt + sigma * sq * sign * eps;
        mu += sd_mu * sq * sign * eta;
        if k + 1 == k1 {
            x_k1 = x;
        }
    }
    [x, x_k1 - x_k0]
}

fn split<const K: usize>(rows: &[[f64; K]], col: usize) -> Vec<f64> {
    rows.iter().map(|r| r[col]).collect()
}

/// Simulates the arithmetic drift-uncertain Brownian motion.
pub fn simulate_abm(
    x0: f64,
    belief: &PosteriorBelief,
    sigma2: f64,
    horizon: &HorizonSpec,
    cfg: &SimConfig,
) -> Result<AbmStats> {
    if !(sigma2 >= 0.0) || !x0.is_finite() {
        return domain("simulate_abm needs finite x0 and sigma2 >= 0");
    }
    let plan = step_plan(horizon, cfg)?;
    let sigma = sigma2.sqrt();
    let rows = simulate(cfg, |rng, sign| {
        let [x, inc] = drift_path(rng, sign, belief, sigma, 0.0, cfg.dt, plan);
        [x0 + x, inc]
    });
    Ok(AbmStats {
        terminal: PathStats::from_values(&split(&rows, 0), cfg.antithetic),
        increment: PathStats::from_values(&split(&rows, 1), cfg.antithetic),
        n_steps: plan.0,
    })
}

/// Simulates `ln S` with drift `μ − σ²/2` and the same drift dynamics.
pub fn simulate_gbm(
    x0: f64,
    belief: &PosteriorBelief,
    sigma2: f64,
    horizon: &HorizonSpec,
    cfg: &SimConfig,
) -> Result<GbmStats> {
    if !(x0 > 0.0) || !(sigma2 >= 0.0) {
        return domain("simulate_gbm needs x0 > 0 and sigma2 >= 0");
    }
    let plan = step_plan(horizon, cfg)?;
    let sigma = sigma2.sqrt();
    let rows = simulate(cfg, |rng, sign| {
        let [y, inc] = drift_path(rng, sign, belief, sigma, 0.5 * sigma2, cfg.dt, plan);
        [y, inc, x0 * y.exp()]
    });
    Ok(GbmStats {
        log_terminal: PathStats::from_values(&split(&rows, 0), cfg.antithetic),
        log_increment: PathStats::from_values(&split(&rows, 1), cfg.antithetic),
        wealth: PathStats::from_values(&split(&rows, 2), cfg.antithetic),
        n_steps: plan.0,
    })
}

/// Source of win counts for [`simulate_binary`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BetSource {
    /// Known win probability, `trials` rounds.
    Fixed { bet: BinaryBet, trials: u64 },
    /// Win probability drawn per path from the Beta posterior.
    Bayes { bet: BayesBinaryBet },
}

/// Statistics of `ln(X_N/X_0) = K ln(1+bf) + (N−K) ln(1−af)`. There are no
/// Gaussian draws, so antithetic pairing is ignored.
pub fn simulate_binary(source: &BetSource, f: f64, cfg: &SimConfig) -> Result<PathStats> {
    cfg.validate()?;
    let (b, a, n) = match source {
        BetSource::Fixed { bet, trials } => {
            bet.validate()?;
            (bet.b, bet.a_loss, *trials)
        }
        BetSource::Bayes { bet } => {
            bet.validate()?;
            (bet.b, bet.a_loss, bet.n_trials)
        }
    };
    if !(f > -1.0 / b && f < 1.0 / a) {
        return domain(format!("stake {f} outside (-1/b, 1/a_loss)"));
    }
    let win = (b * f).ln_1p();
    let loss = (-a * f).ln_1p();
    let log_wealth = |k: u64| k as f64 * win + (n - k) as f64 * loss;
    let cfg = SimConfig {
        antithetic: false,
        ..*cfg
    };
    let rows = match *source {
        BetSource::Fixed { bet, .. } => {
            let binom = Binomial::new(n, bet.p).map_err(|e| crate::Error::Domain(e.to_string()))?;
            simulate(&cfg, |rng, _| [log_wealth(binom.sample(rng))])
        }
        BetSource::Bayes { bet } => {
            let (al, be) = bet.posterior();
            let beta = Beta::new(al, be).map_err(|e| crate::Error::Domain(e.to_string()))?;
            simulate(&cfg, |rng, _| {
                let p = beta.sample(rng);
                let k = Binomial::new(n, p).map_or(0, |d| d.sample(rng));
                [log_wealth(k)]
            })
        }
    };
    Ok(PathStats::from_values(&split(&rows, 0), false))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_per_seed() {
        let belief = PosteriorBelief::new(0.05, 0.0025, 0.01, 1.0).unwrap();
        let h = HorizonSpec::single(1.0).unwrap();
        let cfg = SimConfig::new(2000, 0.05, 42, true).unwrap();
        let a = simulate_abm(0.0, &belief, 0.04, &h, &cfg).unwrap();
        let b = simulate_abm(0.0, &belief, 0.04, &h, &cfg).unwrap();
        assert_eq!(a, b);
        let c = simulate_abm(0.0, &belief, 0.04, &h, &SimConfig { seed: 43, ..cfg }).unwrap();
        assert_ne!(a.terminal.sample_var, c.terminal.sample_var);
    }

    #[test]
    fn antithetic_pairs_mirror_exactly() {
        // with zero drift every pair sums to zero
        let belief = PosteriorBelief::new(0.0, 0.0025, 0.01, 1.0).unwrap();
        let h = HorizonSpec::single(1.0).unwrap();
        let cfg = SimConfig::new(1000, 0.1, 3, true).unwrap();
        let s = simulate_abm(0.0, &belief, 0.04, &h, &cfg).unwrap();
        assert!(s.terminal.sample_mean.abs() < 1e-15);
        assert!(s.terminal.mean_se < 1e-15);
    }

    #[test]
    fn zero_stake_is_flat() {
        let bet = BinaryBet::new(0.6, 1.0, 1.0, 0.0).unwrap();
        let cfg = SimConfig::new(100, 1.0, 1, false).unwrap();
        let s = simulate_binary(&BetSource::Fixed { bet, trials: 10 }, 0.0, &cfg).unwrap();
        assert_eq!((s.sample_mean, s.sample_var), (0.0, 0.0));
    }

    #[test]
    fn window_outside_horizon_rejected() {
        let belief = PosteriorBelief::certain(0.0);
        let h = HorizonSpec {
            horizon: 1.0,
            dt: 0.5,
            t0: 0.75,
        };
        let cfg = SimConfig::new(10, 0.25, 1, false).unwrap();
        assert!(simulate_abm(0.0, &belief, 0.04, &h, &cfg).is_err());
    }
}
