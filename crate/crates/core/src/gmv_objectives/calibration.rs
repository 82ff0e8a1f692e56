use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::numerics::{bisect, ROOT_MAX_ITER, ROOT_TOL};

const PROB_TOL: f64 = 1e-12;
const A_MIN: f64 = 1e-6;
/// Keeps the upper bisection end strictly inside the log domain.
const A_MAX_SHRINK: f64 = 1e-12;

/// A discrete gamble with a stated certainty equivalent. `sigma0_2` is the
/// variance of the gamble's expected value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GambleDoc")]
pub struct Gamble {
    outcomes: Vec<f64>,
    probs: Vec<f64>,
    ce: f64,
    sigma0_2: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct GambleDoc {
    outcomes: Vec<f64>,
    probs: Vec<f64>,
    ce: f64,
    #[serde(default)]
    sigma0_2: f64,
}

impl TryFrom<GambleDoc> for Gamble {
    type Error = Error;
    fn try_from(d: GambleDoc) -> Result<Self> {
        Gamble::new(d.outcomes, d.probs, d.ce, d.sigma0_2)
    }
}

impl Gamble {
    pub fn new(outcomes: Vec<f64>, probs: Vec<f64>, ce: f64, sigma0_2: f64) -> Result<Self> {
        if outcomes.len() < 2 || outcomes.len() != probs.len() {
            return Err(Error::Dimension(format!(
                "gamble needs at least two outcomes with matching probabilities (got {} and {})",
                outcomes.len(),
                probs.len()
            )));
        }
        if probs.iter().any(|p| !(*p >= 0.0)) {
            return domain("gamble probabilities must be non-negative");
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > PROB_TOL {
            return domain(format!("gamble probabilities sum to {total}, not 1"));
        }
        if outcomes.iter().any(|x| !x.is_finite()) || !ce.is_finite() {
            return domain("gamble outcomes and CE must be finite");
        }
        if !(sigma0_2 >= 0.0) {
            return domain("sigma0_2 must be non-negative");
        }
        Ok(Self {
            outcomes,
            probs,
            ce,
            sigma0_2,
        })
    }

    pub fn outcomes(&self) -> &[f64] {
        &self.outcomes
    }
    pub fn probs(&self) -> &[f64] {
        &self.probs
    }
    pub fn ce(&self) -> f64 {
        self.ce
    }
    pub fn sigma0_2(&self) -> f64 {
        self.sigma0_2
    }

    pub fn mean(&self) -> f64 {
        self.outcomes.iter().zip(&self.probs).map(|(x, p)| p * x).sum()
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.outcomes
            .iter()
            .zip(&self.probs)
            .map(|(x, p)| p * (x - m).powi(2))
            .sum()
    }
}

/// Return distribution assumed when converting a CE into a CARA coefficient.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum CeFamily {
    Gaussian,
    /// Asymmetric Laplace with asymmetry `mu_a`, matched to the gamble's mean
    /// and variance: location `μ_c − μ_a`, scale² `σ_c² − μ_a²`.
    Ald {
        mu_a: f64,
    },
    /// Gaussian with Gamma-distributed variance of shape α/2.
    GammaVar {
        alpha: f64,
    },
}

/// CARA coefficient `a` that makes the gamble's expected utility equal the
/// utility of its certainty equivalent.
pub fn calibrate_risk_aversion(g: &Gamble, family: CeFamily) -> Result<f64> {
    let mu_c = g.mean();
    let var_c = g.variance();
    let s02 = g.sigma0_2;
    let xc = g.ce;
    if xc >= mu_c {
        return Err(Error::RiskSeeking { ce: xc, mean: mu_c });
    }
    match family {
        CeFamily::Gaussian => {
            let denom = var_c + s02;
            if !(denom > 0.0) {
                return domain("gamble has zero variance");
            }
            Ok(2.0 * (mu_c - xc) / denom)
        }
        CeFamily::Ald { mu_a } => {
            let s2 = var_c - mu_a * mu_a;
            if !(s2 > 0.0) {
                return domain(format!(
                    "ALD moment matching needs variance {var_c} above mu_a² = {}",
                    mu_a * mu_a
                ));
            }
            let mu = mu_c - mu_a;
            let a_max = (mu_a + (mu_a * mu_a + 2.0 * s2).sqrt()) / s2;
            let ce = |a: f64| mu - 0.5 * a * s02 + (1.0 - 0.5 * a * a * s2 + a * mu_a).ln() / a;
            solve_ce(ce, xc, a_max, "ALD")
        }
        CeFamily::GammaVar { alpha } => {
            if !(alpha > 0.0) {
                return domain(format!("alpha must be positive, got {alpha}"));
            }
            if !(var_c > 0.0) {
                return domain("gamble has zero variance");
            }
            let a_max = (alpha / var_c).sqrt();
            let ce = |a: f64| mu_c - 0.5 * a * s02 + alpha / (2.0 * a) * (-a * a * var_c / alpha).ln_1p();
            solve_ce(ce, xc, a_max, "Gamma-variance")
        }
    }
}

fn solve_ce<F: Fn(f64) -> f64>(ce: F, xc: f64, a_max: f64, family: &'static str) -> Result<f64> {
    let hi = a_max * (1.0 - A_MAX_SHRINK);
    let r = |a: f64| ce(a) - xc;
    if !(A_MIN < hi) || !(r(A_MIN) > 0.0) || !(r(hi) < 0.0) {
        return Err(Error::CeInfeasible { family });
    }
    bisect(r, A_MIN, hi, ROOT_TOL, ROOT_MAX_ITER)
}

/// Relative risk aversion γ whose CRRA certainty equivalent of a lognormal
/// outcome equals `x_ce`: solves `x_ce = exp(μ + (1 − γ)σ²/2)`.
pub fn calibrate_crra_gamma(x_ce: f64, mu_ln: f64, sigma_ln2: f64) -> Result<f64> {
    if !(x_ce > 0.0) || !(sigma_ln2 > 0.0) {
        return domain("CRRA calibration needs x_ce > 0 and sigma_ln2 > 0");
    }
    let gamma = 1.0 - 2.0 * (x_ce.ln() - mu_ln) / sigma_ln2;
    if !(gamma > 0.0) {
        return domain(format!("certainty equivalent implies non-positive gamma {gamma}"));
    }
    Ok(gamma)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn worked_gamble(ce: f64) -> Gamble {
        Gamble::new(vec![1.21, 0.90], vec![2.0 / 3.0, 1.0 / 3.0], ce, 0.0).unwrap()
    }

    #[test]
    fn gamble_moments() {
        let g = worked_gamble(1.07);
        assert!((g.mean() - 1.106_666_666_666_666_7).abs() < 1e-15);
        assert!((g.variance().sqrt() - 0.146_135_401_445_219_8).abs() < 1e-12);
    }

    #[test]
    fn gaussian_calibration() {
        let a = calibrate_risk_aversion(&worked_gamble(1.07), CeFamily::Gaussian).unwrap();
        assert!((a - 3.433_92).abs() < 1e-5);
    }

    #[test]
    fn risk_neutral_limit() {
        let g = worked_gamble(1.106_666_666_666_666_7 - 1e-9);
        let a = calibrate_risk_aversion(&g, CeFamily::Gaussian).unwrap();
        assert!(a < 1e-6);
    }

    #[test]
    fn risk_seeking_rejected() {
        let g = worked_gamble(1.2);
        assert!(matches!(
            calibrate_risk_aversion(&g, CeFamily::Gaussian),
            Err(Error::RiskSeeking { .. })
        ));
    }

    #[test]
    fn gamma_variance_concentrates_to_gaussian() {
        let g = worked_gamble(1.07);
        let a0 = calibrate_risk_aversion(&g, CeFamily::Gaussian).unwrap();
        let a1 = calibrate_risk_aversion(&g, CeFamily::GammaVar { alpha: 1e8 }).unwrap();
        assert!(((a1 - a0) / a0).abs() < 1e-5);
    }

    #[test]
    fn fat_tails_lower_calibrated_aversion() {
        let g = worked_gamble(1.07);
        let a0 = calibrate_risk_aversion(&g, CeFamily::Gaussian).unwrap();
        let aw = calibrate_risk_aversion(&g, CeFamily::GammaVar { alpha: 4.0 }).unwrap();
        let al = calibrate_risk_aversion(&g, CeFamily::Ald { mu_a: 0.0 }).unwrap();
        assert!(aw < a0 && al < a0);
        // residual of the Laplace CE equation at the root
        let s2 = g.variance();
        let ce = g.mean() + (1.0 - 0.5 * al * al * s2).ln() / al;
        assert!((ce - 1.07).abs() < 1e-10);
    }

    #[test]
    fn ald_infeasible_when_skew_too_large() {
        let g = worked_gamble(1.07);
        assert!(calibrate_risk_aversion(&g, CeFamily::Ald { mu_a: 0.2 }).is_err());
    }

    #[test]
    fn gamble_validation() {
        assert!(Gamble::new(vec![1.0], vec![1.0], 0.9, 0.0).is_err());
        assert!(Gamble::new(vec![1.0, 2.0], vec![0.5, 0.6], 0.9, 0.0).is_err());
        assert!(Gamble::new(vec![1.0, 2.0], vec![-0.5, 1.5], 0.9, 0.0).is_err());
    }

    #[test]
    fn crra_gamma_round_trip() {
        let (mu, s2) = (0.05f64, 0.04);
        let x = (mu + 0.5 * (1.0 - 2.5) * s2).exp();
        assert!((calibrate_crra_gamma(x, mu, s2).unwrap() - 2.5).abs() < 1e-12);
    }
}
