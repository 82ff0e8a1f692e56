//! Utility moments and the generalized mean-variance (GMV) score
//! `E[U] - (λ/2) Var[U]`.
//!
//! Closed forms cover linear, CARA, logarithmic and CRRA utilities under
//! Gaussian or lognormal outcomes whose location (and optionally variance) is
//! itself random. [`calibration`] backs out the CARA coefficient from a
//! certainty-equivalent judgement.

mod calibration;
mod cara;
mod lognormal;

pub use calibration::{calibrate_crra_gamma, calibrate_risk_aversion, CeFamily, Gamble};
pub use cara::{
    cara_gradient_multi, cara_hessian_multi, cara_moments_multi, cara_moments_uni, cara_objective_multi, log_argument,
    CaraModel,
};
pub use lognormal::{crra_moments, linear_moments, log_utility_moments};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

/// Tolerance below zero at which a computed variance is treated as rounding
/// noise and clamped.
pub const VAR_NOISE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum UtilitySpec {
    Linear,
    Log,
    Cara { a: f64 },
    Crra { gamma: f64 },
}

impl UtilitySpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            UtilitySpec::Cara { a } if !(a > 0.0 && a.is_finite()) => {
                domain(format!("CARA risk aversion must be positive, got {a}"))
            }
            UtilitySpec::Crra { gamma } if !(gamma > 0.0 && gamma.is_finite()) || gamma == 1.0 => domain(format!(
                "CRRA gamma must be positive and differ from 1 (use log utility), got {gamma}"
            )),
            _ => Ok(()),
        }
    }

    /// Utility of outcome `x`. Log and CRRA take wealth multiples (`x > 0`).
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            UtilitySpec::Linear => x,
            UtilitySpec::Log => x.ln(),
            UtilitySpec::Cara { a } => -(-a * x).exp_m1() / a,
            UtilitySpec::Crra { gamma } => {
                let k = 1.0 - gamma;
                (k * x.ln()).exp_m1() / k
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GmvParams {
    pub utility: UtilitySpec,
    pub lambda: f64,
    pub horizon: f64,
}

impl GmvParams {
    pub fn new(utility: UtilitySpec, lambda: f64, horizon: f64) -> Result<Self> {
        utility.validate()?;
        if !(lambda >= 0.0) || !lambda.is_finite() {
            return domain(format!("lambda must be finite and non-negative, got {lambda}"));
        }
        if !(horizon > 0.0) {
            return domain(format!("horizon must be positive, got {horizon}"));
        }
        Ok(Self {
            utility,
            lambda,
            horizon,
        })
    }
}

/// Mean and variance of a utility (or of log-wealth).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentPair {
    pub mean: f64,
    pub var: f64,
}

impl MomentPair {
    /// Rejects NaN and clearly negative variances; tiny negative values from
    /// cancellation are clamped to zero.
    pub fn new(mean: f64, var: f64) -> Result<Self> {
        if mean.is_nan() || var.is_nan() {
            return domain("moment is NaN");
        }
        if var < -VAR_NOISE * (1.0 + mean.abs()) {
            return domain(format!("negative variance {var}"));
        }
        Ok(Self {
            mean,
            var: var.max(0.0),
        })
    }

    pub fn sd(&self) -> f64 {
        self.var.sqrt()
    }
}

/// `mean − (λ/2)·var`; exactly the mean when `λ = 0`.
pub fn gmv_score(m: MomentPair, lambda: f64) -> f64 {
    if lambda == 0.0 {
        m.mean
    } else {
        m.mean - 0.5 * lambda * m.var
    }
}

/// Second-order Taylor GMV of a smooth utility of `X ~ N(μ, Σ)`:
/// `[U(μ) + ½tr(HΣ)] − (λ/2)[gᵀΣg + ½tr((HΣ)²)]`.
pub fn taylor_gmv(
    value_at_mean: f64,
    gradient: &DVector<f64>,
    hessian: &DMatrix<f64>,
    sigma: &DMatrix<f64>,
    lambda: f64,
) -> Result<f64> {
    let n = gradient.len();
    if hessian.shape() != (n, n) || sigma.shape() != (n, n) {
        return Err(Error::Dimension(format!(
            "gradient has {n} entries, hessian is {:?}, sigma is {:?}",
            hessian.shape(),
            sigma.shape()
        )));
    }
    let hs = hessian * sigma;
    let mean = value_at_mean + 0.5 * hs.trace();
    let var = (gradient.transpose() * sigma * gradient)[(0, 0)] + 0.5 * (&hs * &hs).trace();
    Ok(mean - 0.5 * lambda * var)
}
