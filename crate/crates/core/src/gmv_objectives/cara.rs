use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::MomentPair;
use crate::error::{domain, Error, Result};
use crate::linalg::quad_form;
use crate::market_model::{Family, ReturnModel};

/// Univariate return model for the CARA moment formulas. The variant is chosen
/// by the caller; nothing is inferred from zero-valued parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "case", rename_all = "snake_case", deny_unknown_fields)]
pub enum CaraModel {
    /// `X ~ N(μ, σ²)`
    Known { mu: f64, sigma2: f64 },
    /// `X ~ N(μ, σ²)`, `μ ~ N(μ₀, σ₀²)`
    UncertainMean { mu0: f64, sigma2: f64, sigma0_2: f64 },
    /// As above with `s² ~ Γ(α/2, 2σ²/α)` in place of σ².
    GammaVariance {
        mu0: f64,
        sigma2: f64,
        sigma0_2: f64,
        alpha: f64,
    },
}

impl CaraModel {
    fn validate(&self) -> Result<()> {
        let (s2, s02) = match *self {
            CaraModel::Known { sigma2, .. } => (sigma2, 0.0),
            CaraModel::UncertainMean { sigma2, sigma0_2, .. } => (sigma2, sigma0_2),
            CaraModel::GammaVariance {
                sigma2,
                sigma0_2,
                alpha,
                ..
            } => {
                if !(alpha > 0.0) {
                    return domain(format!("alpha must be positive, got {alpha}"));
                }
                (sigma2, sigma0_2)
            }
        };
        if !(s2 >= 0.0) || !(s02 >= 0.0) {
            return domain("variances must be non-negative");
        }
        Ok(())
    }

    /// `ln E[exp(−c X)]`, or `None` outside the Gamma-mixture domain.
    fn log_mgf(&self, c: f64) -> Option<f64> {
        match *self {
            CaraModel::Known { mu, sigma2 } => Some(-c * mu + 0.5 * c * c * sigma2),
            CaraModel::UncertainMean { mu0, sigma2, sigma0_2 } => Some(-c * mu0 + 0.5 * c * c * (sigma2 + sigma0_2)),
            CaraModel::GammaVariance {
                mu0,
                sigma2,
                sigma0_2,
                alpha,
            } => {
                let x = c * c * sigma2 / alpha;
                (x < 1.0).then(|| -c * mu0 + 0.5 * c * c * sigma0_2 - 0.5 * alpha * (-x).ln_1p())
            }
        }
    }
}

/// Mean and variance of `U_a(wX) = (1 − e^{−awX})/a`.
pub fn cara_moments_uni(model: &CaraModel, a: f64, w: f64) -> Result<MomentPair> {
    model.validate()?;
    if !(a > 0.0) {
        return domain(format!("risk aversion must be positive, got {a}"));
    }
    let c = a * w;
    let bound = |k: f64| match *model {
        CaraModel::GammaVariance { sigma2, alpha, .. } => {
            format!("alpha - {k}·a²w²σ² > 0 (alpha = {alpha}, a²w²σ² = {})", c * c * sigma2)
        }
        _ => String::new(),
    };
    let l1 = model
        .log_mgf(c)
        .ok_or_else(|| Error::MomentUndefined { bound: bound(1.0) })?;
    let l2 = model
        .log_mgf(2.0 * c)
        .ok_or_else(|| Error::MomentUndefined { bound: bound(4.0) })?;
    let mean = -l1.exp_m1() / a;
    let var = (2.0 * l1).exp() * (l2 - 2.0 * l1).exp_m1() / (a * a);
    MomentPair::new(mean, var)
}

/// Argument of the log-barrier term (`None` for the Gaussian family).
pub fn log_argument(model: &ReturnModel, a: f64, w: &DVector<f64>) -> Option<f64> {
    let q = quad_form(model.sigma(), w);
    match model.family() {
        Family::Gaussian => None,
        Family::GaussianWishart => Some(1.0 - a * a / model.alpha().unwrap_or(f64::INFINITY) * q),
        Family::Ald => Some(1.0 - 0.5 * a * a * q + a * model.mu_a().dot(w)),
    }
}

fn check(model: &ReturnModel, a: f64, w: &DVector<f64>) -> Result<Option<f64>> {
    if !(a > 0.0) {
        return domain(format!("risk aversion must be positive, got {a}"));
    }
    if w.len() != model.n_assets() {
        return Err(Error::Dimension(format!(
            "weight vector has {} entries, model has {} assets",
            w.len(),
            model.n_assets()
        )));
    }
    let arg = log_argument(model, a, w);
    match arg {
        Some(l) if !(l > 0.0) => Err(Error::LogDomain {
            argument: l,
            quad_form: quad_form(model.sigma(), w),
        }),
        _ => Ok(arg),
    }
}

/// Certainty-equivalent objective maximized by the allocators:
/// `(1 − Σw)r₀ + μ₀ᵀw − (a/2)wᵀΣ₀w` plus the family's risk term.
pub fn cara_objective_multi(model: &ReturnModel, a: f64, w: &DVector<f64>) -> Result<f64> {
    let arg = check(model, a, w)?;
    let base = (1.0 - w.sum()) * model.r0() + model.mu0().dot(w) - 0.5 * a * quad_form(model.sigma0(), w);
    let risk = match (model.family(), arg) {
        (Family::GaussianWishart, Some(l)) => model.alpha().unwrap_or(f64::INFINITY) / (2.0 * a) * l.ln(),
        (Family::Ald, Some(l)) => l.ln() / a,
        _ => -0.5 * a * quad_form(model.sigma(), w),
    };
    Ok(base + risk)
}

/// Analytic gradient of [`cara_objective_multi`].
pub fn cara_gradient_multi(model: &ReturnModel, a: f64, w: &DVector<f64>) -> Result<DVector<f64>> {
    let arg = check(model, a, w)?;
    let sw = model.sigma() * w;
    let mut g = model.excess() - model.sigma0() * w * a;
    match (model.family(), arg) {
        (Family::GaussianWishart, Some(l)) => g -= sw * (a / l),
        (Family::Ald, Some(l)) => g += (model.mu_a() - sw * a) / l,
        _ => g -= sw * a,
    }
    Ok(g)
}

/// Analytic Hessian of [`cara_objective_multi`].
pub fn cara_hessian_multi(model: &ReturnModel, a: f64, w: &DVector<f64>) -> Result<DMatrix<f64>> {
    let arg = check(model, a, w)?;
    let s = model.sigma();
    let mut h = -model.sigma0() * a;
    match (model.family(), arg) {
        (Family::GaussianWishart, Some(l)) => {
            let u = -(s * w) * (a / l);
            let alpha = model.alpha().unwrap_or(f64::INFINITY);
            h -= s * (a / l) + &u * u.transpose() * (2.0 * a / alpha);
        }
        (Family::Ald, Some(l)) => {
            let u = (model.mu_a() - s * w * a) / l;
            h -= s * (a / l) + &u * u.transpose() * a;
        }
        _ => h -= s * a,
    }
    Ok(h)
}

/// Mean and variance of the CARA utility of next-period portfolio return,
/// `E[U] = (1 − M(a))/a`, `Var[U] = (M(2a) − M(a)²)/a²`, with
/// `ln M(a) = −a·CE_a(w)`. Reported only; the allocators never use it.
pub fn cara_moments_multi(model: &ReturnModel, a: f64, w: &DVector<f64>) -> Result<MomentPair> {
    let l1 = -a * cara_objective_multi(model, a, w)?;
    let l2 = match cara_objective_multi(model, 2.0 * a, w) {
        Ok(v) => -2.0 * a * v,
        Err(Error::LogDomain { argument, .. }) => {
            return Err(Error::MomentUndefined {
                bound: format!("log argument at 2a positive (got {argument:.6e})"),
            })
        }
        Err(e) => return Err(e),
    };
    let mean = -l1.exp_m1() / a;
    let var = (2.0 * l1).exp() * (l2 - 2.0 * l1).exp_m1() / (a * a);
    MomentPair::new(mean, var)
}
