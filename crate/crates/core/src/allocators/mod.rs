//! Diversification weights.
//!
//! Closed forms exist when the drift is known (Σ₀ = 0): the Gaussian
//! mean-variance solution, and the same direction rescaled by `g_W` (Wishart
//! covariance noise) or `g_ALD` (asymmetric Laplace, plus a skew term).
//! [`solve_numeric`] maximizes the exact certainty-equivalent objective for
//! any family, optionally on the simplex. Robust variants (two-state regimes,
//! risk parity, minimax) live in their own submodules.

pub mod asymptotics;
mod minimax;
mod numeric;
mod parity;
mod regimes;

pub use minimax::{minimax_allocate, MinimaxMode, MinimaxResult, TIE_TOL};
pub use numeric::{kkt_residual, solve_numeric, Constraints};
pub use parity::{risk_contributions, risk_parity};
pub use regimes::{equicorr_residual_risk, two_state_allocate, two_state_objective, RegimeSpec, StressCovariance};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::gmv_objectives::cara_gradient_multi;
use crate::linalg::{quad_form, spd_solve};
use crate::market_model::{Family, ReturnModel};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    pub grad_tol: f64,
    pub max_iter: usize,
    pub backtrack_factor: f64,
    /// Smallest log-barrier argument a trial step may reach.
    pub domain_margin: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            grad_tol: 1e-10,
            max_iter: 500,
            backtrack_factor: 0.5,
            domain_margin: 1e-12,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.grad_tol > 0.0) || !(self.domain_margin > 0.0) || self.max_iter == 0 {
            return domain("solver tolerances and iteration cap must be positive");
        }
        if !(self.backtrack_factor > 0.0 && self.backtrack_factor < 1.0) {
            return domain(format!(
                "backtrack_factor must lie in (0, 1), got {}",
                self.backtrack_factor
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveMethod {
    ClosedForm,
    Newton,
    ActiveSetNewton,
}

/// Weights with the portfolio statistics fed to the leverage stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllocationResult {
    pub w: Vec<f64>,
    pub cash: f64,
    /// Expected excess return `wᵀ(μ₀ − r₀)`.
    pub mu_p: f64,
    /// Drift-uncertainty variance `wᵀΣ₀w`.
    pub sigma0_p2: f64,
    /// Total variance `wᵀ(Σ + Σ₀)w`.
    pub sigma_p2: f64,
    pub sharpe: f64,
    /// Gradient norm (unconstrained) or KKT residual (constrained).
    pub residual: f64,
    pub iterations: usize,
    pub method: SolveMethod,
}

impl AllocationResult {
    pub(crate) fn from_parts(
        w: &DVector<f64>,
        excess: &DVector<f64>,
        sigma: &DMatrix<f64>,
        sigma0: &DMatrix<f64>,
        residual: f64,
        iterations: usize,
        method: SolveMethod,
    ) -> Self {
        let mu_p = excess.dot(w);
        let sigma0_p2 = quad_form(sigma0, w);
        let sigma_p2 = quad_form(sigma, w) + sigma0_p2;
        let sharpe = if sigma_p2 > 0.0 { mu_p / sigma_p2.sqrt() } else { 0.0 };
        Self {
            w: w.iter().copied().collect(),
            cash: 1.0 - w.sum(),
            mu_p,
            sigma0_p2,
            sigma_p2,
            sharpe,
            residual,
            iterations,
            method,
        }
    }

    pub(crate) fn for_model(
        model: &ReturnModel,
        w: &DVector<f64>,
        residual: f64,
        iterations: usize,
        method: SolveMethod,
    ) -> Self {
        Self::from_parts(
            w,
            &model.excess(),
            model.sigma(),
            model.sigma0(),
            residual,
            iterations,
            method,
        )
    }

    pub fn weights(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.w)
    }
}

/// Squared Sharpe ratio `q = mᵀΣ⁻¹m` and `Σ⁻¹m`.
pub fn sharpe_sq(sigma: &DMatrix<f64>, excess: &DVector<f64>) -> Result<(f64, DVector<f64>)> {
    let x = spd_solve(sigma, excess)?;
    Ok((excess.dot(&x), x))
}

fn check_a(a: f64) -> Result<()> {
    if !(a > 0.0) || !a.is_finite() {
        return domain(format!("risk aversion must be positive, got {a}"));
    }
    Ok(())
}

fn gradient_norm(model: &ReturnModel, a: f64, w: &DVector<f64>) -> f64 {
    cara_gradient_multi(model, a, w).map_or(f64::INFINITY, |g| g.norm())
}

/// `w* = (1/a)(Σ + Σ₀)⁻¹(μ₀ − r₀)` for the Gaussian family.
pub fn solve_gaussian_closed(model: &ReturnModel, a: f64) -> Result<AllocationResult> {
    check_a(a)?;
    if model.family() != Family::Gaussian {
        return domain("solve_gaussian_closed needs the Gaussian family");
    }
    let total = model.sigma() + model.sigma0();
    let w = spd_solve(&total, &model.excess())? / a;
    Ok(AllocationResult::for_model(
        model,
        &w,
        gradient_norm(model, a, &w),
        0,
        SolveMethod::ClosedForm,
    ))
}

/// Positive root of `(q/2)g² + g − (1 + v/2) = 0`, written without
/// cancellation so `q → 0` is benign.
fn g_ald(q: f64, v: f64) -> f64 {
    (2.0 + v) / ((1.0 + q * (2.0 + v)).sqrt() + 1.0)
}

/// Positive root of `(q/α)g² + g − 1 = 0`.
fn g_wishart(q: f64, alpha: f64) -> f64 {
    2.0 * alpha / ((alpha * alpha + 4.0 * q * alpha).sqrt() + alpha)
}

/// ALD scaling factor `g = (√(1 + 2q + qv) − 1)/q`.
pub fn scaling_ald(q: f64, v: f64) -> Result<f64> {
    if !(q > 0.0) || !(v >= 0.0) || !q.is_finite() || !v.is_finite() {
        return domain(format!("scaling_ald needs q > 0 and v >= 0, got q={q}, v={v}"));
    }
    Ok(g_ald(q, v))
}

/// Wishart scaling factor `g = (√(α(4q + α)) − α)/(2q)`, in `(0, 1)`.
pub fn scaling_wishart(q: f64, alpha: f64) -> Result<f64> {
    if !(q > 0.0) || !(alpha > 0.0) || !q.is_finite() || !alpha.is_finite() {
        return domain(format!(
            "scaling_wishart needs q > 0 and alpha > 0, got q={q}, alpha={alpha}"
        ));
    }
    Ok(g_wishart(q, alpha))
}

/// Closed-form optimum for any family with Σ₀ = 0 (the Gaussian family also
/// accepts Σ₀ > 0):
/// - Wishart: `w* = g_W (1/a) Σ⁻¹m`
/// - ALD: `w* = g_ALD (1/a) Σ⁻¹m + (1/a) Σ⁻¹μ_a`, with `v = μ_aᵀΣ⁻¹μ_a`.
pub fn solve_closed(model: &ReturnModel, a: f64) -> Result<AllocationResult> {
    check_a(a)?;
    if model.family() == Family::Gaussian {
        return solve_gaussian_closed(model, a);
    }
    if model.has_drift_uncertainty() {
        return Err(Error::ClosedFormUnavailable(
            "drift uncertainty with a non-Gaussian family",
        ));
    }
    let (q, x) = sharpe_sq(model.sigma(), &model.excess())?;
    let w = match model.family() {
        Family::GaussianWishart => {
            let alpha = model.alpha().expect("validated Wishart model has alpha");
            x * (g_wishart(q, alpha) / a)
        }
        Family::Ald => {
            let y = spd_solve(model.sigma(), model.mu_a())?;
            let v = model.mu_a().dot(&y);
            (x * g_ald(q, v) + y) / a
        }
        Family::Gaussian => unreachable!(),
    };
    Ok(AllocationResult::for_model(
        model,
        &w,
        gradient_norm(model, a, &w),
        0,
        SolveMethod::ClosedForm,
    ))
}

/// Weights on the maximum-Sharpe direction scaled to volatility
/// `sigma_target`: `w = (σ_target/√q) Σ⁻¹(μ − r₀)`.
pub fn risk_budget(mu: &DVector<f64>, sigma: &DMatrix<f64>, r0: f64, sigma_target: f64) -> Result<DVector<f64>> {
    if !(sigma_target > 0.0) || !sigma_target.is_finite() {
        return domain(format!("sigma_target must be positive, got {sigma_target}"));
    }
    let excess = mu.add_scalar(-r0);
    let (q, x) = sharpe_sq(sigma, &excess)?;
    if !(q > 0.0) {
        return domain("no excess return: mu equals r0 in every asset");
    }
    Ok(x * (sigma_target / q.sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sp500(a_sigma0: f64) -> ReturnModel {
        ReturnModel::gaussian(
            DVector::from_element(1, 0.08),
            DMatrix::from_element(1, 1, 0.0225),
            DMatrix::from_element(1, 1, a_sigma0),
            0.02,
        )
        .unwrap()
    }

    #[test]
    fn worked_single_asset_allocation() {
        let r = solve_gaussian_closed(&sp500(0.0), 3.4).unwrap();
        assert!((r.w[0] - 0.06 / (3.4 * 0.0225)).abs() < 1e-15);
        assert!((r.w[0] - 0.784).abs() < 5e-4);
        assert!((r.cash - 0.216).abs() < 5e-4);
        assert!(r.residual <= 1e-10);
    }

    #[test]
    fn no_excess_return_means_no_risk() {
        let m = ReturnModel::univariate(0.02, 0.0225, 0.02).unwrap();
        assert_eq!(solve_gaussian_closed(&m, 2.0).unwrap().w, vec![0.0]);
    }

    #[test]
    fn scaling_factor_roots() {
        let g = scaling_ald(0.16, 0.0).unwrap();
        assert!((g - (1.32f64.sqrt() - 1.0) / 0.16).abs() < 1e-14);
        assert!((0.08 * g * g + g - 1.0).abs() < 1e-12);
        let g = scaling_ald(0.16, 0.04).unwrap();
        assert!((0.08 * g * g + g - 1.02).abs() < 1e-12);
        assert!((scaling_ald(1e-12, 0.0).unwrap() - 1.0).abs() < 1e-11);
        let gw = scaling_wishart(0.16, 10.0).unwrap();
        assert!((gw - ((10.0f64 * 10.64).sqrt() - 10.0) / 0.32).abs() < 1e-14);
        assert!((scaling_wishart(0.16, 1e12).unwrap() - 1.0).abs() < 1e-12);
        assert!(scaling_ald(0.0, 0.0).is_err() && scaling_wishart(0.1, 0.0).is_err());
    }

    #[test]
    fn wishart_monotone_in_alpha() {
        let gs: Vec<f64> = [1.0, 2.0, 5.0, 10.0, 100.0]
            .iter()
            .map(|&al| scaling_wishart(0.16, al).unwrap())
            .collect();
        assert!(gs.windows(2).all(|p| p[0] < p[1]) && gs[4] < 1.0);
    }

    #[test]
    fn closed_forms_zero_the_gradient() {
        let sigma = DMatrix::from_row_slice(2, 2, &[0.04, 0.01, 0.01, 0.09]);
        let mu = DVector::from_vec(vec![0.07, 0.1]);
        let z = DMatrix::zeros(2, 2);
        let w = ReturnModel::wishart(mu.clone(), sigma.clone(), z.clone(), 10.0, 0.02).unwrap();
        let r = solve_closed(&w, 3.0).unwrap();
        assert!(r.residual < 1e-12);
        let (q, _) = sharpe_sq(&sigma, &mu.add_scalar(-0.02)).unwrap();
        assert!((r.sharpe - q.sqrt()).abs() < 1e-12);
        let l = ReturnModel::ald(mu, sigma, z, DVector::from_vec(vec![0.01, -0.02]), 0.02).unwrap();
        assert!(solve_closed(&l, 3.0).unwrap().residual < 1e-12);
    }

    #[test]
    fn closed_form_refused_with_drift_uncertainty() {
        let m = ReturnModel::wishart(
            DVector::from_element(1, 0.08),
            DMatrix::from_element(1, 1, 0.0225),
            DMatrix::from_element(1, 1, 0.001),
            5.0,
            0.02,
        )
        .unwrap();
        assert!(matches!(solve_closed(&m, 3.0), Err(Error::ClosedFormUnavailable(_))));
    }

    #[test]
    fn risk_budget_hits_target() {
        let sigma = DMatrix::from_row_slice(2, 2, &[0.04, 0.01, 0.01, 0.09]);
        let mu = DVector::from_vec(vec![0.07, 0.1]);
        let w = risk_budget(&mu, &sigma, 0.02, 0.1).unwrap();
        assert!((quad_form(&sigma, &w).sqrt() - 0.1).abs() < 1e-12);
        let w2 = risk_budget(&mu, &sigma, 0.02, 0.2).unwrap();
        assert_eq!(w2, &w * 2.0);
        assert!(risk_budget(&DVector::from_element(2, 0.02), &sigma, 0.02, 0.1).is_err());
    }
}
