//! Optimal leverage from the GMV of log wealth.
//!
//! For a constant fraction `f` in the risky asset the log wealth of a geometric
//! Brownian motion is Gaussian, so `E − (λ/2) Var` is a quadratic in `f` and
//! `λ = 1` gives half-Kelly. Binary bets, their Bayesian (Beta-Binomial)
//! version, power utility and Gamma-distributed variance are handled on top.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::gmv_objectives::{crra_moments, gmv_score, MomentPair};
use crate::numerics::{golden_section_max, grid_refine_max, newton_polish, safeguarded_newton, GOLDEN_WIDTH, ROOT_TOL};

/// Open-boundary shrink for bounded leverage domains.
pub const BOUNDARY_EPS: f64 = 1e-9;
/// Below this γ a risk-neutral power-utility investor is reported as unbounded.
pub const GAMMA_UNBOUNDED: f64 = 1e-6;
const GRID_POINTS: usize = 2001;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LeverageInputs {
    pub mu_r: f64,
    pub sigma_r2: f64,
    pub r0: f64,
    /// Variance of the drift estimate (per period²).
    #[serde(default)]
    pub sigma0_2: f64,
    /// Shape of the Gamma noise on the variance; absent means known variance.
    #[serde(default)]
    pub alpha: Option<f64>,
    #[serde(alias = "T")]
    pub horizon: f64,
    pub lambda: f64,
}

impl LeverageInputs {
    pub fn new(mu_r: f64, sigma_r2: f64, r0: f64, horizon: f64, lambda: f64) -> Result<Self> {
        let i = Self {
            mu_r,
            sigma_r2,
            r0,
            sigma0_2: 0.0,
            alpha: None,
            horizon,
            lambda,
        };
        i.validate()?;
        Ok(i)
    }

    pub fn with_drift_uncertainty(mut self, sigma0_2: f64) -> Result<Self> {
        self.sigma0_2 = sigma0_2;
        self.validate()?;
        Ok(self)
    }

    pub fn with_alpha(mut self, alpha: f64) -> Result<Self> {
        self.alpha = Some(alpha);
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.mu_r.is_finite() || !self.r0.is_finite() {
            return domain("mu_r and r0 must be finite");
        }
        if !(self.sigma_r2 > 0.0) || !self.sigma_r2.is_finite() {
            return domain(format!("sigma_r2 must be positive, got {}", self.sigma_r2));
        }
        if !(self.sigma0_2 >= 0.0) || !self.sigma0_2.is_finite() {
            return domain(format!("sigma0_2 must be non-negative, got {}", self.sigma0_2));
        }
        if !(self.horizon > 0.0) || !self.horizon.is_finite() {
            return domain(format!("horizon must be positive, got {}", self.horizon));
        }
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return domain(format!("lambda must be non-negative, got {}", self.lambda));
        }
        if let Some(a) = self.alpha {
            if !(a > 0.0) {
                return domain(format!("alpha must be positive, got {a}"));
            }
        }
        Ok(())
    }

    pub fn excess(&self) -> f64 {
        self.mu_r - self.r0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    ClosedForm,
    RootFind,
    GridRefine,
}

/// Why a solver returned a degenerate leverage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LeverageFlag {
    NoFavorableLeverage,
    UnfavorableGame,
    UnfavorablePredictiveOdds,
    UnboundedLeverage,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LeverageResult {
    pub f_star: f64,
    pub objective: f64,
    pub mean_logw: f64,
    pub var_logw: f64,
    pub method: Method,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flag: Option<LeverageFlag>,
    /// First-order solution of the binary stationarity equation.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f_linearized: Option<f64>,
    /// Linearized f* over the Kelly fraction.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kelly_multiplier: Option<f64>,
}

impl LeverageResult {
    fn new(f_star: f64, objective: f64, m: MomentPair, method: Method) -> Self {
        Self {
            f_star,
            objective,
            mean_logw: m.mean,
            var_logw: m.var,
            method,
            flag: None,
            f_linearized: None,
            kelly_multiplier: None,
        }
    }

    fn flagged(mut self, flag: LeverageFlag) -> Self {
        self.flag = Some(flag);
        self
    }
}

/// Moments of `ln(X_T/X_0)` at fraction `f`. The drift uncertainty scales
/// with the position: variance `f²σ_r²T + f²σ₀²T²`.
pub fn gbm_log_moments(inputs: &LeverageInputs, f: f64) -> MomentPair {
    let t = inputs.horizon;
    let mean = (inputs.r0 + f * inputs.excess() - 0.5 * f * f * inputs.sigma_r2) * t;
    let var = f * f * (inputs.sigma_r2 * t + inputs.sigma0_2 * t * t);
    MomentPair { mean, var }
}

/// The leverage objective `r₀T + f m T − ((1+λ)/2) f² (σ_r² + σ₀²T) T`.
///
/// At σ₀ = 0 this is exactly `gmv_score(gbm_log_moments(f), λ)`. With σ₀ > 0
/// the drift uncertainty enters the Itô correction as well as the variance.
pub fn kelly_gmv_objective(inputs: &LeverageInputs, f: f64) -> f64 {
    let t = inputs.horizon;
    let s = inputs.sigma_r2 + inputs.sigma0_2 * t;
    inputs.r0 * t + f * inputs.excess() * t - 0.5 * (1.0 + inputs.lambda) * f * f * s * t
}

/// `f* = m / ((1+λ)(σ_r² + σ₀²T))`: full Kelly at λ = 0, half-Kelly at λ = 1.
pub fn kelly_gmv(inputs: &LeverageInputs) -> Result<LeverageResult> {
    inputs.validate()?;
    let s = inputs.sigma_r2 + inputs.sigma0_2 * inputs.horizon;
    let f = inputs.excess() / ((1.0 + inputs.lambda) * s);
    Ok(LeverageResult::new(
        f,
        kelly_gmv_objective(inputs, f),
        gbm_log_moments(inputs, f),
        Method::ClosedForm,
    ))
}

/// Log-wealth moments when the per-period variance is itself random,
/// `s² ~ Γ(α/2, 2f²σ_r²/α)`: the mean is unchanged and the variance gains
/// `Var[s²]T²/4 = f⁴σ_r⁴T²/(2α)`.
pub fn uncertain_variance_log_moments(inputs: &LeverageInputs, alpha: f64, f: f64) -> MomentPair {
    let base = gbm_log_moments(inputs, f);
    let t = inputs.horizon;
    let extra = f.powi(4) * inputs.sigma_r2 * inputs.sigma_r2 * t * t / (2.0 * alpha);
    MomentPair {
        mean: base.mean,
        var: base.var + extra,
    }
}

/// Leverage under Gamma-distributed variance. The stationarity condition
/// `mT − (1+λ) f S T − λ f³σ_r⁴T²/α = 0` is strictly decreasing in f, so its
/// root is unique and found by bracketing.
pub fn kelly_gmv_uncertain_variance(inputs: &LeverageInputs) -> Result<LeverageResult> {
    inputs.validate()?;
    let Some(alpha) = inputs.alpha else {
        return domain("uncertain-variance leverage needs a finite alpha");
    };
    let t = inputs.horizon;
    let m = inputs.excess();
    let s = inputs.sigma_r2 + inputs.sigma0_2 * t;
    let lam = inputs.lambda;
    let quartic = lam * inputs.sigma_r2 * inputs.sigma_r2 * t * t / (2.0 * alpha);
    let objective = |f: f64| kelly_gmv_objective(inputs, f) - 0.5 * quartic * f.powi(4);
    let result = |f: f64, method| {
        LeverageResult::new(
            f,
            objective(f),
            uncertain_variance_log_moments(inputs, alpha, f),
            method,
        )
    };
    if !(m > 0.0) {
        return Ok(result(0.0, Method::ClosedForm).flagged(LeverageFlag::NoFavorableLeverage));
    }
    let deriv = |f: f64| m * t - (1.0 + lam) * f * s * t - 2.0 * quartic * f.powi(3);
    let d2 = |f: f64| -(1.0 + lam) * s * t - 6.0 * quartic * f * f;
    // the quadratic-only root bounds the cubic root from above
    let hi = m / ((1.0 + lam) * s);
    if quartic == 0.0 {
        return Ok(result(hi, Method::ClosedForm));
    }
    let f = safeguarded_newton(deriv, d2, 0.0, hi, ROOT_TOL * 1e-3)?;
    Ok(result(f, Method::RootFind))
}

/// Inverts the lognormal arithmetic-return moments:
/// `σ_d² = ln(1 + Var/(1+E)²)`, `μ_d = ln(1+E) − σ_d²/2`.
pub fn discrete_calibration(mean_arith: f64, var_arith: f64) -> Result<(f64, f64)> {
    if !(var_arith > 0.0) || !var_arith.is_finite() {
        return domain(format!("arithmetic variance must be positive, got {var_arith}"));
    }
    if !(1.0 + mean_arith > 0.0) {
        return domain(format!("arithmetic mean must exceed -1, got {mean_arith}"));
    }
    let g = 1.0 + mean_arith;
    let s2 = (var_arith / (g * g)).ln_1p();
    Ok((g.ln() - 0.5 * s2, s2))
}

/// Mean and mode of `X_T/X_0` for drift `mu` and variance `sigma2`; their
/// ratio is `e^{−1.5σ²T}`.
pub fn gbm_wealth_mean_mode(mu: f64, sigma2: f64, horizon: f64) -> (f64, f64) {
    ((mu * horizon).exp(), (mu * horizon - 1.5 * sigma2 * horizon).exp())
}

fn check_fraction(name: &str, x: f64, lo_open: bool) -> Result<()> {
    let ok = if lo_open { x > 0.0 && x <= 1.0 } else { x > 0.0 };
    if !ok || !x.is_finite() {
        return domain(format!("{name} out of range: {x}"));
    }
    Ok(())
}

/// A repeated bet that wins `b` per unit staked with probability `p` and
/// loses `a_loss` otherwise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BinaryBet {
    pub p: f64,
    pub b: f64,
    pub a_loss: f64,
    #[serde(default)]
    pub lambda: f64,
}

impl BinaryBet {
    pub fn new(p: f64, b: f64, a_loss: f64, lambda: f64) -> Result<Self> {
        let bet = Self { p, b, a_loss, lambda };
        bet.validate()?;
        Ok(bet)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.p > 0.0 && self.p < 1.0) {
            return domain(format!("win probability must lie in (0, 1), got {}", self.p));
        }
        check_fraction("win fraction b", self.b, false)?;
        check_fraction("loss fraction a_loss", self.a_loss, true)?;
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return domain(format!("lambda must be non-negative, got {}", self.lambda));
        }
        Ok(())
    }

    pub fn q(&self) -> f64 {
        1.0 - self.p
    }

    pub fn is_favorable(&self) -> bool {
        self.p * self.b > self.q() * self.a_loss
    }

    /// Largest admissible stake (exclusive).
    pub fn f_max(&self) -> f64 {
        1.0 / self.a_loss
    }

    /// Printed stationarity function
    /// `bp(af−1) + aq(bf+1) + λpq(a+b) ln((1+bf)/(1−af))`, increasing in f.
    pub fn stationarity(&self, f: f64) -> f64 {
        let (p, q, a, b) = (self.p, self.q(), self.a_loss, self.b);
        b * p * (a * f - 1.0) + a * q * (b * f + 1.0) + self.lambda * p * q * (a + b) * log_odds(a, b, f)
    }
}

fn log_odds(a: f64, b: f64, f: f64) -> f64 {
    (b * f).ln_1p() - (-a * f).ln_1p()
}

/// Per-trial moments of `ln(1 + Y f)`.
pub fn binary_log_moments(bet: &BinaryBet, f: f64) -> Result<MomentPair> {
    bet.validate()?;
    if !(f > -1.0 / bet.b && f < bet.f_max()) {
        return domain(format!("stake {f} outside (-1/b, 1/a_loss)"));
    }
    let (p, q) = (bet.p, bet.q());
    let mean = p * (bet.b * f).ln_1p() + q * (-bet.a_loss * f).ln_1p();
    let c = log_odds(bet.a_loss, bet.b, f);
    Ok(MomentPair {
        mean,
        var: p * q * c * c,
    })
}

/// Kelly stake `p/a − q/b`, or zero for an unfavorable game.
pub fn binary_kelly_exact(bet: &BinaryBet) -> Result<LeverageResult> {
    bet.validate()?;
    if !bet.is_favorable() {
        let m = binary_log_moments(bet, 0.0)?;
        return Ok(LeverageResult::new(0.0, 0.0, m, Method::ClosedForm).flagged(LeverageFlag::UnfavorableGame));
    }
    let f = bet.p / bet.a_loss - bet.q() / bet.b;
    let m = binary_log_moments(bet, f)?;
    Ok(LeverageResult::new(f, m.mean, m, Method::ClosedForm))
}

/// GMV stake for a binary bet: root of the stationarity equation on
/// `(0, 1/a_loss)`, with the linearized solution and Kelly multiplier
/// attached. The objective and moments are per trial; both scale with the
/// number of trials, which leaves the argmax unchanged.
pub fn binary_gmv(bet: &BinaryBet) -> Result<LeverageResult> {
    bet.validate()?;
    let (p, q, a, b, lam) = (bet.p, bet.q(), bet.a_loss, bet.b, bet.lambda);
    let denom = lam * p * q * (a + b).powi(2) + a * b;
    let f_lin = (b * p - a * q) / denom;
    let delta = a * b / denom;
    let with_diag = |mut r: LeverageResult| {
        r.f_linearized = Some(f_lin);
        r.kelly_multiplier = Some(delta);
        r
    };
    if !bet.is_favorable() {
        let m = binary_log_moments(bet, 0.0)?;
        return Ok(with_diag(
            LeverageResult::new(0.0, 0.0, m, Method::ClosedForm).flagged(LeverageFlag::UnfavorableGame),
        ));
    }
    let hi = bet.f_max() * (1.0 - BOUNDARY_EPS);
    let df = |f: f64| a * b + lam * p * q * (a + b).powi(2) / ((1.0 + b * f) * (1.0 - a * f));
    let f = safeguarded_newton(|f| bet.stationarity(f), df, 0.0, hi, ROOT_TOL * 1e-2)?;
    let m = binary_log_moments(bet, f)?;
    Ok(with_diag(LeverageResult::new(
        f,
        gmv_score(m, lam),
        m,
        Method::RootFind,
    )))
}

/// A binary bet whose win probability is learned from `y1` wins in `n1`
/// past trials under a `Beta(prior_alpha, prior_beta)` prior, played for
/// `n_trials` more rounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BayesBinaryBet {
    pub y1: u64,
    pub n1: u64,
    pub prior_alpha: f64,
    pub prior_beta: f64,
    #[serde(alias = "N")]
    pub n_trials: u64,
    pub b: f64,
    pub a_loss: f64,
    #[serde(default)]
    pub lambda: f64,
}

impl BayesBinaryBet {
    pub fn validate(&self) -> Result<()> {
        if self.y1 > self.n1 {
            return domain(format!("y1 = {} exceeds n1 = {}", self.y1, self.n1));
        }
        if !(self.prior_alpha > 0.0) || !(self.prior_beta > 0.0) {
            return domain("Beta prior parameters must be positive");
        }
        if self.n_trials < 1 {
            return domain("at least one upcoming trial is required");
        }
        check_fraction("win fraction b", self.b, false)?;
        check_fraction("loss fraction a_loss", self.a_loss, true)?;
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return domain(format!("lambda must be non-negative, got {}", self.lambda));
        }
        Ok(())
    }

    /// Posterior Beta parameters of the win probability.
    pub fn posterior(&self) -> (f64, f64) {
        (
            self.y1 as f64 + self.prior_alpha,
            (self.n1 - self.y1) as f64 + self.prior_beta,
        )
    }

    /// Predictive success probability `(y1+α)/(n1+α+β)`.
    pub fn p0(&self) -> f64 {
        let (al, be) = self.posterior();
        al / (al + be)
    }

    /// Beta-Binomial mean and variance of the number of wins.
    pub fn wins_moments(&self) -> (f64, f64) {
        let (al, be) = self.posterior();
        let s = al + be;
        let n = self.n_trials as f64;
        (n * al / s, n * al * be / (s * s) * (s + n) / (s + 1.0))
    }

    /// The same bet with the predictive probability treated as known.
    pub fn deterministic(&self) -> Result<BinaryBet> {
        BinaryBet::new(self.p0(), self.b, self.a_loss, self.lambda)
    }
}

/// Moments of `ln(X_N/X_0) = N ln(1−af) + cK` with `K` Beta-Binomial.
pub fn bayes_binary_moments(bet: &BayesBinaryBet, f: f64) -> Result<MomentPair> {
    bet.validate()?;
    if !(f > -1.0 / bet.b && f < 1.0 / bet.a_loss) {
        return domain(format!("stake {f} outside (-1/b, 1/a_loss)"));
    }
    let (ek, vk) = bet.wins_moments();
    let c = log_odds(bet.a_loss, bet.b, f);
    let n = bet.n_trials as f64;
    Ok(MomentPair {
        mean: n * (-bet.a_loss * f).ln_1p() + c * ek,
        var: c * c * vk,
    })
}

/// GMV stake under the predictive distribution. The objective is concave on
/// `[0, 1/a_loss)`, so golden-section search plus Newton polishing suffices.
pub fn bayes_binary_optimal(bet: &BayesBinaryBet) -> Result<LeverageResult> {
    bet.validate()?;
    let lam = bet.lambda;
    let obj = |f: f64| bayes_binary_moments(bet, f).map_or(f64::NEG_INFINITY, |m| gmv_score(m, lam));
    let (ek, _) = bet.wins_moments();
    // slope of the objective at f = 0
    let slope0 = -(bet.n_trials as f64) * bet.a_loss + (bet.a_loss + bet.b) * ek;
    if !(slope0 > 0.0) {
        let m = bayes_binary_moments(bet, 0.0)?;
        return Ok(
            LeverageResult::new(0.0, 0.0, m, Method::ClosedForm).flagged(LeverageFlag::UnfavorablePredictiveOdds)
        );
    }
    let hi = 1.0 / bet.a_loss - BOUNDARY_EPS;
    let (x, fx) = golden_section_max(obj, 0.0, hi, GOLDEN_WIDTH);
    let (f, v) = newton_polish(obj, x, fx, (0.0, hi), 2);
    let m = bayes_binary_moments(bet, f)?;
    Ok(LeverageResult::new(f, v, m, Method::GridRefine))
}

/// Leverage for power utility of terminal wealth. λ = 0 has the closed form
/// `m/(γσ_r²)`; otherwise `E[U] − (λ/2)Var[U]` of the lognormal wealth is
/// maximized numerically. γ = 1 is log utility and delegates to [`kelly_gmv`].
pub fn crra_leverage(gamma: f64, inputs: &LeverageInputs) -> Result<LeverageResult> {
    inputs.validate()?;
    if !(gamma > 0.0) || !gamma.is_finite() {
        return domain(format!("gamma must be positive, got {gamma}"));
    }
    if gamma == 1.0 {
        return kelly_gmv(inputs);
    }
    let moments = |f: f64| {
        let g = gbm_log_moments(inputs, f);
        let t = inputs.horizon;
        crra_moments(
            g.mean,
            f * f * inputs.sigma_r2 * t,
            f * f * inputs.sigma0_2 * t * t,
            gamma,
        )
    };
    let f_meu = inputs.excess() / (gamma * inputs.sigma_r2);
    if inputs.lambda == 0.0 && inputs.sigma0_2 == 0.0 {
        let r = LeverageResult::new(
            f_meu,
            moments(f_meu)?.mean,
            gbm_log_moments(inputs, f_meu),
            Method::ClosedForm,
        );
        return Ok(if gamma < GAMMA_UNBOUNDED {
            r.flagged(LeverageFlag::UnboundedLeverage)
        } else {
            r
        });
    }
    let obj = |f: f64| {
        moments(f)
            .map_or(f64::NEG_INFINITY, |m| gmv_score(m, inputs.lambda))
            .max(f64::MIN)
    };
    let reach = 2.0 * f_meu.abs() + 1.0;
    let (f, v) = grid_refine_max(obj, -reach, reach, GRID_POINTS);
    Ok(LeverageResult::new(
        f,
        v,
        gbm_log_moments(inputs, f),
        Method::GridRefine,
    ))
}

/// Final weights `f* · w*`.
pub fn combine_allocation(w_star: &DVector<f64>, f_star: f64) -> DVector<f64> {
    w_star * f_star
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::golden_section_max;

    fn sp500(lambda: f64) -> LeverageInputs {
        LeverageInputs::new(0.08, 0.0225, 0.02, 1.0, lambda).unwrap()
    }

    #[test]
    fn half_and_full_kelly() {
        assert!((kelly_gmv(&sp500(1.0)).unwrap().f_star - 4.0 / 3.0).abs() < 1e-12);
        assert!((kelly_gmv(&sp500(0.0)).unwrap().f_star - 8.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn drift_uncertainty_shrinks_leverage() {
        let i = LeverageInputs::new(0.08, 0.0225, 0.02, 4.0, 1.0)
            .unwrap()
            .with_drift_uncertainty(0.0025)
            .unwrap();
        let r = kelly_gmv(&i).unwrap();
        assert!((r.f_star - 0.5 * 0.06 / 0.0325).abs() < 1e-12);
        let (x, _) = golden_section_max(|f| kelly_gmv_objective(&i, f), -5.0, 5.0, 1e-10);
        assert!((x - r.f_star).abs() < 1e-7);
    }

    #[test]
    fn objective_matches_moments_without_drift_noise() {
        let i = sp500(0.7);
        for f in [-1.0, 0.0, 0.5, 2.0] {
            let lhs = kelly_gmv_objective(&i, f);
            let rhs = gmv_score(gbm_log_moments(&i, f), 0.7);
            assert!((lhs - rhs).abs() < 1e-14);
        }
    }

    #[test]
    fn gbm_moments_examples() {
        let i = sp500(0.0);
        let m0 = gbm_log_moments(&i, 0.0);
        assert_eq!((m0.mean, m0.var), (0.02, 0.0));
        let m1 = gbm_log_moments(&i, 1.0);
        assert!((m1.mean - 0.06875).abs() < 1e-15 && (m1.var - 0.0225).abs() < 1e-15);
    }

    #[test]
    fn uncertain_variance_limit_and_shrinkage() {
        let base = LeverageInputs::new(0.08, 0.0225, 0.02, 1.0, 1.0).unwrap();
        let k = kelly_gmv(&base).unwrap().f_star;
        let big = kelly_gmv_uncertain_variance(&base.with_alpha(1e12).unwrap()).unwrap();
        assert!(((big.f_star - k) / k).abs() < 1e-6);
        let fat = kelly_gmv_uncertain_variance(&base.with_alpha(4.0).unwrap()).unwrap();
        assert!(fat.f_star < k);
        let (x, _) = golden_section_max(
            |f| kelly_gmv_objective(&base, f) - 0.5 * 1.0 * 0.0225f64.powi(2) * f.powi(4) / 8.0,
            0.0,
            3.0,
            1e-10,
        );
        assert!((x - fat.f_star).abs() < 1e-7);
    }

    #[test]
    fn unfavorable_uncertain_variance() {
        let i = LeverageInputs::new(0.01, 0.0225, 0.02, 1.0, 1.0)
            .unwrap()
            .with_alpha(4.0)
            .unwrap();
        let r = kelly_gmv_uncertain_variance(&i).unwrap();
        assert_eq!((r.f_star, r.flag), (0.0, Some(LeverageFlag::NoFavorableLeverage)));
    }

    #[test]
    fn discrete_round_trip() {
        let (mu, s2) = discrete_calibration(0.08, 0.0225).unwrap();
        let e = (mu + 0.5 * s2).exp() - 1.0;
        let v = (2.0 * mu + s2).exp() * s2.exp_m1();
        assert!((e - 0.08).abs() < 1e-14 && (v - 0.0225).abs() < 1e-14);
        let (mu, s2) = discrete_calibration(0.0, 0.01).unwrap();
        assert!((s2 - 0.01).abs() < 1e-4 && (mu + 0.005).abs() < 1e-4);
        assert!(discrete_calibration(-1.5, 0.01).is_err());
        assert!(discrete_calibration(0.0, 0.0).is_err());
    }

    #[test]
    fn binary_kelly_cases() {
        let r = binary_kelly_exact(&BinaryBet::new(0.6, 1.0, 1.0, 0.0).unwrap()).unwrap();
        assert!((r.f_star - 0.2).abs() < 1e-15);
        let fair = binary_kelly_exact(&BinaryBet::new(0.5, 1.0, 1.0, 0.0).unwrap()).unwrap();
        assert_eq!((fair.f_star, fair.flag), (0.0, Some(LeverageFlag::UnfavorableGame)));
        let bet = BinaryBet::new(0.55, 1.0, 1.0, 0.0).unwrap();
        let (x, _) = golden_section_max(
            |f| binary_log_moments(&bet, f).map_or(f64::NEG_INFINITY, |m| m.mean),
            0.0,
            0.999,
            1e-12,
        );
        assert!((x - binary_kelly_exact(&bet).unwrap().f_star).abs() < 1e-7);
    }

    #[test]
    fn binary_gmv_half_kelly_multiplier() {
        let r = binary_gmv(&BinaryBet::new(0.5, 1.0, 1.0, 1.0).unwrap()).unwrap();
        assert_eq!(r.kelly_multiplier, Some(0.5));
        let r = binary_gmv(&BinaryBet::new(0.6, 1.0, 1.0, 1.0).unwrap()).unwrap();
        assert!((r.kelly_multiplier.unwrap() - 1.0 / 1.96).abs() < 1e-15);
        let bet = BinaryBet::new(0.6, 1.0, 1.0, 1.0).unwrap();
        assert!(bet.stationarity(r.f_star).abs() <= 1e-10);
    }

    #[test]
    fn binary_gmv_meu_reduction() {
        let bet = BinaryBet::new(0.62, 1.3, 0.8, 0.0).unwrap();
        let r = binary_gmv(&bet).unwrap();
        assert!((r.f_star - binary_kelly_exact(&bet).unwrap().f_star).abs() < 1e-10);
    }

    #[test]
    fn bayes_wins_moments_example() {
        let bet = BayesBinaryBet {
            y1: 6,
            n1: 10,
            prior_alpha: 1.0,
            prior_beta: 1.0,
            n_trials: 5,
            b: 1.0,
            a_loss: 1.0,
            lambda: 0.0,
        };
        let (ek, _) = bet.wins_moments();
        assert!((ek - 35.0 / 12.0).abs() < 1e-14);
        let m = bayes_binary_moments(&bet, 0.0).unwrap();
        assert_eq!((m.mean, m.var), (0.0, 0.0));
    }

    #[test]
    fn crra_meu_and_delegation() {
        let i = sp500(0.0);
        let r = crra_leverage(2.0, &i).unwrap();
        assert!((r.f_star - 0.06 / (2.0 * 0.0225)).abs() < 1e-12);
        let k = crra_leverage(1.0, &i).unwrap();
        assert!((k.f_star - 8.0 / 3.0).abs() < 1e-12);
        let u = crra_leverage(1e-9, &i).unwrap();
        assert_eq!(u.flag, Some(LeverageFlag::UnboundedLeverage));
    }

    #[test]
    fn combine_examples() {
        let w = DVector::from_vec(vec![0.5, 0.3]);
        let c = combine_allocation(&w, 1.33);
        assert!((c[0] - 0.665).abs() < 1e-15 && (c[1] - 0.399).abs() < 1e-15);
        assert_eq!(combine_allocation(&w, 0.0), DVector::zeros(2));
        assert_eq!(combine_allocation(&w, 1.0), w);
    }

    #[test]
    fn mode_suppression() {
        let (mean, mode) = gbm_wealth_mean_mode(0.08, 0.09, 5.0);
        assert!((mode / mean - (-1.5f64 * 0.09 * 5.0).exp()).abs() < 1e-15);
    }
}
