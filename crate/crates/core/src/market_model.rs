//! Return-distribution parameters, conjugate drift updates and the horizon
//! variance laws produced by drift uncertainty and drift non-stationarity.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::gmv_objectives::MomentPair;
use crate::linalg;

/// Stand-in for an infinite (flat) prior variance.
pub const FLAT_PRIOR_VAR: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Gaussian,
    GaussianWishart,
    Ald,
}

/// Next-period return model: location `mu0`, scale/covariance `sigma`, diagonal
/// drift-uncertainty `sigma0`, ALD asymmetry `mu_a`, Wishart noise `alpha` and
/// risk-free rate `r0`. All quantities are per period, in decimals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ReturnModelDoc", into = "ReturnModelDoc")]
pub struct ReturnModel {
    family: Family,
    mu0: DVector<f64>,
    sigma: DMatrix<f64>,
    sigma0: DMatrix<f64>,
    mu_a: DVector<f64>,
    alpha: Option<f64>,
    r0: f64,
}

impl ReturnModel {
    /// Validating constructor. `sigma` and `sigma0` are symmetrized first.
    pub fn new(
        family: Family,
        mu0: DVector<f64>,
        sigma: DMatrix<f64>,
        sigma0: DMatrix<f64>,
        mu_a: Option<DVector<f64>>,
        alpha: Option<f64>,
        r0: f64,
    ) -> Result<Self> {
        let n = mu0.len();
        if n == 0 {
            return Err(Error::Dimension("return model needs at least one asset".into()));
        }
        if sigma.nrows() != n || sigma.ncols() != n || sigma0.nrows() != n || sigma0.ncols() != n {
            return Err(Error::Dimension(format!(
                "mu0 has {n} entries but sigma is {}x{} and sigma0 is {}x{}",
                sigma.nrows(),
                sigma.ncols(),
                sigma0.nrows(),
                sigma0.ncols()
            )));
        }
        if mu0.iter().any(|v| !v.is_finite()) || !r0.is_finite() {
            return domain("mu0 and r0 must be finite");
        }
        let sigma = linalg::symmetrize(&sigma);
        if linalg::max_asymmetry(&sigma) > linalg::SYMMETRY_TOL || !linalg::is_spd(&sigma) {
            return Err(Error::Singular {
                condition: linalg::condition_number(&sigma),
            });
        }
        for i in 0..n {
            for j in 0..n {
                let v = sigma0[(i, j)];
                if i != j && v != 0.0 {
                    return domain("sigma0 must be diagonal");
                }
                if i == j && !(v >= 0.0 && v.is_finite()) {
                    return domain("sigma0 diagonal entries must be non-negative");
                }
            }
        }
        let mu_a = match (family, mu_a) {
            (Family::Ald, Some(m)) if m.len() == n => m,
            (Family::Ald, Some(_)) => return Err(Error::Dimension("mu_a length".into())),
            (Family::Ald, None) => DVector::zeros(n),
            (_, Some(m)) if m.iter().any(|v| *v != 0.0) => return domain("mu_a must be zero unless the family is ALD"),
            (_, _) => DVector::zeros(n),
        };
        let alpha = match family {
            Family::GaussianWishart => match alpha {
                Some(a) if a > 0.0 && a.is_finite() => Some(a),
                _ => return domain("alpha must be finite and positive for the Wishart family"),
            },
            _ if alpha.is_some() => return domain("alpha is only meaningful for the Wishart family"),
            _ => None,
        };
        Ok(Self {
            family,
            mu0,
            sigma,
            sigma0,
            mu_a,
            alpha,
            r0,
        })
    }

    pub fn gaussian(mu0: DVector<f64>, sigma: DMatrix<f64>, sigma0: DMatrix<f64>, r0: f64) -> Result<Self> {
        Self::new(Family::Gaussian, mu0, sigma, sigma0, None, None, r0)
    }

    pub fn wishart(mu0: DVector<f64>, sigma: DMatrix<f64>, sigma0: DMatrix<f64>, alpha: f64, r0: f64) -> Result<Self> {
        Self::new(Family::GaussianWishart, mu0, sigma, sigma0, None, Some(alpha), r0)
    }

    pub fn ald(
        mu0: DVector<f64>,
        sigma: DMatrix<f64>,
        sigma0: DMatrix<f64>,
        mu_a: DVector<f64>,
        r0: f64,
    ) -> Result<Self> {
        Self::new(Family::Ald, mu0, sigma, sigma0, Some(mu_a), None, r0)
    }

    /// Single-asset Gaussian model with no drift uncertainty.
    pub fn univariate(mu0: f64, sigma2: f64, r0: f64) -> Result<Self> {
        Self::gaussian(
            DVector::from_element(1, mu0),
            DMatrix::from_element(1, 1, sigma2),
            DMatrix::zeros(1, 1),
            r0,
        )
    }

    pub fn family(&self) -> Family {
        self.family
    }
    pub fn n_assets(&self) -> usize {
        self.mu0.len()
    }
    pub fn mu0(&self) -> &DVector<f64> {
        &self.mu0
    }
    pub fn sigma(&self) -> &DMatrix<f64> {
        &self.sigma
    }
    pub fn sigma0(&self) -> &DMatrix<f64> {
        &self.sigma0
    }
    pub fn mu_a(&self) -> &DVector<f64> {
        &self.mu_a
    }
    pub fn alpha(&self) -> Option<f64> {
        self.alpha
    }
    pub fn r0(&self) -> f64 {
        self.r0
    }

    /// `μ₀ − r₀·1`
    pub fn excess(&self) -> DVector<f64> {
        self.mu0.map(|m| m - self.r0)
    }

    pub fn has_drift_uncertainty(&self) -> bool {
        self.sigma0.diagonal().iter().any(|v| *v > 0.0)
    }

    /// Copy with a different drift-uncertainty matrix.
    pub fn with_sigma0(&self, sigma0: DMatrix<f64>) -> Result<Self> {
        Self::new(
            self.family,
            self.mu0.clone(),
            self.sigma.clone(),
            sigma0,
            Some(self.mu_a.clone()),
            self.alpha,
            self.r0,
        )
    }
}

/// Wire form of [`ReturnModel`]: matrices as row-major arrays of arrays.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReturnModelDoc {
    pub family: Family,
    pub mu0: Vec<f64>,
    pub sigma: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma0: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu_a: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    pub r0: f64,
}

impl TryFrom<ReturnModelDoc> for ReturnModel {
    type Error = Error;

    fn try_from(doc: ReturnModelDoc) -> Result<Self> {
        let n = doc.mu0.len();
        let sigma = linalg::from_rows(&doc.sigma)?;
        let sigma0 = match doc.sigma0 {
            Some(rows) => linalg::from_rows(&rows)?,
            None => DMatrix::zeros(n, n),
        };
        ReturnModel::new(
            doc.family,
            DVector::from_vec(doc.mu0),
            sigma,
            sigma0,
            doc.mu_a.map(DVector::from_vec),
            doc.alpha,
            doc.r0,
        )
    }
}

impl From<ReturnModel> for ReturnModelDoc {
    fn from(m: ReturnModel) -> Self {
        ReturnModelDoc {
            family: m.family,
            mu0: m.mu0.iter().copied().collect(),
            sigma: linalg::to_rows(&m.sigma),
            sigma0: Some(linalg::to_rows(&m.sigma0)),
            mu_a: (m.family == Family::Ald).then(|| m.mu_a.iter().copied().collect()),
            alpha: m.alpha,
            r0: m.r0,
        }
    }
}

/// Conjugate posterior of the drift plus the drift-diffusion rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PosteriorBeliefDoc", into = "PosteriorBeliefDoc")]
pub struct PosteriorBelief {
    mu_pd: f64,
    sigma_pd2: f64,
    sigma_mu2: f64,
    n_eff: f64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PosteriorBeliefDoc {
    pub mu_pd: f64,
    pub sigma_pd2: f64,
    #[serde(default)]
    pub sigma_mu2: f64,
    #[serde(default = "default_n_eff")]
    pub n_eff: f64,
}

fn default_n_eff() -> f64 {
    1.0
}

impl TryFrom<PosteriorBeliefDoc> for PosteriorBelief {
    type Error = Error;
    fn try_from(d: PosteriorBeliefDoc) -> Result<Self> {
        PosteriorBelief::new(d.mu_pd, d.sigma_pd2, d.sigma_mu2, d.n_eff)
    }
}

impl From<PosteriorBelief> for PosteriorBeliefDoc {
    fn from(b: PosteriorBelief) -> Self {
        PosteriorBeliefDoc {
            mu_pd: b.mu_pd,
            sigma_pd2: b.sigma_pd2,
            sigma_mu2: b.sigma_mu2,
            n_eff: b.n_eff,
        }
    }
}

impl PosteriorBelief {
    pub fn new(mu_pd: f64, sigma_pd2: f64, sigma_mu2: f64, n_eff: f64) -> Result<Self> {
        if !mu_pd.is_finite() {
            return domain("mu_pd must be finite");
        }
        if !(sigma_pd2 >= 0.0) || !(sigma_mu2 >= 0.0) || !sigma_pd2.is_finite() || !sigma_mu2.is_finite() {
            return domain("sigma_pd2 and sigma_mu2 must be finite and non-negative");
        }
        if !(n_eff > 0.0) {
            return domain("n_eff must be positive");
        }
        Ok(Self {
            mu_pd,
            sigma_pd2,
            sigma_mu2,
            n_eff,
        })
    }

    /// Drift known exactly and constant in time.
    pub fn certain(mu: f64) -> Self {
        Self {
            mu_pd: mu,
            sigma_pd2: 0.0,
            sigma_mu2: 0.0,
            n_eff: 1.0,
        }
    }

    /// Builds the belief from a univariate conjugate update with `n_eff`
    /// effective observations.
    pub fn from_observations(
        prior_mean: f64,
        prior_var: f64,
        sample_mean: f64,
        obs_var: f64,
        n_eff: f64,
        sigma_mu2: f64,
    ) -> Result<Self> {
        let (mu_pd, sigma_pd2) = posterior_update_uni(prior_mean, prior_var, sample_mean, obs_var, n_eff)?;
        Self::new(mu_pd, sigma_pd2, sigma_mu2, n_eff)
    }

    pub fn mu_pd(&self) -> f64 {
        self.mu_pd
    }
    pub fn sigma_pd2(&self) -> f64 {
        self.sigma_pd2
    }
    pub fn sigma_mu2(&self) -> f64 {
        self.sigma_mu2
    }
    pub fn n_eff(&self) -> f64 {
        self.n_eff
    }
}

/// Holding horizon `horizon`, step `dt`, and time `t0` already elapsed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HorizonSpec {
    pub horizon: f64,
    pub dt: f64,
    #[serde(default)]
    pub t0: f64,
}

impl HorizonSpec {
    pub fn new(horizon: f64, dt: f64, t0: f64) -> Result<Self> {
        let h = Self { horizon, dt, t0 };
        h.validate()?;
        Ok(h)
    }

    /// One step covering the whole horizon, starting at zero.
    pub fn single(horizon: f64) -> Result<Self> {
        Self::new(horizon, horizon, 0.0)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.horizon > 0.0) || !(self.dt > 0.0) || self.dt > self.horizon || !(self.t0 >= 0.0) {
            return domain(format!(
                "horizon spec requires T > 0, 0 < dt <= T, t0 >= 0 (got T={}, dt={}, t0={})",
                self.horizon, self.dt, self.t0
            ));
        }
        Ok(())
    }

    /// Number of whole steps of size `dt` in the horizon.
    pub fn n_steps(&self) -> usize {
        (self.horizon / self.dt).round().max(1.0) as usize
    }
}

fn clamp_prior_var(v: f64) -> f64 {
    if v.is_infinite() {
        FLAT_PRIOR_VAR
    } else {
        v.min(FLAT_PRIOR_VAR)
    }
}

/// Normal-normal update of an unknown mean with known observation variance.
/// `n` may be fractional (an effective observation count). Infinite prior
/// variance is capped at [`FLAT_PRIOR_VAR`].
pub fn posterior_update_uni(
    prior_mean: f64,
    prior_var: f64,
    sample_mean: f64,
    obs_var: f64,
    n: f64,
) -> Result<(f64, f64)> {
    if !(prior_var > 0.0) || !(obs_var > 0.0) || !(n > 0.0) {
        return domain(format!(
            "posterior update needs prior_var > 0, obs_var > 0, n > 0 (got {prior_var}, {obs_var}, {n})"
        ));
    }
    let prior_var = clamp_prior_var(prior_var);
    let sigma_pd2 = 1.0 / (1.0 / prior_var + n / obs_var);
    let mu_pd = sigma_pd2 * (prior_mean / prior_var + n * sample_mean / obs_var);
    Ok((mu_pd, sigma_pd2))
}

/// Multivariate normal update: `Σ_pd⁻¹ = Σ̃₀⁻¹ + nΣ⁻¹`,
/// `μ_pd = Σ_pd(Σ̃₀⁻¹μ̃₀ + nΣ⁻¹r̄)`.
pub fn posterior_update_multi(
    prior_mean: &DVector<f64>,
    prior_cov: &DMatrix<f64>,
    sample_mean: &DVector<f64>,
    obs_cov: &DMatrix<f64>,
    n: f64,
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let dim = prior_mean.len();
    if sample_mean.len() != dim || prior_cov.shape() != (dim, dim) || obs_cov.shape() != (dim, dim) {
        return Err(Error::Dimension(
            "posterior_update_multi inputs disagree in size".into(),
        ));
    }
    if !(n > 0.0) {
        return domain("n must be positive");
    }
    let prior_prec = linalg::spd_inverse(prior_cov)?;
    let obs_prec = linalg::spd_inverse(obs_cov)?;
    let post_prec = &prior_prec + &obs_prec * n;
    let sigma_pd = linalg::spd_inverse(&post_prec)?;
    let rhs = &prior_prec * prior_mean + &obs_prec * sample_mean * n;
    let mu_pd = &sigma_pd * rhs;
    Ok((mu_pd, sigma_pd))
}

/// Mean and variance of the return over `horizon.horizon`:
/// `σ²T + σ_pd²T² + σ_μ²T³/3`.
pub fn horizon_return_moments(belief: &PosteriorBelief, obs_var: f64, horizon: &HorizonSpec) -> Result<MomentPair> {
    horizon.validate()?;
    if !(obs_var >= 0.0) {
        return domain("obs_var must be non-negative");
    }
    let t = horizon.horizon;
    let var = obs_var * t + belief.sigma_pd2 * t * t + belief.sigma_mu2 * t.powi(3) / 3.0;
    MomentPair::new(belief.mu_pd * t, var)
}

/// Mean and variance of the increment over `[t0, t0 + dt]`. The variance picks
/// up a `σ_μ² t0 dt²` term, so increments are non-stationary when `σ_μ > 0`.
pub fn increment_moments(belief: &PosteriorBelief, obs_var: f64, horizon: &HorizonSpec) -> Result<MomentPair> {
    horizon.validate()?;
    let (t, d) = (horizon.t0, horizon.dt);
    let var = obs_var * d + belief.sigma_pd2 * d * d + belief.sigma_mu2 * (t * d * d + d.powi(3) / 3.0);
    MomentPair::new(belief.mu_pd * d, var)
}

/// Exact terminal variance of the Euler-discretized drift-diffusion after
/// `n_steps` steps of `dt`.
pub fn discrete_horizon_variance(belief: &PosteriorBelief, obs_var: f64, dt: f64, n_steps: usize) -> f64 {
    let n = n_steps as f64;
    let t = n * dt;
    obs_var * t + belief.sigma_pd2 * t * t + belief.sigma_mu2 * dt.powi(3) * n * (n - 1.0) * (2.0 * n - 1.0) / 6.0
}

/// Single-asset CARA/mean-variance weight with the horizon-inflated variance
/// `σ² + σ_pd²T + σ_μ²T²/3` (per-period scale).
pub fn mv_weight_nonstationary(belief: &PosteriorBelief, obs_var: f64, r0: f64, a: f64, horizon: f64) -> Result<f64> {
    if !(a > 0.0) {
        return domain(format!("risk aversion must be positive, got {a}"));
    }
    if !(horizon > 0.0) {
        return domain("horizon must be positive");
    }
    let denom = obs_var + belief.sigma_pd2 * horizon + belief.sigma_mu2 * horizon * horizon / 3.0;
    if !(denom > 0.0) {
        return domain("effective variance must be positive");
    }
    Ok((belief.mu_pd - r0) / (a * denom))
}

/// Diagonal drift-uncertainty matrix Σ₀ from per-asset beliefs, using the
/// per-period excess over pure diffusion: `σ_pd²T + σ_μ²T²/3`.
pub fn sigma0_from_beliefs(beliefs: &[PosteriorBelief], horizon: f64) -> Result<DMatrix<f64>> {
    if !(horizon > 0.0) {
        return domain("horizon must be positive");
    }
    let diag: Vec<f64> = beliefs
        .iter()
        .map(|b| b.sigma_pd2 * horizon + b.sigma_mu2 * horizon * horizon / 3.0)
        .collect();
    Ok(DMatrix::from_diagonal(&DVector::from_vec(diag)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn belief(mu: f64, pd2: f64, mu2: f64) -> PosteriorBelief {
        PosteriorBelief::new(mu, pd2, mu2, 1.0).unwrap()
    }

    #[test]
    fn flat_prior_limit() {
        let (m, v) = posterior_update_uni(0.0, f64::INFINITY, 0.08, 0.0225, 100.0).unwrap();
        assert!((m - 0.08).abs() < 1e-9);
        assert!((v - 2.25e-4).abs() < 1e-12);
    }

    #[test]
    fn prior_equal_to_data_mean() {
        let (m, _) = posterior_update_uni(0.05, 0.01, 0.05, 0.02, 10.0).unwrap();
        assert!((m - 0.05).abs() < 1e-15);
    }

    #[test]
    fn invalid_update_inputs() {
        assert!(posterior_update_uni(0.0, 0.0, 0.1, 0.02, 10.0).is_err());
        assert!(posterior_update_uni(0.0, 1.0, 0.1, -0.02, 10.0).is_err());
        assert!(posterior_update_uni(0.0, 1.0, 0.1, 0.02, 0.0).is_err());
    }

    #[test]
    fn multi_reduces_to_uni() {
        let (m1, v1) = posterior_update_uni(0.02, 0.0004, 0.10, 0.04, 20.0).unwrap();
        let (m, v) = posterior_update_multi(
            &DVector::from_element(1, 0.02),
            &DMatrix::from_element(1, 1, 0.0004),
            &DVector::from_element(1, 0.10),
            &DMatrix::from_element(1, 1, 0.04),
            20.0,
        )
        .unwrap();
        assert!((m[0] - m1).abs() < 1e-15);
        assert!((v[(0, 0)] - v1).abs() < 1e-18);
    }

    #[test]
    fn equal_precision_averages_means() {
        let obs = DMatrix::from_row_slice(2, 2, &[0.04, 0.01, 0.01, 0.09]);
        let n = 8.0;
        let prior = &obs / n;
        let m0 = DVector::from_vec(vec![0.01, 0.07]);
        let xb = DVector::from_vec(vec![0.05, -0.03]);
        let (m, _) = posterior_update_multi(&m0, &prior, &xb, &obs, n).unwrap();
        let expect = (&m0 + &xb) * 0.5;
        assert!((m - expect).amax() < 1e-14);
    }

    #[test]
    fn singular_prior_is_reported() {
        let z = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]) * 0.0;
        let r = posterior_update_multi(
            &DVector::zeros(2),
            &z,
            &DVector::zeros(2),
            &DMatrix::identity(2, 2),
            1.0,
        );
        assert!(matches!(r, Err(Error::Singular { .. }) | Err(Error::Domain(_))));
    }

    #[test]
    fn pure_diffusion_variance() {
        let m = horizon_return_moments(&belief(0.05, 0.0, 0.0), 0.04, &HorizonSpec::single(1.0).unwrap()).unwrap();
        assert!((m.var - 0.04).abs() < 1e-15);
        assert!((m.mean - 0.05).abs() < 1e-15);
    }

    #[test]
    fn full_variance_law() {
        let m = horizon_return_moments(&belief(0.05, 0.0025, 0.01), 0.04, &HorizonSpec::single(2.0).unwrap()).unwrap();
        // 0.04·2 + 0.0025·4 + 0.01·8/3
        assert!((m.var - 0.116_666_666_666_666_67).abs() < 1e-15);
    }

    #[test]
    fn increment_variance_depends_on_start() {
        let b = belief(0.05, 0.0025, 0.01);
        let early = increment_moments(&b, 0.04, &HorizonSpec::new(2.0, 0.5, 0.0).unwrap()).unwrap();
        let late = increment_moments(&b, 0.04, &HorizonSpec::new(2.0, 0.5, 1.0).unwrap()).unwrap();
        assert!((late.var - early.var - 0.01 * 0.25).abs() < 1e-15);
    }

    #[test]
    fn horizon_variance_monotone() {
        let base = (0.04, 0.0025, 0.01, 2.0);
        let v = |s2: f64, pd2: f64, mu2: f64, t: f64| {
            horizon_return_moments(&belief(0.0, pd2, mu2), s2, &HorizonSpec::single(t).unwrap())
                .unwrap()
                .var
        };
        let v0 = v(base.0, base.1, base.2, base.3);
        for k in 1..=10 {
            let bump = 1.0 + 0.1 * k as f64;
            assert!(v(base.0 * bump, base.1, base.2, base.3) > v0);
            assert!(v(base.0, base.1 * bump, base.2, base.3) > v0);
            assert!(v(base.0, base.1, base.2 * bump, base.3) > v0);
            assert!(v(base.0, base.1, base.2, base.3 * bump) > v0);
        }
    }

    #[test]
    fn discrete_law_converges() {
        let b = belief(0.0, 0.0025, 0.01);
        let t = 2.0f64;
        let cont = 0.04 * t + 0.0025 * t * t + 0.01 * t.powi(3) / 3.0;
        let errs: Vec<f64> = [4usize, 16, 64]
            .iter()
            .map(|&n| (discrete_horizon_variance(&b, 0.04, t / n as f64, n) - cont).abs())
            .collect();
        assert!(errs[1] / errs[0] <= 0.5);
        assert!(errs[2] / errs[1] <= 0.5);
    }

    #[test]
    fn mv_weight_cases() {
        let w = mv_weight_nonstationary(&belief(0.08, 0.0, 0.0), 0.0225, 0.02, 3.4, 1.0).unwrap();
        assert!((w - 0.06 / (3.4 * 0.0225)).abs() < 1e-14);
        let w = mv_weight_nonstationary(&belief(0.08, 0.0025, 0.0), 0.0225, 0.02, 3.4, 1.0).unwrap();
        assert!((w - 0.705_882_352_941_176_5).abs() < 1e-12);
        assert!(mv_weight_nonstationary(&belief(0.08, 0.0, 0.0), 0.0225, 0.02, 0.0, 1.0).is_err());
    }

    #[test]
    fn mv_weight_decreases_with_horizon() {
        for b in [belief(0.08, 0.0025, 0.0), belief(0.08, 0.0, 0.01)] {
            let ws: Vec<f64> = (1..=20)
                .map(|k| mv_weight_nonstationary(&b, 0.0225, 0.02, 3.4, 0.25 * k as f64).unwrap())
                .collect();
            assert!(ws.windows(2).all(|p| p[1] < p[0]));
        }
    }

    #[test]
    fn sigma0_matches_univariate_weight() {
        let b = belief(0.08, 0.0025, 0.006);
        let t = 3.0;
        let s0 = sigma0_from_beliefs(&[b], t).unwrap();
        let direct = mv_weight_nonstationary(&b, 0.0225, 0.02, 3.4, t).unwrap();
        let via = (0.08 - 0.02) / (3.4 * (0.0225 + s0[(0, 0)]));
        assert!((direct - via).abs() < 1e-14);
    }

    #[test]
    fn model_validation() {
        let mu = DVector::from_vec(vec![0.05, 0.07]);
        let s = DMatrix::from_row_slice(2, 2, &[0.04, 0.01, 0.01, 0.09]);
        let bad = DMatrix::from_row_slice(2, 2, &[0.04, 0.3, 0.3, 0.09]);
        assert!(ReturnModel::gaussian(mu.clone(), s.clone(), DMatrix::zeros(2, 2), 0.01).is_ok());
        assert!(ReturnModel::gaussian(mu.clone(), bad, DMatrix::zeros(2, 2), 0.01).is_err());
        let offdiag = DMatrix::from_row_slice(2, 2, &[0.0, 0.01, 0.01, 0.0]);
        assert!(ReturnModel::gaussian(mu.clone(), s.clone(), offdiag, 0.01).is_err());
        assert!(ReturnModel::wishart(mu.clone(), s.clone(), DMatrix::zeros(2, 2), 0.0, 0.01).is_err());
        assert!(ReturnModel::new(Family::Gaussian, mu, s, DMatrix::zeros(2, 2), None, Some(3.0), 0.0).is_err());
    }

    #[test]
    fn horizon_spec_validation() {
        assert!(HorizonSpec::new(1.0, 2.0, 0.0).is_err());
        assert!(HorizonSpec::new(0.0, 0.0, 0.0).is_err());
        assert!(HorizonSpec::new(1.0, 0.5, -1.0).is_err());
        assert_eq!(HorizonSpec::new(2.0, 1.0 / 256.0, 0.0).unwrap().n_steps(), 512);
    }
}
