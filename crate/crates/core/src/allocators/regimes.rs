use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{check_a, AllocationResult, SolveMethod, SolverConfig};
use crate::error::{domain, Error, Result};
use crate::linalg::{cholesky, equicorrelation, from_rows, is_spd, quad_form, spd_solve};

const ARMIJO: f64 = 1e-4;
const MIN_STEP: f64 = 1e-20;

/// Stressed-regime covariance, either explicit or equicorrelated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StressCovariance {
    Matrix(Vec<Vec<f64>>),
    Equicorrelation { sigma: f64, rho: f64 },
}

/// Two-state view of next-period returns: a normal regime with probability
/// `p` and a stressed regime with probability `1 − p`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegimeSpec {
    pub p: f64,
    pub mu_n: Vec<f64>,
    pub sigma_n: Vec<Vec<f64>>,
    pub mu_s: Vec<f64>,
    pub sigma_s: StressCovariance,
    #[serde(default)]
    pub r0: f64,
}

/// Validated numeric form of a [`RegimeSpec`].
struct Regimes {
    p: f64,
    m_n: DVector<f64>,
    s_n: DMatrix<f64>,
    m_s: DVector<f64>,
    s_s: DMatrix<f64>,
}

impl RegimeSpec {
    pub fn n_assets(&self) -> usize {
        self.mu_n.len()
    }

    /// Stressed covariance as a matrix.
    pub fn stressed_covariance(&self) -> Result<DMatrix<f64>> {
        let n = self.n_assets();
        match &self.sigma_s {
            StressCovariance::Matrix(rows) => from_rows(rows),
            StressCovariance::Equicorrelation { sigma, rho } => {
                if n > 1 && !(*rho > -1.0 / (n as f64 - 1.0)) {
                    return domain(format!("rho_s = {rho} is below -1/(N-1) for N = {n}"));
                }
                equicorrelation(*sigma, *rho, n)
            }
        }
    }

    fn resolve(&self) -> Result<Regimes> {
        let n = self.n_assets();
        if n == 0 {
            return Err(Error::Dimension("regime spec needs at least one asset".into()));
        }
        if !(0.0..=1.0).contains(&self.p) {
            return domain(format!("regime probability p must lie in [0, 1], got {}", self.p));
        }
        if self.mu_s.len() != n {
            return Err(Error::Dimension(format!(
                "mu_n has {n} entries, mu_s has {}",
                self.mu_s.len()
            )));
        }
        if self.mu_n.iter().chain(&self.mu_s).any(|v| !v.is_finite()) || !self.r0.is_finite() {
            return domain("regime drifts and r0 must be finite");
        }
        let s_n = from_rows(&self.sigma_n)?;
        let s_s = self.stressed_covariance()?;
        for (name, s) in [("sigma_n", &s_n), ("sigma_s", &s_s)] {
            if s.nrows() != n || s.ncols() != n {
                return Err(Error::Dimension(format!(
                    "{name} is {}x{}, expected {n}x{n}",
                    s.nrows(),
                    s.ncols()
                )));
            }
            if !is_spd(s) {
                cholesky(s)?;
            }
        }
        Ok(Regimes {
            p: self.p,
            m_n: DVector::from_iterator(n, self.mu_n.iter().map(|m| m - self.r0)),
            s_n,
            m_s: DVector::from_iterator(n, self.mu_s.iter().map(|m| m - self.r0)),
            s_s,
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.resolve().map(|_| ())
    }
}

/// `R = wᵀΣ_s w` at equal weights for an equicorrelated stressed covariance:
/// `(σ_s²/N)(1 + ρ_s(N − 1))`, tending to `σ_s²ρ_s` as N grows.
pub fn equicorr_residual_risk(sigma_s: f64, rho_s: f64, n: usize) -> Result<f64> {
    if n == 0 || !(sigma_s > 0.0) || !sigma_s.is_finite() {
        return domain("equicorrelation residual risk needs sigma_s > 0 and N >= 1");
    }
    let lower = if n > 1 {
        -1.0 / (n as f64 - 1.0)
    } else {
        f64::NEG_INFINITY
    };
    if !(rho_s > lower && rho_s <= 1.0) {
        return domain(format!("rho_s = {rho_s} outside (-1/(N-1), 1] for N = {n}"));
    }
    let nf = n as f64;
    Ok(sigma_s * sigma_s / nf * (1.0 + rho_s * (nf - 1.0)))
}

impl Regimes {
    fn terms(&self, a: f64, w: &DVector<f64>) -> [(f64, f64, &DMatrix<f64>, &DVector<f64>); 2] {
        let u = |lp: f64, s: &DMatrix<f64>, m: &DVector<f64>| lp + 0.5 * a * a * quad_form(s, w) - a * m.dot(w);
        [
            (self.p, u(self.p.ln(), &self.s_n, &self.m_n), &self.s_n, &self.m_n),
            (
                1.0 - self.p,
                u((1.0 - self.p).ln(), &self.s_s, &self.m_s),
                &self.s_s,
                &self.m_s,
            ),
        ]
    }

    fn objective(&self, a: f64, w: &DVector<f64>) -> f64 {
        let t = self.terms(a, w);
        log_sum_exp(t[0].1, t[1].1)
    }

    /// Gradient and Hessian of the log-sum-exp objective.
    fn derivatives(&self, a: f64, w: &DVector<f64>) -> (DVector<f64>, DMatrix<f64>) {
        let t = self.terms(a, w);
        let f = log_sum_exp(t[0].1, t[1].1);
        let n = w.len();
        let mut g = DVector::zeros(n);
        let mut h = DMatrix::zeros(n, n);
        let mut outer = DMatrix::zeros(n, n);
        for (prob, u, s, m) in t {
            if prob == 0.0 {
                continue;
            }
            let pi = (u - f).exp();
            let gu = s * w * (a * a) - m * a;
            g += &gu * pi;
            h += s * (pi * a * a);
            outer += &gu * gu.transpose() * pi;
        }
        h += outer - &g * g.transpose();
        (g, h)
    }
}

fn log_sum_exp(x: f64, y: f64) -> f64 {
    let m = x.max(y);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + ((x - m).exp() + (y - m).exp()).ln()
}

/// `ln(e^{u_n} + e^{u_s})` with `u_k = ln p_k + (a²/2)wᵀΣ_k w − a(μ_k − r₀)ᵀw`,
/// the log of expected negative exponential utility. Lower is better.
pub fn two_state_objective(spec: &RegimeSpec, a: f64, w: &[f64]) -> Result<f64> {
    check_a(a)?;
    let r = spec.resolve()?;
    if w.len() != r.m_n.len() {
        return Err(Error::Dimension(format!(
            "w has {} entries, expected {}",
            w.len(),
            r.m_n.len()
        )));
    }
    Ok(r.objective(a, &DVector::from_column_slice(w)))
}

/// Minimizes [`two_state_objective`] by damped Newton from `w = 0`. The
/// reported moments are those of the regime mixture.
pub fn two_state_allocate(spec: &RegimeSpec, a: f64, cfg: &SolverConfig) -> Result<AllocationResult> {
    check_a(a)?;
    cfg.validate()?;
    let r = spec.resolve()?;
    let n = r.m_n.len();
    let d = &r.m_n - &r.m_s;
    let mean = &r.m_n * r.p + &r.m_s * (1.0 - r.p);
    let cov = &r.s_n * r.p + &r.s_s * (1.0 - r.p) + &d * d.transpose() * (r.p * (1.0 - r.p));
    let zeros = DMatrix::zeros(n, n);
    let finish = |w: &DVector<f64>, residual, iterations, method| {
        AllocationResult::from_parts(w, &mean, &cov, &zeros, residual, iterations, method)
    };

    // a certain regime drops the other log term entirely
    if r.p == 1.0 || r.p == 0.0 {
        let (s, m) = if r.p == 1.0 { (&r.s_n, &r.m_n) } else { (&r.s_s, &r.m_s) };
        let w = spd_solve(s, m)? / a;
        let residual = r.derivatives(a, &w).0.norm();
        return Ok(finish(&w, residual, 0, SolveMethod::ClosedForm));
    }

    let mut w = DVector::zeros(n);
    let mut fw = r.objective(a, &w);
    let mut iterations = 0;
    loop {
        let (g, h) = r.derivatives(a, &w);
        let residual = g.norm();
        if residual <= cfg.grad_tol {
            return Ok(finish(&w, residual, iterations, SolveMethod::Newton));
        }
        if iterations >= cfg.max_iter {
            return Err(Error::NotConverged {
                iterations,
                residual,
                best: w.iter().copied().collect(),
            });
        }
        iterations += 1;
        let step = match h.cholesky() {
            Some(c) => -c.solve(&g),
            None => -&g,
        };
        let slope = g.dot(&step);
        let mut t = 1.0;
        loop {
            let trial = &w + &step * t;
            let ft = r.objective(a, &trial);
            let gradient_drop = t == 1.0 && r.derivatives(a, &trial).0.norm() < residual;
            if ft <= fw + ARMIJO * t * slope || gradient_drop {
                w = trial;
                fw = ft;
                break;
            }
            t *= cfg.backtrack_factor;
            if t < MIN_STEP {
                return Err(Error::NotConverged {
                    iterations,
                    residual,
                    best: w.iter().copied().collect(),
                });
            }
        }
    }
}
