use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::SolverConfig;
use crate::error::{domain, Error, Result};
use crate::linalg::{cholesky, from_rows, quad_form};
use crate::numerics::golden_section_max;

/// Weights within this distance of the largest weight count as tied.
pub const TIE_TOL: f64 = 1e-9;
const CAP_WIDTH: f64 = 1e-11;
const PROJECTION_ITERS: usize = 200;

/// L∞-penalized allocations on the simplex.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MinimaxMode {
    /// Minimize `½wᵀΣw + c·maxᵢwᵢ`.
    PenaltyForm { sigma: Vec<Vec<f64>>, c: f64 },
    /// Maximize `μ₀ᵀw + min_y·maxᵢwᵢ − (a/2)wᵀΣw`, where `min_y ≤ 0` is a
    /// caller-chosen worst drift shortfall.
    WorstDriftForm {
        mu0: Vec<f64>,
        min_y: f64,
        sigma: Vec<Vec<f64>>,
        a: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinimaxResult {
    pub w: Vec<f64>,
    /// Objective in the mode's own sense (minimized for the penalty form,
    /// maximized for the worst-drift form).
    pub objective: f64,
    /// Largest weight.
    pub cap: f64,
    /// Number of weights tied at the cap.
    pub n_top: usize,
}

/// Canonical form: minimize `½wᵀQw − lᵀw + c·max w` on the simplex.
struct Program {
    q: DMatrix<f64>,
    l: DVector<f64>,
    c: f64,
    lipschitz: f64,
}

impl Program {
    fn from_mode(mode: &MinimaxMode) -> Result<Self> {
        let (sigma, l, c, scale) = match mode {
            MinimaxMode::PenaltyForm { sigma, c } => {
                if !(*c >= 0.0) || !c.is_finite() {
                    return domain(format!("minimax penalty c must be non-negative, got {c}"));
                }
                let s = from_rows(sigma)?;
                let n = s.nrows();
                (s, DVector::zeros(n), *c, 1.0)
            }
            MinimaxMode::WorstDriftForm { mu0, min_y, sigma, a } => {
                if !(*a > 0.0) || !a.is_finite() {
                    return domain(format!("risk aversion must be positive, got {a}"));
                }
                if !(*min_y <= 0.0) || !min_y.is_finite() {
                    return domain(format!("min_y is a worst-case shortfall and must be <= 0, got {min_y}"));
                }
                let s = from_rows(sigma)?;
                if mu0.len() != s.nrows() || mu0.iter().any(|m| !m.is_finite()) {
                    return Err(Error::Dimension(format!(
                        "mu0 has {} entries for a {}x{} covariance",
                        mu0.len(),
                        s.nrows(),
                        s.ncols()
                    )));
                }
                (s, DVector::from_column_slice(mu0), -*min_y, *a)
            }
        };
        cholesky(&sigma)?;
        let q = sigma * scale;
        let lipschitz = q.norm();
        Ok(Self { q, l, c, lipschitz })
    }

    fn n(&self) -> usize {
        self.l.len()
    }

    fn smooth(&self, w: &DVector<f64>) -> f64 {
        0.5 * quad_form(&self.q, w) - self.l.dot(w)
    }

    fn grad(&self, w: &DVector<f64>) -> DVector<f64> {
        &self.q * w - &self.l
    }

    /// Minimizes the smooth part on `{Σw = 1, 0 ≤ w ≤ cap}`: accelerated
    /// projected gradient, then an exact solve on the identified free set.
    fn capped(&self, cap: f64, cfg: &SolverConfig) -> DVector<f64> {
        let n = self.n();
        let mut w = project(&DVector::from_element(n, 1.0 / n as f64), cap);
        if cap * n as f64 <= 1.0 + 1e-15 {
            return w;
        }
        let step = 1.0 / self.lipschitz;
        let mut y = w.clone();
        let mut t: f64 = 1.0;
        for _ in 0..cfg.max_iter * 20 {
            let next = project(&(&y - self.grad(&y) * step), cap);
            let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
            y = &next + (&next - &w) * ((t - 1.0) / t_next);
            let moved = (&next - &w).amax();
            w = next;
            t = t_next;
            if moved < 1e-14 {
                break;
            }
        }
        self.polish(w, cap)
    }

    /// Re-solves the equality-constrained QP on the free coordinates implied by
    /// `w` and keeps the result if it is feasible and no worse.
    fn polish(&self, w: DVector<f64>, cap: f64) -> DVector<f64> {
        let n = self.n();
        let band = 1e-9 * cap;
        let upper: Vec<usize> = (0..n).filter(|&i| w[i] >= cap - band).collect();
        let free: Vec<usize> = (0..n).filter(|&i| w[i] > band && w[i] < cap - band).collect();
        let k = free.len();
        if k == 0 {
            return w;
        }
        let mut m = DMatrix::zeros(k + 1, k + 1);
        let mut rhs = DVector::zeros(k + 1);
        for (r, &i) in free.iter().enumerate() {
            for (c, &j) in free.iter().enumerate() {
                m[(r, c)] = self.q[(i, j)];
            }
            m[(r, k)] = -1.0;
            m[(k, r)] = 1.0;
            rhs[r] = self.l[i] - upper.iter().map(|&j| self.q[(i, j)] * cap).sum::<f64>();
        }
        rhs[k] = 1.0 - cap * upper.len() as f64;
        let Some(sol) = m.lu().solve(&rhs) else {
            return w;
        };
        let mut exact = DVector::zeros(n);
        for &j in &upper {
            exact[j] = cap;
        }
        for (r, &i) in free.iter().enumerate() {
            exact[i] = sol[r];
        }
        let feasible = free.iter().all(|&i| exact[i] >= 0.0 && exact[i] <= cap);
        if feasible && self.smooth(&exact) <= self.smooth(&w) {
            exact
        } else {
            w
        }
    }

    fn value(&self, cap: f64, cfg: &SolverConfig) -> (f64, DVector<f64>) {
        let w = self.capped(cap, cfg);
        (self.smooth(&w) + self.c * cap, w)
    }
}

/// Euclidean projection onto `{Σw = 1, 0 ≤ w ≤ cap}` via bisection on the shift.
fn project(y: &DVector<f64>, cap: f64) -> DVector<f64> {
    let clipped = |theta: f64| y.map(|v| (v - theta).clamp(0.0, cap));
    let mut lo = y.min() - cap;
    let mut hi = y.max();
    for _ in 0..PROJECTION_ITERS {
        let mid = 0.5 * (lo + hi);
        if clipped(mid).sum() > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= f64::EPSILON * (1.0 + lo.abs().max(hi.abs())) {
            break;
        }
    }
    clipped(0.5 * (lo + hi))
}

/// Solves the L∞-penalized simplex program. The penalty is handled through
/// its epigraph: for each cap `t ≥ maxᵢwᵢ` the inner problem is a capped
/// simplex QP, and the outer function of `t` is convex, so a golden-section
/// search over `t ∈ [1/N, 1]` (with both endpoints checked) finds the optimum.
pub fn minimax_allocate(mode: &MinimaxMode, cfg: &SolverConfig) -> Result<MinimaxResult> {
    cfg.validate()?;
    let prog = Program::from_mode(mode)?;
    let n = prog.n();
    let lo = 1.0 / n as f64;
    let mut best = prog.value(lo, cfg);
    if n > 1 {
        let (t, _) = golden_section_max(|t| -prog.value(t, cfg).0, lo, 1.0, CAP_WIDTH);
        for cap in [t, 1.0] {
            let cand = prog.value(cap, cfg);
            if cand.0 < best.0 {
                best = cand;
            }
        }
    }
    let w = best.1;
    if w.iter().any(|v| !v.is_finite()) {
        return domain("minimax solve produced non-finite weights");
    }
    let cap = w.max();
    let n_top = w.iter().filter(|&&v| v >= cap - TIE_TOL).count();
    let penalized = prog.smooth(&w) + prog.c * cap;
    let objective = match mode {
        MinimaxMode::PenaltyForm { .. } => penalized,
        MinimaxMode::WorstDriftForm { .. } => -penalized,
    };
    Ok(MinimaxResult {
        w: w.iter().copied().collect(),
        objective,
        cap,
        n_top,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sigma3() -> Vec<Vec<f64>> {
        vec![
            vec![0.04, 0.006, 0.0],
            vec![0.006, 0.0225, 0.003],
            vec![0.0, 0.003, 0.09],
        ]
    }

    #[test]
    fn projection_lands_on_the_capped_simplex() {
        let y = DVector::from_vec(vec![0.9, -0.2, 0.5, 0.1]);
        let p = project(&y, 0.4);
        assert!((p.sum() - 1.0).abs() < 1e-14);
        assert!(p.iter().all(|v| (0.0..=0.4).contains(v)));
        assert_eq!(p[0], 0.4);
    }

    #[test]
    fn huge_penalty_gives_equal_weights() {
        let mode = MinimaxMode::PenaltyForm {
            sigma: sigma3(),
            c: 1e9,
        };
        let r = minimax_allocate(&mode, &SolverConfig::default()).unwrap();
        assert!(r.w.iter().all(|v| (v - 1.0 / 3.0).abs() < 1e-12));
        assert_eq!(r.n_top, 3);
    }

    #[test]
    fn tiny_penalty_is_min_variance() {
        let mode = MinimaxMode::PenaltyForm {
            sigma: sigma3(),
            c: 1e-14,
        };
        let r = minimax_allocate(&mode, &SolverConfig::default()).unwrap();
        // unconstrained minimum variance is long-only here
        let s = from_rows(&sigma3()).unwrap();
        let x = crate::linalg::spd_solve(&s, &DVector::from_element(3, 1.0)).unwrap();
        let mv = &x / x.sum();
        assert!((DVector::from_vec(r.w) - mv).amax() < 1e-8);
    }

    #[test]
    fn worst_drift_ties_the_top_weights() {
        let mode = MinimaxMode::WorstDriftForm {
            mu0: vec![0.12, 0.05, 0.04],
            min_y: -0.2,
            sigma: sigma3(),
            a: 2.0,
        };
        let r = minimax_allocate(&mode, &SolverConfig::default()).unwrap();
        assert!(r.n_top >= 2, "{:?}", r.w);
        assert!((r.w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}
