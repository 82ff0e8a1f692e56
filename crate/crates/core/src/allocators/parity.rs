use nalgebra::{DMatrix, DVector};

use crate::error::{domain, Error, Result};
use crate::linalg::{cholesky, quad_form};

const MAX_SWEEPS: usize = 10_000;
const SWEEP_TOL: f64 = 1e-12;
const POLISH_STEPS: usize = 20;

/// Per-asset contributions `wᵢ(Σw)ᵢ`; they sum to `wᵀΣw`.
pub fn risk_contributions(sigma: &DMatrix<f64>, w: &DVector<f64>) -> DVector<f64> {
    w.component_mul(&(sigma * w))
}

fn spread(sigma: &DMatrix<f64>, w: &DVector<f64>) -> f64 {
    let rc = risk_contributions(sigma, w);
    (rc.max() - rc.min()) / quad_form(sigma, w)
}

/// Equal-risk-contribution weights. Minimizes `½wᵀΣw − b Σ ln wᵢ` over
/// `w > 0` by cyclic coordinate descent, where each coordinate solves
/// `Σᵢᵢwᵢ² + cᵢwᵢ − b = 0` exactly, then polishes the stationarity condition
/// `Σw = b/w` with Newton and rescales onto the budget `Σwᵢ = 1`. The
/// minimizer's direction does not depend on `b`.
pub fn risk_parity(sigma: &DMatrix<f64>, b: f64) -> Result<DVector<f64>> {
    let n = sigma.nrows();
    if n == 0 || sigma.ncols() != n {
        return Err(Error::Dimension(
            "risk parity needs a square, non-empty covariance".into(),
        ));
    }
    if !(b > 0.0) || !b.is_finite() {
        return domain(format!("risk-parity penalty b must be positive, got {b}"));
    }
    cholesky(sigma)?;
    let mut w = DVector::from_iterator(n, (0..n).map(|i| (b / sigma[(i, i)]).sqrt()));
    let mut sweeps = 0;
    loop {
        let mut change: f64 = 0.0;
        for i in 0..n {
            let d = sigma[(i, i)];
            let c = sigma.row(i).transpose().dot(&w) - d * w[i];
            // positive root written to avoid cancellation when c > 0
            let next = if c > 0.0 {
                2.0 * b / (c + (c * c + 4.0 * d * b).sqrt())
            } else {
                (-c + (c * c + 4.0 * d * b).sqrt()) / (2.0 * d)
            };
            change = change.max((next - w[i]).abs() / next);
            w[i] = next;
        }
        sweeps += 1;
        if change <= SWEEP_TOL {
            break;
        }
        if sweeps >= MAX_SWEEPS {
            return Err(Error::NotConverged {
                iterations: sweeps,
                residual: spread(sigma, &w),
                best: (&w / w.sum()).iter().copied().collect(),
            });
        }
    }
    for _ in 0..POLISH_STEPS {
        let r = sigma * &w - w.map(|x| b / x);
        if r.amax() <= 1e-15 * b / w.amin() {
            break;
        }
        let jac = sigma + DMatrix::from_diagonal(&w.map(|x| b / (x * x)));
        let Some(step) = jac.cholesky().map(|c| c.solve(&r)) else {
            break;
        };
        let next = &w - step;
        if next.iter().any(|x| *x <= 0.0) {
            break;
        }
        w = next;
    }
    let w = &w / w.sum();
    let residual = spread(sigma, &w);
    if residual > 1e-8 {
        return Err(Error::NotConverged {
            iterations: sweeps,
            residual,
            best: w.iter().copied().collect(),
        });
    }
    Ok(w)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagonal_inverse_vol() {
        let s = DMatrix::from_diagonal(&DVector::from_vec(vec![0.04, 0.09, 0.01]));
        let w = risk_parity(&s, 1.0).unwrap();
        let inv = DVector::from_vec(vec![5.0, 10.0 / 3.0, 10.0]);
        let expect = &inv / inv.sum();
        assert!((w - expect).amax() < 1e-14);
    }

    #[test]
    fn equal_vols_split_evenly() {
        for rho in [-0.6, 0.0, 0.9] {
            let s = DMatrix::from_row_slice(2, 2, &[0.04, 0.04 * rho, 0.04 * rho, 0.04]);
            let w = risk_parity(&s, 0.3).unwrap();
            assert!((w[0] - 0.5).abs() < 1e-14 && (w[1] - 0.5).abs() < 1e-14);
        }
    }

    #[test]
    fn penalty_weight_only_scales() {
        let s = DMatrix::from_row_slice(3, 3, &[0.04, 0.01, -0.004, 0.01, 0.09, 0.02, -0.004, 0.02, 0.0225]);
        let a = risk_parity(&s, 0.01).unwrap();
        let b = risk_parity(&s, 5.0).unwrap();
        assert!((a - &b).amax() < 1e-12);
        let rc = risk_contributions(&s, &b);
        assert!((rc.max() - rc.min()) <= 1e-8 * quad_form(&s, &b));
    }
}
