//! Dense SPD helpers on top of nalgebra. Inversion goes through Cholesky only.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};

/// Largest tolerated asymmetry after symmetrization.
pub const SYMMETRY_TOL: f64 = 1e-12;

pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

pub fn max_asymmetry(m: &DMatrix<f64>) -> f64 {
    let mut worst = 0.0_f64;
    for i in 0..m.nrows() {
        for j in 0..i {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}

/// Ratio of extreme absolute eigenvalues, `inf` for an exactly singular matrix.
pub fn condition_number(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return 1.0;
    }
    let eig = symmetrize(m).symmetric_eigenvalues();
    let (lo, hi) = eig.iter().fold((f64::INFINITY, 0.0_f64), |(lo, hi), v| {
        (lo.min(v.abs()), hi.max(v.abs()))
    });
    if lo == 0.0 {
        f64::INFINITY
    } else {
        hi / lo
    }
}

/// Cholesky factor of a symmetric matrix. On failure a single jitter of
/// `1e-10 · trace / N` is added to the diagonal before giving up.
pub fn cholesky(m: &DMatrix<f64>) -> Result<Cholesky<f64, Dyn>> {
    if !m.is_square() {
        return Err(Error::Dimension(format!(
            "expected a square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("matrix has non-finite entries".into()));
    }
    let sym = symmetrize(m);
    if let Some(c) = Cholesky::new(sym.clone()) {
        return Ok(c);
    }
    let n = sym.nrows() as f64;
    let jitter = 1e-10 * sym.trace() / n;
    if jitter > 0.0 {
        let shifted = &sym + DMatrix::identity(sym.nrows(), sym.nrows()) * jitter;
        if let Some(c) = Cholesky::new(shifted) {
            return Ok(c);
        }
    }
    Err(Error::Singular {
        condition: condition_number(&sym),
    })
}

pub fn is_spd(m: &DMatrix<f64>) -> bool {
    m.is_square() && Cholesky::new(symmetrize(m)).is_some()
}

pub fn spd_solve(m: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    if b.len() != m.nrows() {
        return Err(Error::Dimension(format!(
            "rhs length {} vs matrix order {}",
            b.len(),
            m.nrows()
        )));
    }
    Ok(cholesky(m)?.solve(b))
}

pub fn spd_inverse(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let inv = cholesky(m)?.inverse();
    Ok(symmetrize(&inv))
}

pub fn quad_form(m: &DMatrix<f64>, v: &DVector<f64>) -> f64 {
    v.dot(&(m * v))
}

/// Equicorrelation matrix `σ²[(1-ρ)I + ρ11ᵀ]`.
pub fn equicorrelation(sigma: f64, rho: f64, n: usize) -> Result<DMatrix<f64>> {
    if n == 0 {
        return Err(Error::Dimension("equicorrelation needs at least one asset".into()));
    }
    let lower = if n > 1 {
        -1.0 / (n as f64 - 1.0)
    } else {
        f64::NEG_INFINITY
    };
    if !(sigma > 0.0) || !(rho > lower && rho < 1.0) {
        return Err(Error::Domain(format!(
            "equicorrelation requires sigma > 0 and rho in ({lower}, 1), got sigma={sigma}, rho={rho}"
        )));
    }
    let s2 = sigma * sigma;
    Ok(DMatrix::from_fn(n, n, |i, j| if i == j { s2 } else { s2 * rho }))
}

pub fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

pub fn from_rows(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let n = rows.len();
    let m = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != m) {
        return Err(Error::Dimension("ragged matrix rows".into()));
    }
    Ok(DMatrix::from_fn(n, m, |i, j| rows[i][j]))
}
