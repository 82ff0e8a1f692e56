//! Univariate limiting forms of the optimal weight, used to check the
//! solvers in regimes where they simplify. `mu` is the excess drift
//! throughout, `sigma2` the variance scale.

/// ALD asymmetry from the Kotz skew parameter: `μ_a = σ(1/κ − κ)/√2`.
pub fn ald_mu_a_from_kappa(sigma: f64, kappa: f64) -> f64 {
    sigma * (1.0 / kappa - kappa) / std::f64::consts::SQRT_2
}

/// ALD weight as the drift dominates: `√2/(aσκ)`, independent of `mu`.
pub fn ald_weight_large_mu(a: f64, sigma: f64, kappa: f64) -> f64 {
    std::f64::consts::SQRT_2 / (a * sigma * kappa)
}

/// ALD weight for small drift and skew `κ ≈ 1`: `μ/(aσ²) − √2(κ − 1)/(aσ)`.
pub fn ald_weight_small_skew(mu: f64, a: f64, sigma: f64, kappa: f64) -> f64 {
    mu / (a * sigma * sigma) - std::f64::consts::SQRT_2 * (kappa - 1.0) / (a * sigma)
}

/// Exact Gamma-variance weight, the positive root of
/// `μ(1 − a²w²σ²/α) = awσ²`.
pub fn gamma_weight_exact(mu: f64, a: f64, sigma2: f64, alpha: f64) -> f64 {
    let b = a * sigma2;
    2.0 * mu / (b + (b * b + 4.0 * mu * mu * a * a * sigma2 / alpha).sqrt())
}

/// Gamma-variance weight for large `α`: `μ/(aσ²) − μ³/(aασ⁴)`.
pub fn gamma_weight_small_uncertainty(mu: f64, a: f64, sigma2: f64, alpha: f64) -> f64 {
    mu / (a * sigma2) - mu.powi(3) / (a * alpha * sigma2 * sigma2)
}

/// Gamma-variance weight for small `α` and `μ > 0`: `√α/(aσ) − α/(2aμ)`.
pub fn gamma_weight_large_uncertainty(mu: f64, a: f64, sigma2: f64, alpha: f64) -> f64 {
    alpha.sqrt() / (a * sigma2.sqrt()) - alpha / (2.0 * a * mu)
}
