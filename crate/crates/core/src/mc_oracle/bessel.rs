use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{domain, Error, Result};
use crate::numerics::tanh_sinh;

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;
/// Trapezoid step for the integral representation of K_ν; shrunk as `1/√z`
/// for large arguments, where the integrand narrows.
const STEP: f64 = 0.05;
/// Below this argument the leading small-z term of K_ν is used.
const SMALL_Z: f64 = 1e-10;

/// `ln K_ν(z)` for `z > 0`, from `K_ν(z) = ∫₀^∞ e^{−z cosh t} cosh(νt) dt`
/// summed by the trapezoid rule in log space. The integrand is analytic in a
/// strip, so the trapezoid error decays like `e^{−π²/h}`.
pub fn ln_bessel_k(nu: f64, z: f64) -> f64 {
    let nu = nu.abs();
    if !(z > 0.0) {
        return f64::INFINITY;
    }
    if z < SMALL_Z {
        return if nu == 0.0 {
            (-(0.5 * z).ln() - EULER_GAMMA).ln()
        } else {
            (0.5f64).ln() + ln_gamma(nu) + nu * (2.0 / z).ln()
        };
    }
    let ln_cosh = |x: f64| x + (-2.0 * x).exp().ln_1p() - std::f64::consts::LN_2;
    let exponent = |t: f64| -z * (t.cosh() - 1.0) + ln_cosh(nu * t);
    let step = STEP.min(0.25 / z.sqrt());
    let mut terms = Vec::with_capacity(256);
    let mut peak = f64::NEG_INFINITY;
    let mut k = 0usize;
    loop {
        let t = k as f64 * step;
        let e = exponent(t);
        peak = peak.max(e);
        terms.push(e);
        // past the peak and 60 e-folds below it
        if e < peak - 60.0 && e < terms[terms.len().saturating_sub(2)] {
            break;
        }
        k += 1;
    }
    let sum: f64 = terms
        .iter()
        .enumerate()
        .map(|(i, e)| if i == 0 { 0.5 } else { 1.0 } * (e - peak).exp())
        .sum();
    -z + peak + (sum * step).ln()
}

/// Modified Bessel function of the second kind.
pub fn bessel_k(nu: f64, z: f64) -> f64 {
    ln_bessel_k(nu, z).exp()
}

struct Shape {
    center: f64,
    nu: f64,
    kappa: f64,
    ln_norm: f64,
    scale: f64,
}

impl Shape {
    fn new(mu: f64, sigma2: f64, alpha: f64, horizon: f64) -> Result<Self> {
        if !(sigma2 > 0.0) || !(alpha > 0.0) || !(horizon > 0.0) || !mu.is_finite() {
            return domain("Gamma-variance log-wealth density needs sigma2, alpha, horizon > 0");
        }
        let s = (sigma2 * horizon).sqrt();
        let big = 4.0 * alpha + sigma2 * horizon;
        Ok(Self {
            center: mu * horizon,
            nu: 0.5 * (alpha - 1.0),
            kappa: big.sqrt() / (2.0 * s),
            ln_norm: 0.5 * alpha * alpha.ln() + 0.25 * (1.0 - alpha) * big.ln()
                - 0.5 * std::f64::consts::PI.ln()
                - ln_gamma(0.5 * alpha)
                - 0.5 * (1.0 + alpha) * s.ln(),
            scale: s,
        })
    }

    fn ln_pdf(&self, y: f64) -> f64 {
        let d = self.center - y;
        let r = d.abs();
        self.ln_norm + 0.5 * d + self.nu * r.ln() + ln_bessel_k(self.nu, self.kappa * r)
    }
}

/// Log density of `y = ln(X_T/X_0)` when the wealth is lognormal with drift
/// `mu` and a Gamma-distributed variance of mean `sigma2` and shape `alpha/2`:
///
/// `p(y) = α^{α/2} e^{(μT−y)/2} (4α+σ²T)^{(1−α)/4} |μT−y|^ν K_ν(κ|μT−y|)
///        / (√π Γ(α/2) (σ√T)^{(1+α)/2})`,
///
/// with `ν = (α−1)/2` and `κ = √(4α+σ²T)/(2σ√T)`.
pub fn gamma_lognormal_log_density(y: f64, mu: f64, sigma2: f64, alpha: f64, horizon: f64) -> Result<f64> {
    Ok(Shape::new(mu, sigma2, alpha, horizon)?.ln_pdf(y))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DensityMoments {
    pub mass: f64,
    pub mean: f64,
    pub var: f64,
    pub error_estimate: f64,
}

/// Mass, mean and variance of the density above by tanh-sinh quadrature,
/// split at the kink `y = μT` and at `±5σ√T` from it.
pub fn gamma_lognormal_log_moments(mu: f64, sigma2: f64, alpha: f64, horizon: f64) -> Result<DensityMoments> {
    let sh = Shape::new(mu, sigma2, alpha, horizon)?;
    // tails fall like |d|^{ν−1/2} e^{−(κ−1/2)|d|}
    let rate = sh.kappa - 0.5;
    let mut reach = 40.0 / rate;
    while (sh.nu.abs() + 2.5) * reach.ln() - rate * reach > -80.0 {
        reach *= 1.5;
    }
    let near = (5.0 * sh.scale).min(reach);
    let c = sh.center;
    let cuts = [c - reach, c - near, c, c + near, c + reach];
    let integrate = |g: &dyn Fn(f64) -> f64| {
        let mut total = 0.0;
        let mut err = 0.0;
        for w in cuts.windows(2) {
            let (v, e) = tanh_sinh(|y| g(y) * sh.ln_pdf(y).exp(), w[0], w[1], 1e-15);
            total += v;
            err += e;
        }
        (total, err)
    };
    let (mass, e0) = integrate(&|_| 1.0);
    let (mean, e1) = integrate(&|y| y);
    let (var, e2) = integrate(&|y| (y - mean).powi(2));
    if ![mass, mean, var].iter().all(|v| v.is_finite()) {
        return Err(Error::Quadrature {
            estimate: f64::INFINITY,
        });
    }
    Ok(DensityMoments {
        mass,
        mean,
        var,
        error_estimate: e0.max(e1).max(e2),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn half_order_closed_form() {
        // K_{1/2}(z) = √(π/(2z)) e^{−z}
        for z in [1e-3, 0.1, 1.0, 7.5, 40.0, 300.0] {
            let exact = (std::f64::consts::PI / (2.0 * z)).sqrt() * (-z).exp();
            let got = ln_bessel_k(0.5, z);
            assert!((got - exact.ln()).abs() < 1e-13, "z = {z}");
        }
    }

    #[test]
    fn three_halves_closed_form() {
        // K_{3/2}(z) = √(π/(2z)) e^{−z} (1 + 1/z)
        for z in [0.01, 0.5, 3.0, 25.0] {
            let exact = (std::f64::consts::PI / (2.0 * z)).sqrt() * (-z).exp() * (1.0 + 1.0 / z);
            assert!((bessel_k(1.5, z) / exact - 1.0).abs() < 1e-13, "z = {z}");
        }
    }

    #[test]
    fn order_zero_and_one_reference() {
        // tabulated values
        assert!((bessel_k(0.0, 1.0) - 0.421_024_438_240_708_3).abs() < 1e-14);
        assert!((bessel_k(1.0, 1.0) - 0.601_907_230_197_234_6).abs() < 1e-14);
        assert!((bessel_k(0.0, 0.1) - 2.427_069_024_702_017).abs() < 1e-13);
    }

    #[test]
    fn recurrence() {
        // K_{ν+1}(z) = K_{ν−1}(z) + (2ν/z) K_ν(z)
        for (nu, z) in [(1.3, 0.7), (3.5, 2.0), (7.25, 11.0)] {
            let lhs = bessel_k(nu + 1.0, z);
            let rhs = bessel_k(nu - 1.0, z) + 2.0 * nu / z * bessel_k(nu, z);
            assert!((lhs / rhs - 1.0).abs() < 1e-13);
        }
    }

    #[test]
    fn density_normalized_with_total_variance_moments() {
        let (mu, s2, alpha, t) = (0.08, 0.0225, 8.0, 1.0);
        let m = gamma_lognormal_log_moments(mu, s2, alpha, t).unwrap();
        assert!((m.mass - 1.0).abs() < 1e-10);
        assert!((m.mean - (mu - 0.5 * s2) * t).abs() < 1e-10);
        let var = s2 * t + s2 * s2 * t * t / (2.0 * alpha);
        assert!((m.var / var - 1.0).abs() < 1e-8);
    }
}
