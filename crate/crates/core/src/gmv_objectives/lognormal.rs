use super::MomentPair;
use crate::error::{domain, Result};
use crate::numerics::normal_rule;

const HERMITE_NODES: usize = 64;

/// Linear utility of `X ~ N(μ, σ²)` with `μ ~ N(μ₀, σ₀²)`: law of total variance.
pub fn linear_moments(mu0: f64, sigma2: f64, sigma0_2: f64) -> MomentPair {
    MomentPair {
        mean: mu0,
        var: sigma2 + sigma0_2,
    }
}

/// Log utility of a lognormal outcome `ln X ~ N(μ, σ²)`, `μ ~ N(μ₀, σ₀²)`.
/// A Gamma mixture over σ² with mean σ² leaves both moments unchanged.
pub fn log_utility_moments(mu_ln: f64, sigma_ln2: f64, sigma0_ln2: f64) -> Result<MomentPair> {
    if !(sigma_ln2 >= 0.0) || !(sigma0_ln2 >= 0.0) {
        return domain("log-utility variances must be non-negative");
    }
    MomentPair::new(mu_ln, sigma_ln2 + sigma0_ln2)
}

/// Power utility `(x^{1−γ} − 1)/(1 − γ)` of a lognormal outcome.
///
/// With σ₀ = 0 both moments are closed form. With σ₀ > 0 the mean is still
/// closed form (σ² → σ² + σ₀²) and the variance is assembled from the
/// conditional moments by Gauss–Hermite quadrature over μ.
pub fn crra_moments(mu_ln: f64, sigma_ln2: f64, sigma0_ln2: f64, gamma: f64) -> Result<MomentPair> {
    if !(gamma > 0.0) || gamma == 1.0 {
        return domain(format!(
            "CRRA gamma must be positive and differ from 1 (use log_utility_moments), got {gamma}"
        ));
    }
    if !(sigma_ln2 >= 0.0) || !(sigma0_ln2 >= 0.0) {
        return domain("CRRA variances must be non-negative");
    }
    let k = 1.0 - gamma;
    let total = sigma_ln2 + sigma0_ln2;
    let mean = (k * mu_ln + 0.5 * k * k * total).exp_m1() / k;
    if sigma0_ln2 == 0.0 {
        // e^{2kμ+k²σ²}(e^{k²σ²} − 1)/k²
        let var = (2.0 * k * mu_ln + k * k * sigma_ln2).exp() * (k * k * sigma_ln2).exp_m1() / (k * k);
        return MomentPair::new(mean, var);
    }
    let sd0 = sigma0_ln2.sqrt();
    let rule = normal_rule(HERMITE_NODES);
    let cond_mean = |mu: f64| (k * mu + 0.5 * k * k * sigma_ln2).exp_m1() / k;
    let cond_var = |mu: f64| (2.0 * k * mu + k * k * sigma_ln2).exp() * (k * k * sigma_ln2).exp_m1() / (k * k);
    let within = rule.expect(|z| cond_var(mu_ln + sd0 * z));
    let between = rule.expect(|z| (cond_mean(mu_ln + sd0 * z) - mean).powi(2));
    MomentPair::new(mean, within + between)
}
