#![allow(dead_code)]

use gmv_core::market_model::ReturnModel;
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    use rand::SeedableRng;
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random covariance with vols around `vol` and moderate correlation.
pub fn random_spd(rng: &mut ChaCha8Rng, n: usize, vol: f64) -> DMatrix<f64> {
    let a = DMatrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal));
    let corr_ish = (&a * a.transpose()) / n as f64 + DMatrix::identity(n, n) * 0.5;
    let d = DVector::from_fn(n, |i, _| vol * rng.random_range(0.6..1.6) / corr_ish[(i, i)].sqrt());
    DMatrix::from_fn(n, n, |i, j| corr_ish[(i, j)] * d[i] * d[j])
}

pub fn random_vec(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.random_range(lo..hi))
}

#[derive(Debug, Clone, Copy)]
pub enum Fam {
    Gaussian,
    Wishart,
    Ald,
    AldSymmetric,
}

/// Random model with Σ₀ = 0.
pub fn random_model(rng: &mut ChaCha8Rng, fam: Fam, n: usize) -> ReturnModel {
    let sigma = random_spd(rng, n, 0.2);
    let mu = random_vec(rng, n, -0.02, 0.15);
    let z = DMatrix::zeros(n, n);
    let r0 = 0.02;
    match fam {
        Fam::Gaussian => ReturnModel::gaussian(mu, sigma, z, r0),
        Fam::Wishart => {
            let alpha = rng.random_range(2.0..60.0);
            ReturnModel::wishart(mu, sigma, z, alpha, r0)
        }
        Fam::Ald => {
            let mu_a = random_vec(rng, n, -0.03, 0.03);
            ReturnModel::ald(mu, sigma, z, mu_a, r0)
        }
        Fam::AldSymmetric => ReturnModel::ald(mu, sigma, z, DVector::zeros(n), r0),
    }
    .unwrap()
}

pub fn rel_err(x: f64, reference: f64) -> f64 {
    if x == reference {
        0.0
    } else {
        (x - reference).abs() / reference.abs()
    }
}
