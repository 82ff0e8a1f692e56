mod common;

use gmv_core::allocators::{
    scaling_ald, scaling_wishart, sharpe_sq, solve_closed, solve_gaussian_closed, solve_numeric, two_state_objective,
    Constraints, RegimeSpec, SolverConfig, StressCovariance,
};
use gmv_core::gmv_objectives::{
    cara_moments_multi, cara_moments_uni, cara_objective_multi, crra_moments, gmv_score, log_utility_moments,
    CaraModel, MomentPair,
};
use gmv_core::kelly::{
    bayes_binary_moments, binary_gmv, binary_log_moments, kelly_gmv, kelly_gmv_objective, BayesBinaryBet, BinaryBet,
    LeverageInputs,
};
use gmv_core::market_model::{
    horizon_return_moments, posterior_update_multi, HorizonSpec, PosteriorBelief, ReturnModel,
};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn horizon_var(s2: f64, s_pd2: f64, s_mu2: f64, t: f64) -> f64 {
    let b = PosteriorBelief::new(0.05, s_pd2, s_mu2, 1.0).unwrap();
    horizon_return_moments(&b, s2, &HorizonSpec::single(t).unwrap())
        .unwrap()
        .var
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn horizon_variance_increases_in_every_input(
        s2 in 0.001f64..0.2, s_pd2 in 0.0f64..0.05, s_mu2 in 0.0f64..0.05, t in 0.1f64..10.0, bump in 1.01f64..2.0
    ) {
        let base = horizon_var(s2, s_pd2, s_mu2, t);
        prop_assert!(horizon_var(s2 * bump, s_pd2, s_mu2, t) > base);
        prop_assert!(horizon_var(s2, s_pd2 + 0.001 * bump, s_mu2, t) > base);
        prop_assert!(horizon_var(s2, s_pd2, s_mu2 + 0.001 * bump, t) > base);
        prop_assert!(horizon_var(s2, s_pd2, s_mu2, t * bump) > base);
    }

    #[test]
    fn posterior_precision_is_additive(seed in 0u64..10_000, n in 1usize..5, n_obs in 0.5f64..300.0) {
        let mut r = common::rng(seed);
        let prior = common::random_spd(&mut r, n, 0.1);
        let obs = common::random_spd(&mut r, n, 0.2);
        let m = DVector::zeros(n);
        let (_, post) = posterior_update_multi(&m, &prior, &m, &obs, n_obs).unwrap();
        let lhs = post.try_inverse().unwrap();
        let rhs = prior.try_inverse().unwrap() + obs.try_inverse().unwrap() * n_obs;
        prop_assert!((&lhs - &rhs).amax() <= 1e-10 * rhs.amax().max(1.0));
    }

    #[test]
    fn closed_form_variances_are_non_negative(
        mu in -0.1f64..0.2, s2 in 0.001f64..0.1, s02 in 0.0f64..0.02, a in 0.1f64..8.0, w in -2.0f64..2.0,
        gamma in 0.2f64..8.0, ratio in 1.05f64..50.0
    ) {
        let alpha = 4.0 * a * a * w * w * s2 * ratio + 0.5;
        for m in [
            CaraModel::Known { mu, sigma2: s2 },
            CaraModel::UncertainMean { mu0: mu, sigma2: s2, sigma0_2: s02 },
            CaraModel::GammaVariance { mu0: mu, sigma2: s2, sigma0_2: s02, alpha },
        ] {
            prop_assert!(cara_moments_uni(&m, a, w).unwrap().var >= -1e-12);
        }
        prop_assert!(log_utility_moments(mu, s2, s02).unwrap().var >= -1e-12);
        if (gamma - 1.0).abs() > 1e-3 {
            prop_assert!(crra_moments(mu, s2, s02, gamma).unwrap().var >= -1e-12);
        }
    }

    #[test]
    fn zero_lambda_scores_the_mean(mean in -1e3f64..1e3, var in 0.0f64..1e3) {
        prop_assert_eq!(gmv_score(MomentPair::new(mean, var).unwrap(), 0.0), mean);
    }

    #[test]
    fn gamma_variance_tends_to_known_variance(
        mu in -0.1f64..0.2, s2 in 0.001f64..0.1, s02 in 0.0f64..0.02, a in 0.1f64..5.0, w in -2.0f64..2.0
    ) {
        let g = cara_moments_uni(&CaraModel::GammaVariance { mu0: mu, sigma2: s2, sigma0_2: s02, alpha: 1e8 }, a, w).unwrap();
        let k = cara_moments_uni(&CaraModel::UncertainMean { mu0: mu, sigma2: s2, sigma0_2: s02 }, a, w).unwrap();
        prop_assert!(common::rel_err(g.mean, k.mean) <= 1e-5 || (g.mean - k.mean).abs() < 1e-12);
        prop_assert!(common::rel_err(g.var, k.var) <= 1e-5 || (g.var - k.var).abs() < 1e-12);
    }

    #[test]
    fn weights_are_homogeneous_in_risk_aversion(seed in 0u64..10_000, fam in 0usize..4, kappa in 0.2f64..5.0) {
        let fam = [common::Fam::Gaussian, common::Fam::Wishart, common::Fam::Ald, common::Fam::AldSymmetric][fam];
        let mut r = common::rng(seed);
        let model = common::random_model(&mut r, fam, 3);
        let w1 = DVector::from_vec(solve_closed(&model, 2.0).unwrap().w);
        let wk = DVector::from_vec(solve_closed(&model, 2.0 * kappa).unwrap().w);
        prop_assert!((&w1 / kappa - wk).amax() <= 1e-12 * w1.amax().max(1.0));
    }

    #[test]
    fn gaussian_weights_scale_inversely_with_covariance(seed in 0u64..10_000, kappa in 0.2f64..5.0) {
        let mut r = common::rng(seed);
        let m = common::random_model(&mut r, common::Fam::Gaussian, 4);
        let z = DMatrix::zeros(4, 4);
        let scaled = ReturnModel::gaussian(m.mu0().clone(), m.sigma() * kappa, z, m.r0()).unwrap();
        let w1 = DVector::from_vec(solve_gaussian_closed(&m, 3.0).unwrap().w);
        let wk = DVector::from_vec(solve_gaussian_closed(&scaled, 3.0).unwrap().w);
        prop_assert!((&w1 / kappa - wk).amax() <= 1e-12 * w1.amax().max(1.0));
    }

    #[test]
    fn scaling_factors_only_shrink(q in 1e-6f64..1e3, alpha in 1e-3f64..1e6) {
        let gw = scaling_wishart(q, alpha).unwrap();
        prop_assert!(gw > 0.0 && gw <= 1.0);
        prop_assert!(scaling_wishart(q, alpha * 2.0).unwrap() > gw || gw == 1.0);
        let ga = scaling_ald(q, 0.0).unwrap();
        prop_assert!(ga > 0.0 && ga <= 1.0);
        // certainty limit for ALD is a vanishing Sharpe ratio
        prop_assert!(scaling_ald(q / 2.0, 0.0).unwrap() > ga);
    }

    #[test]
    fn solutions_beat_holding_cash(seed in 0u64..10_000, fam in 0usize..3, a in 0.5f64..8.0) {
        let fam = [common::Fam::Gaussian, common::Fam::Wishart, common::Fam::Ald][fam];
        let mut r = common::rng(seed);
        let model = common::random_model(&mut r, fam, 3);
        let cash = cara_objective_multi(&model, a, &DVector::zeros(3)).unwrap();
        for cons in [Constraints::NONE, Constraints { long_only: true, sum_to_one: false }] {
            let w = DVector::from_vec(solve_numeric(&model, a, &SolverConfig::default(), cons).unwrap().w);
            prop_assert!(cara_objective_multi(&model, a, &w).unwrap() >= cash);
        }
    }

    #[test]
    fn drift_uncertainty_lowers_sharpe(seed in 0u64..10_000, s0 in 1e-4f64..0.05) {
        let mut r = common::rng(seed);
        let m = common::random_model(&mut r, common::Fam::Gaussian, 3);
        let (q, _) = sharpe_sq(m.sigma(), &m.excess()).unwrap();
        let certain = solve_gaussian_closed(&m, 3.0).unwrap();
        prop_assert!((certain.sharpe - q.sqrt()).abs() <= 1e-10);
        let uncertain = m.with_sigma0(DMatrix::identity(3, 3) * s0).unwrap();
        let res = solve_gaussian_closed(&uncertain, 3.0).unwrap();
        prop_assert!(res.sharpe < q.sqrt());
        prop_assert!(cara_moments_multi(&uncertain, 3.0, &DVector::from_vec(res.w)).is_ok());
    }

    #[test]
    fn regime_objective_survives_extreme_exponents(scale in 1.0f64..400.0, p in 0.01f64..0.99) {
        let spec = RegimeSpec {
            p,
            mu_n: vec![0.05, 0.04],
            sigma_n: vec![vec![0.04, 0.0], vec![0.0, 0.03]],
            mu_s: vec![-0.1, -0.2],
            sigma_s: StressCovariance::Equicorrelation { sigma: 0.4, rho: 0.7 },
            r0: 0.0,
        };
        // a²wᵀΣw/2 reaches several hundred in both regimes
        let w = [scale, scale];
        let v = two_state_objective(&spec, 5.0, &w).unwrap();
        prop_assert!(v.is_finite());
        let v2 = two_state_objective(&spec, 5.0, &[-scale, scale]).unwrap();
        prop_assert!(v2.is_finite());
    }

    #[test]
    fn leverage_falls_with_risk_and_penalty(
        mu in 0.01f64..0.2, s2 in 0.005f64..0.2, s02 in 0.0f64..0.01, t in 0.25f64..5.0, lambda in 0.0f64..5.0
    ) {
        let f = |mu: f64, s2: f64, s02: f64, lambda: f64| {
            let i = LeverageInputs::new(mu, s2, 0.01, t, lambda).unwrap().with_drift_uncertainty(s02).unwrap();
            kelly_gmv(&i).unwrap().f_star
        };
        let base = f(mu, s2, s02, lambda);
        prop_assert!(f(mu, s2, s02, lambda + 0.1) < base);
        prop_assert!(f(mu, s2 * 1.1, s02, lambda) < base);
        prop_assert!(f(mu, s2, s02 + 0.001, lambda) < base);
        let inputs = LeverageInputs::new(mu, s2, 0.01, t, lambda).unwrap().with_drift_uncertainty(s02).unwrap();
        let peak = kelly_gmv_objective(&inputs, base);
        prop_assert!(kelly_gmv_objective(&inputs, base + 1e-4) < peak);
        prop_assert!(kelly_gmv_objective(&inputs, base - 1e-4) < peak);
    }

    #[test]
    fn binary_root_satisfies_stationarity(p in 0.51f64..0.95, b in 0.3f64..3.0, a_loss in 0.2f64..1.0, lambda in 0.0f64..4.0) {
        let bet = BinaryBet::new(p, b, a_loss, lambda).unwrap();
        prop_assume!(bet.is_favorable());
        let r = binary_gmv(&bet).unwrap();
        prop_assert!(bet.stationarity(r.f_star).abs() <= 1e-10);
        let gmv = |f: f64| {
            let m = binary_log_moments(&bet, f).unwrap();
            m.mean - 0.5 * lambda * m.var
        };
        let f = r.f_star;
        prop_assert!(gmv(f + 1e-4) < gmv(f) && gmv(f - 1e-4) < gmv(f));
    }

    #[test]
    fn single_bayes_trial_is_a_bernoulli(
        y1 in 0u64..20, extra in 0u64..20, pa in 0.2f64..5.0, pb in 0.2f64..5.0, f in -0.5f64..0.5
    ) {
        let bet = BayesBinaryBet {
            y1, n1: y1 + extra, prior_alpha: pa, prior_beta: pb, n_trials: 1, b: 1.0, a_loss: 1.0, lambda: 1.0,
        };
        let p = (y1 as f64 + pa) / ((y1 + extra) as f64 + pa + pb);
        let (up, down) = (f.ln_1p(), (-f).ln_1p());
        let mean = p * up + (1.0 - p) * down;
        let var = p * (1.0 - p) * (up - down).powi(2);
        let m = bayes_binary_moments(&bet, f).unwrap();
        prop_assert!((m.mean - mean).abs() <= 1e-14);
        prop_assert!((m.var - var).abs() <= 1e-14);
    }
}
