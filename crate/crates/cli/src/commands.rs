//! Command bodies: validated input document in, report out.

use gmv_core::allocators::{
    minimax_allocate, risk_parity, solve_closed, solve_numeric, two_state_allocate, AllocationResult, Constraints,
    MinimaxMode, SolverConfig,
};
use gmv_core::gmv_objectives::calibrate_risk_aversion;
use gmv_core::kelly::{
    bayes_binary_optimal, binary_gmv, binary_kelly_exact, combine_allocation, crra_leverage, kelly_gmv,
    kelly_gmv_uncertain_variance, LeverageInputs, LeverageResult,
};
use gmv_core::linalg::{from_rows, quad_form};
use gmv_core::market_model::{HorizonSpec, ReturnModel};
use gmv_core::mc_oracle::{simulate_abm, simulate_binary, simulate_gbm};
use gmv_core::Error;
use nalgebra::DVector;

use crate::error::{invalid, CliError};
use crate::report::*;
use crate::schema::*;
use crate::Overrides;

fn names(given: Option<Vec<String>>, n: usize) -> Result<Vec<String>, CliError> {
    match given {
        Some(v) if v.len() != n => invalid(format!("asset_names has {} entries for {n} assets", v.len())),
        Some(v) => Ok(v),
        None => Ok((1..=n).map(|i| format!("asset_{i}")).collect()),
    }
}

fn required(a: Option<f64>, what: &str) -> Result<f64, CliError> {
    a.ok_or_else(|| CliError::Validation(format!("{what} is required")))
}

fn cara(
    model: &ReturnModel,
    a: f64,
    method: MethodChoice,
    cons: Constraints,
    cfg: &SolverConfig,
) -> Result<AllocationResult, CliError> {
    let constrained = cons != Constraints::NONE;
    let r = match method {
        MethodChoice::Closed if constrained => {
            return invalid("method `closed` cannot honour constraints; use `numeric` or `auto`")
        }
        MethodChoice::Closed => solve_closed(model, a),
        MethodChoice::Numeric => solve_numeric(model, a, cfg, cons),
        MethodChoice::Auto if constrained => solve_numeric(model, a, cfg, cons),
        MethodChoice::Auto => match solve_closed(model, a) {
            Err(Error::ClosedFormUnavailable(_)) => solve_numeric(model, a, cfg, cons),
            r => r,
        },
    };
    Ok(r?)
}

fn allocation_report(strategy: &str, asset_names: Vec<String>, r: AllocationResult) -> AllocationReport {
    AllocationReport {
        schema_version: SCHEMA_VERSION,
        command: "allocate".into(),
        strategy: strategy.into(),
        asset_names,
        w: r.w,
        cash: r.cash,
        mu_p: Some(r.mu_p),
        sigma0_p2: r.sigma0_p2,
        sigma_p2: r.sigma_p2,
        sigma_p: r.sigma_p2.sqrt(),
        sharpe: Some(r.sharpe),
        method: Some(r.method),
        residual: Some(r.residual),
        iterations: Some(r.iterations),
        objective: None,
        n_top: None,
    }
}

/// Report for weights that come without portfolio statistics.
fn weights_report(
    strategy: &str,
    asset_names: Vec<String>,
    w: Vec<f64>,
    sigma: &[Vec<f64>],
    excess: Option<&[f64]>,
) -> Result<AllocationReport, CliError> {
    let s = from_rows(sigma)?;
    let wv = DVector::from_column_slice(&w);
    let sigma_p2 = quad_form(&s, &wv);
    let sigma_p = sigma_p2.sqrt();
    let mu_p = excess.map(|m| m.iter().zip(&w).map(|(m, w)| m * w).sum::<f64>());
    Ok(AllocationReport {
        schema_version: SCHEMA_VERSION,
        command: "allocate".into(),
        strategy: strategy.into(),
        asset_names,
        cash: 1.0 - w.iter().sum::<f64>(),
        w,
        mu_p,
        sigma0_p2: 0.0,
        sigma_p2,
        sigma_p,
        sharpe: mu_p.map(|m| if sigma_p > 0.0 { m / sigma_p } else { 0.0 }),
        method: None,
        residual: None,
        iterations: None,
        objective: None,
        n_top: None,
    })
}

pub fn calibrate(input: CalibrateInput) -> Result<CalibrateReport, CliError> {
    check_version(input.schema_version)?;
    let a = calibrate_risk_aversion(&input.gamble, input.distribution)?;
    Ok(CalibrateReport {
        schema_version: SCHEMA_VERSION,
        command: "calibrate".into(),
        risk_aversion: a,
        risk_aversion_1dp: (a * 10.0).round() / 10.0,
        gamble_mean: input.gamble.mean(),
        gamble_variance: input.gamble.variance(),
        ce: input.gamble.ce(),
    })
}

pub fn allocate(input: AllocateInput, ov: Overrides) -> Result<AllocationReport, CliError> {
    check_version(input.schema_version)?;
    let cfg = input.solver.unwrap_or_default();
    cfg.validate()?;
    let a = ov.risk_aversion.or(input.risk_aversion);
    match input.strategy {
        Strategy::Cara {
            model,
            method,
            constraints,
        } => {
            let names = names(input.asset_names, model.n_assets())?;
            let r = cara(&model, required(a, "risk_aversion")?, method, constraints, &cfg)?;
            Ok(allocation_report("cara", names, r))
        }
        Strategy::TwoState { regimes } => {
            let names = names(input.asset_names, regimes.mu_n.len())?;
            let r = two_state_allocate(&regimes, required(a, "risk_aversion")?, &cfg)?;
            Ok(allocation_report("two_state", names, r))
        }
        Strategy::RiskParity { sigma, mu, r0 } => {
            if a.is_some() {
                return invalid("risk_aversion does not apply to risk_parity");
            }
            let names = names(input.asset_names, sigma.len())?;
            if mu.as_ref().is_some_and(|m| m.len() != sigma.len()) {
                return invalid("mu length does not match sigma");
            }
            let w = risk_parity(&from_rows(&sigma)?, 1.0)?;
            let excess: Option<Vec<f64>> = mu.map(|m| m.iter().map(|x| x - r0).collect());
            weights_report(
                "risk_parity",
                names,
                w.iter().copied().collect(),
                &sigma,
                excess.as_deref(),
            )
        }
        Strategy::Minimax { mut mode } => {
            match (&mut mode, a) {
                (MinimaxMode::WorstDriftForm { a: doc_a, .. }, Some(a)) => *doc_a = a,
                (MinimaxMode::PenaltyForm { .. }, Some(_)) => {
                    return invalid("risk_aversion does not apply to the minimax penalty form")
                }
                _ => {}
            }
            let r = minimax_allocate(&mode, &cfg)?;
            let (sigma, mu0) = match &mode {
                MinimaxMode::PenaltyForm { sigma, .. } => (sigma, None),
                MinimaxMode::WorstDriftForm { sigma, mu0, .. } => (sigma, Some(mu0.as_slice())),
            };
            let names = names(input.asset_names, sigma.len())?;
            let mut rep = weights_report("minimax", names, r.w, sigma, mu0)?;
            rep.objective = Some(r.objective);
            rep.n_top = Some(r.n_top);
            Ok(rep)
        }
    }
}

fn log_leverage(inputs: &LeverageInputs) -> Result<LeverageResult, CliError> {
    Ok(match inputs.alpha {
        Some(_) => kelly_gmv_uncertain_variance(inputs)?,
        None => kelly_gmv(inputs)?,
    })
}

pub fn leverage(input: LeverageInput, ov: Overrides) -> Result<LeverageReport, CliError> {
    check_version(input.schema_version)?;
    let mut inputs = input.inputs;
    if let Some(l) = ov.lambda {
        inputs.lambda = l;
    }
    if let Some(h) = ov.horizon {
        inputs.horizon = h;
    }
    inputs.validate()?;
    let result = match input.utility {
        LeverageUtility::Log => log_leverage(&inputs)?,
        LeverageUtility::Crra { .. } if inputs.alpha.is_some() => {
            return invalid("crra utility has no uncertain-variance solver; drop alpha")
        }
        LeverageUtility::Crra { gamma } => crra_leverage(gamma, &inputs)?,
    };
    Ok(LeverageReport {
        schema_version: SCHEMA_VERSION,
        command: "leverage".into(),
        inputs,
        result,
    })
}

pub fn bet(input: BetInput, ov: Overrides) -> Result<BetReport, CliError> {
    check_version(input.schema_version)?;
    let report = |kind: &str, p, result, kelly_fraction, delta| BetReport {
        schema_version: SCHEMA_VERSION,
        command: "bet".into(),
        kind: kind.into(),
        p,
        result,
        kelly_fraction,
        delta,
    };
    match input.bet {
        BetSpec::Fixed(mut b) => {
            if let Some(l) = ov.lambda {
                b.lambda = l;
            }
            let r = binary_gmv(&b)?;
            let k = binary_kelly_exact(&b)?;
            Ok(report("fixed", b.p, r, Some(k.f_star), r.kelly_multiplier))
        }
        BetSpec::Bayes(mut b) => {
            if let Some(l) = ov.lambda {
                b.lambda = l;
            }
            let r = bayes_binary_optimal(&b)?;
            Ok(report("bayes", b.p0(), r, None, None))
        }
    }
}

/// Applies `--horizon`; a single-step horizon stays single-step.
fn override_horizon(h: &mut HorizonSpec, t: Option<f64>) {
    if let Some(t) = t {
        if h.dt == h.horizon && h.t0 == 0.0 {
            h.dt = t;
        }
        h.horizon = t;
    }
}

fn named(quantity: &str, stats: gmv_core::mc_oracle::PathStats) -> NamedStats {
    NamedStats {
        quantity: quantity.into(),
        stats,
    }
}

pub fn simulate(input: SimulateInput, ov: Overrides) -> Result<SimulateReport, CliError> {
    check_version(input.schema_version)?;
    let mut cfg = input.config;
    if let Some(s) = ov.seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    let (process, n_steps, stats) = match input.process {
        Process::Abm {
            x0,
            belief,
            sigma2,
            mut horizon,
        } => {
            override_horizon(&mut horizon, ov.horizon);
            let s = simulate_abm(x0, &belief, sigma2, &horizon, &cfg)?;
            (
                "abm",
                Some(s.n_steps),
                vec![named("terminal", s.terminal), named("increment", s.increment)],
            )
        }
        Process::Gbm {
            x0,
            belief,
            sigma2,
            mut horizon,
        } => {
            override_horizon(&mut horizon, ov.horizon);
            let s = simulate_gbm(x0, &belief, sigma2, &horizon, &cfg)?;
            (
                "gbm",
                Some(s.n_steps),
                vec![
                    named("log_terminal", s.log_terminal),
                    named("log_increment", s.log_increment),
                    named("wealth", s.wealth),
                ],
            )
        }
        Process::Binary { source, f } => {
            if ov.horizon.is_some() {
                return invalid("--horizon does not apply to binary betting; set the trial count instead");
            }
            let s = simulate_binary(&source, f, &cfg)?;
            ("binary", None, vec![named("log_wealth", s)])
        }
    };
    Ok(SimulateReport {
        schema_version: SCHEMA_VERSION,
        command: "simulate".into(),
        process: process.into(),
        seed: cfg.seed,
        n_steps,
        stats,
    })
}

pub fn pipeline(input: PipelineInput, ov: Overrides) -> Result<PipelineReport, CliError> {
    check_version(input.schema_version)?;
    let cfg = input.solver.unwrap_or_default();
    cfg.validate()?;
    let model = &input.model;
    let asset_names = names(input.asset_names, model.n_assets())?;
    let a = ov.risk_aversion.unwrap_or(input.risk_aversion);
    let lambda = ov.lambda.unwrap_or(input.lambda);
    let horizon = ov.horizon.unwrap_or(input.horizon);

    let alloc = cara(model, a, input.method, Constraints::NONE, &cfg)?;
    let leverage_inputs = match input.leverage_source {
        LeverageSource::Explicit {
            mu_r,
            sigma_r2,
            sigma0_2,
            r0,
            alpha,
        } => LeverageInputs {
            mu_r,
            sigma_r2,
            r0: r0.unwrap_or(model.r0()),
            sigma0_2,
            alpha,
            horizon,
            lambda,
        },
        LeverageSource::Portfolio { alpha } => LeverageInputs {
            mu_r: model.r0() + alloc.mu_p,
            sigma_r2: alloc.sigma_p2 - alloc.sigma0_p2,
            r0: model.r0(),
            sigma0_2: alloc.sigma0_p2,
            alpha,
            horizon,
            lambda,
        },
    };
    leverage_inputs.validate()?;
    let leverage = log_leverage(&leverage_inputs)?;
    let f_star = leverage.f_star;
    let w_f: Vec<f64> = combine_allocation(&DVector::from_column_slice(&alloc.w), f_star)
        .iter()
        .copied()
        .collect();
    Ok(PipelineReport {
        schema_version: SCHEMA_VERSION,
        command: "pipeline".into(),
        asset_names,
        portfolio: PortfolioStats {
            mu_p: alloc.mu_p,
            sigma0_p2: alloc.sigma0_p2,
            sigma_p2: alloc.sigma_p2,
            sigma_p: alloc.sigma_p2.sqrt(),
            sharpe: alloc.sharpe,
            cash: alloc.cash,
        },
        w_star: alloc.w,
        leverage_inputs,
        leverage,
        f_star,
        cash_f: 1.0 - w_f.iter().sum::<f64>(),
        w_f,
    })
}
