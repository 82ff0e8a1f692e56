//! Input documents, one per command. Every document carries
//! `schema_version` and rejects unknown fields.

use gmv_core::allocators::{Constraints, MinimaxMode, RegimeSpec, SolverConfig};
use gmv_core::gmv_objectives::{CeFamily, Gamble};
use gmv_core::kelly::{BayesBinaryBet, BinaryBet, LeverageInputs};
use gmv_core::market_model::{HorizonSpec, PosteriorBelief, ReturnModel};
use gmv_core::mc_oracle::{BetSource, SimConfig};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, CliError};

pub const SCHEMA_VERSION: u32 = 1;

pub fn check_version(v: u32) -> Result<(), CliError> {
    if v != SCHEMA_VERSION {
        return invalid(format!(
            "unsupported schema_version {v} (this build reads {SCHEMA_VERSION})"
        ));
    }
    Ok(())
}

fn gaussian() -> CeFamily {
    CeFamily::Gaussian
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrateInput {
    pub schema_version: u32,
    pub gamble: Gamble,
    /// Return distribution assumed for the gamble; Gaussian when absent.
    #[serde(default = "gaussian")]
    pub distribution: CeFamily,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodChoice {
    /// Closed form when it exists and no constraints apply, else numeric.
    #[default]
    Auto,
    Closed,
    Numeric,
}

#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Strategy {
    Cara {
        model: ReturnModel,
        #[serde(default)]
        method: MethodChoice,
        #[serde(default)]
        constraints: Constraints,
    },
    RiskParity {
        sigma: Vec<Vec<f64>>,
        /// Optional drifts, used only to report portfolio return and Sharpe.
        #[serde(default)]
        mu: Option<Vec<f64>>,
        #[serde(default)]
        r0: f64,
    },
    Minimax {
        mode: MinimaxMode,
    },
    TwoState {
        regimes: RegimeSpec,
    },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AllocateInput {
    pub schema_version: u32,
    #[serde(default)]
    pub asset_names: Option<Vec<String>>,
    /// CARA coefficient for the `cara` and `two_state` strategies.
    #[serde(default)]
    pub risk_aversion: Option<f64>,
    #[serde(default)]
    pub solver: Option<SolverConfig>,
    pub strategy: Strategy,
}

#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LeverageUtility {
    /// Log utility of terminal wealth scored by GMV (Kelly family).
    #[default]
    Log,
    Crra {
        gamma: f64,
    },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LeverageInput {
    pub schema_version: u32,
    pub inputs: LeverageInputs,
    #[serde(default)]
    pub utility: LeverageUtility,
}

#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BetSpec {
    Fixed(BinaryBet),
    Bayes(BayesBinaryBet),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BetInput {
    pub schema_version: u32,
    pub bet: BetSpec,
}

#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Process {
    Abm {
        x0: f64,
        belief: PosteriorBelief,
        sigma2: f64,
        horizon: HorizonSpec,
    },
    Gbm {
        x0: f64,
        belief: PosteriorBelief,
        sigma2: f64,
        horizon: HorizonSpec,
    },
    Binary {
        source: BetSource,
        f: f64,
    },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateInput {
    pub schema_version: u32,
    pub config: SimConfig,
    pub process: Process,
}

/// Where the pipeline takes the return and variance fed to the leverage step.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LeverageSource {
    /// Caller-supplied per-period moments of the levered portfolio.
    Explicit {
        mu_r: f64,
        sigma_r2: f64,
        #[serde(default)]
        sigma0_2: f64,
        /// Defaults to the model's risk-free rate.
        #[serde(default)]
        r0: Option<f64>,
        #[serde(default)]
        alpha: Option<f64>,
    },
    /// Moments of the allocated portfolio itself.
    Portfolio {
        #[serde(default)]
        alpha: Option<f64>,
    },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineInput {
    pub schema_version: u32,
    #[serde(default)]
    pub asset_names: Option<Vec<String>>,
    pub model: ReturnModel,
    pub risk_aversion: f64,
    pub lambda: f64,
    pub horizon: f64,
    pub leverage_source: LeverageSource,
    #[serde(default)]
    pub method: MethodChoice,
    #[serde(default)]
    pub solver: Option<SolverConfig>,
}
