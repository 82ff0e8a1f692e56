//! Output documents and their CSV renderings.

use gmv_core::allocators::SolveMethod;
use gmv_core::kelly::{LeverageInputs, LeverageResult};
use gmv_core::mc_oracle::PathStats;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrateReport {
    pub schema_version: u32,
    pub command: String,
    pub risk_aversion: f64,
    /// `risk_aversion` rounded to one decimal.
    pub risk_aversion_1dp: f64,
    pub gamble_mean: f64,
    pub gamble_variance: f64,
    pub ce: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllocationReport {
    pub schema_version: u32,
    pub command: String,
    pub strategy: String,
    pub asset_names: Vec<String>,
    pub w: Vec<f64>,
    pub cash: f64,
    /// Expected excess return of the risky weights, when drifts are known.
    pub mu_p: Option<f64>,
    pub sigma0_p2: f64,
    pub sigma_p2: f64,
    pub sigma_p: f64,
    pub sharpe: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub method: Option<SolveMethod>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub residual: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iterations: Option<usize>,
    /// Minimax only: the penalized objective and the count of tied top weights.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub objective: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_top: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeverageReport {
    pub schema_version: u32,
    pub command: String,
    pub inputs: LeverageInputs,
    pub result: LeverageResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BetReport {
    pub schema_version: u32,
    pub command: String,
    pub kind: String,
    /// Win probability used: given (fixed) or predictive (Bayes).
    pub p: f64,
    pub result: LeverageResult,
    /// Exact Kelly stake `p/a − q/b` (fixed bets).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kelly_fraction: Option<f64>,
    /// Linearized GMV stake over the Kelly stake (fixed bets).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedStats {
    pub quantity: String,
    #[serde(flatten)]
    pub stats: PathStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulateReport {
    pub schema_version: u32,
    pub command: String,
    pub process: String,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_steps: Option<usize>,
    pub stats: Vec<NamedStats>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PortfolioStats {
    pub mu_p: f64,
    pub sigma0_p2: f64,
    pub sigma_p2: f64,
    pub sigma_p: f64,
    pub sharpe: f64,
    pub cash: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineReport {
    pub schema_version: u32,
    pub command: String,
    pub asset_names: Vec<String>,
    pub w_star: Vec<f64>,
    pub portfolio: PortfolioStats,
    pub leverage_inputs: LeverageInputs,
    pub leverage: LeverageResult,
    pub f_star: f64,
    /// Final weights `f*·w*`.
    pub w_f: Vec<f64>,
    pub cash_f: f64,
}

/// Round-trip-safe rendering: 17 significant digits.
fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

fn render(header: Vec<String>, rows: Vec<Vec<String>>) -> Result<Vec<u8>, CliError> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::CRLF)
        .from_writer(Vec::new());
    let err = |e: csv::Error| CliError::Io(format!("csv: {e}"));
    w.write_record(&header).map_err(err)?;
    for r in rows {
        w.write_record(&r).map_err(err)?;
    }
    w.into_inner().map_err(|e| CliError::Io(format!("csv: {e}")))
}

fn strings<const N: usize>(xs: [&str; N]) -> Vec<String> {
    xs.iter().map(|s| s.to_string()).collect()
}

fn leverage_row(r: &LeverageResult) -> Vec<String> {
    vec![
        num(r.f_star),
        num(r.objective),
        num(r.mean_logw),
        num(r.var_logw),
        label(&r.method),
        r.flag.as_ref().map(label).unwrap_or_default(),
        opt(r.f_linearized),
        opt(r.kelly_multiplier),
    ]
}

const LEVERAGE_HEADER: [&str; 8] = [
    "f_star",
    "objective",
    "mean_logw",
    "var_logw",
    "method",
    "flag",
    "f_linearized",
    "kelly_multiplier",
];

/// Snake-case name of a unit enum via its serde form.
fn label<T: Serialize>(v: &T) -> String {
    match serde_json::to_value(v) {
        Ok(serde_json::Value::String(s)) => s,
        Ok(v) => v.to_string(),
        Err(_) => String::new(),
    }
}

pub trait Csv {
    fn to_csv(&self) -> Result<Vec<u8>, CliError>;
}

impl Csv for CalibrateReport {
    fn to_csv(&self) -> Result<Vec<u8>, CliError> {
        render(
            strings([
                "risk_aversion",
                "risk_aversion_1dp",
                "gamble_mean",
                "gamble_variance",
                "ce",
            ]),
            vec![vec![
                num(self.risk_aversion),
                num(self.risk_aversion_1dp),
                num(self.gamble_mean),
                num(self.gamble_variance),
                num(self.ce),
            ]],
        )
    }
}

impl Csv for AllocationReport {
    fn to_csv(&self) -> Result<Vec<u8>, CliError> {
        let mut header = self.asset_names.clone();
        header.extend(strings(["mu_p", "sigma_p", "sharpe", "cash"]));
        let mut row: Vec<String> = self.w.iter().copied().map(num).collect();
        row.extend([opt(self.mu_p), num(self.sigma_p), opt(self.sharpe), num(self.cash)]);
        render(header, vec![row])
    }
}

impl Csv for LeverageReport {
    fn to_csv(&self) -> Result<Vec<u8>, CliError> {
        render(strings(LEVERAGE_HEADER), vec![leverage_row(&self.result)])
    }
}

impl Csv for BetReport {
    fn to_csv(&self) -> Result<Vec<u8>, CliError> {
        let mut header = strings(["kind", "p"]);
        header.extend(strings(LEVERAGE_HEADER));
        header.extend(strings(["kelly_fraction", "delta"]));
        let mut row = vec![self.kind.clone(), num(self.p)];
        row.extend(leverage_row(&self.result));
        row.extend([opt(self.kelly_fraction), opt(self.delta)]);
        render(header, vec![row])
    }
}

impl Csv for SimulateReport {
    fn to_csv(&self) -> Result<Vec<u8>, CliError> {
        let rows = self
            .stats
            .iter()
            .map(|s| {
                let p = &s.stats;
                vec![
                    s.quantity.clone(),
                    p.n.to_string(),
                    num(p.sample_mean),
                    num(p.sample_var),
                    num(p.sample_mode_kde),
                    num(p.mean_se),
                    num(p.var_se),
                ]
            })
            .collect();
        render(
            strings([
                "quantity",
                "n",
                "sample_mean",
                "sample_var",
                "sample_mode_kde",
                "mean_se",
                "var_se",
            ]),
            rows,
        )
    }
}

impl Csv for PipelineReport {
    /// One row for the unlevered allocation and one for the levered weights.
    fn to_csv(&self) -> Result<Vec<u8>, CliError> {
        let mut header = vec!["stage".to_string()];
        header.extend(self.asset_names.iter().cloned());
        header.extend(strings(["mu_p", "sigma_p", "sharpe", "cash", "leverage"]));
        let p = &self.portfolio;
        let f = self.f_star;
        let row = |stage: &str, w: &[f64], mu: f64, sd: f64, cash: f64, lev: f64| {
            let mut r = vec![stage.to_string()];
            r.extend(w.iter().copied().map(num));
            let sharpe = if sd > 0.0 { mu / sd } else { 0.0 };
            r.extend([num(mu), num(sd), num(sharpe), num(cash), num(lev)]);
            r
        };
        render(
            header,
            vec![
                row("allocation", &self.w_star, p.mu_p, p.sigma_p, p.cash, 1.0),
                row("levered", &self.w_f, f * p.mu_p, f.abs() * p.sigma_p, self.cash_f, f),
            ],
        )
    }
}
