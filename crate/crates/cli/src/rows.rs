//! CSV row schemas.

use serde::{Deserialize, Serialize};

/// One heuristic run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveRow {
    pub instance: String,
    pub hash: String,
    pub n: usize,
    #[serde(rename = "T")]
    pub periods: usize,
    #[serde(rename = "S")]
    pub scenarios: usize,
    pub seed: Option<u64>,
    pub variant: String,
    pub lb: f64,
    pub ub: f64,
    pub lp: f64,
    pub lb0: f64,
    pub gap_lb_ub: f64,
    pub gap_lp_lb: f64,
    pub iters: usize,
    pub stop: String,
    pub secs: f64,
}

/// Exact optimum and value-of-modeling measures for one instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExactRow {
    pub instance: String,
    pub hash: String,
    pub n: usize,
    #[serde(rename = "T")]
    pub periods: usize,
    #[serde(rename = "S")]
    pub scenarios: usize,
    pub opt: f64,
    pub enumerated: u64,
    pub ws: Option<f64>,
    pub evpi: Option<f64>,
    pub one_ps: Option<f64>,
    pub vms: Option<f64>,
    /// Optimal value shared by the stochastic and multi-period models.
    pub sp_mps: Option<f64>,
    pub secs: f64,
}

/// Means over the runs of one (n, T, S, variant) group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub n: usize,
    #[serde(rename = "T")]
    pub periods: usize,
    #[serde(rename = "S")]
    pub scenarios: usize,
    pub variant: String,
    pub runs: usize,
    pub instances: usize,
    pub lb: f64,
    pub ub: f64,
    pub gap_lb_ub: f64,
    pub gap_lp_lb: f64,
    pub iters: f64,
    pub secs: f64,
}
