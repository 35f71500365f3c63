//! JSON documents written by the subcommands. Infinite interval ends are
//! written as `null`.

use obm_stopping::mc::Sampler;
use obm_stopping::value::ContinuationPiece;
use obm_stopping::{
    BubbleSolution, CounterexampleReport, McEstimate, RegimeTag, Region, VerificationReport,
};
use serde::Serialize;

use crate::cli::{Model, RewardKind};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Serialize)]
pub struct ProblemOut {
    pub sigma1: f64,
    pub sigma2: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reward: Option<RewardKind>,
}

impl ProblemOut {
    pub fn new(model: &Model, r: Option<f64>, reward: Option<RewardKind>) -> Self {
        Self {
            sigma1: model.params.sigma1(),
            sigma2: model.params.sigma2(),
            beta: model.beta.map(|b| b.beta()),
            r,
            reward,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct RegimeOut {
    pub tag: RegimeTag,
    pub thresholds: Vec<f64>,
}

#[derive(Debug, Serialize)]
pub struct SbmOut {
    pub beta: f64,
    /// Stopping region in skew coordinates.
    pub stopping_region: Region,
    pub zero_in_stopping_set: bool,
}

#[derive(Debug, Serialize)]
pub struct SolveReport {
    pub command: &'static str,
    pub schema_version: u32,
    pub problem: ProblemOut,
    pub regime: RegimeOut,
    pub stopping_region: Region,
    pub continuation_region: Region,
    /// `V = coef_psi psi + coef_phi phi` on each continuation component.
    pub continuation_pieces: Vec<ContinuationPiece>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bubble: Option<BubbleSolution>,
    pub verification: VerificationReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sbm: Option<SbmOut>,
}

#[derive(Debug, Serialize)]
pub struct ClassifyReport {
    pub command: &'static str,
    pub schema_version: u32,
    pub problem: ProblemOut,
    pub regime: RegimeOut,
    pub stopping_region: Region,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sbm: Option<SbmOut>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub r: f64,
    /// A regime tag, `CriticalRate` for the inserted critical-rate row, or
    /// `Error`.
    pub regime: String,
    pub thresholds: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Serialize)]
pub struct SweepReport {
    pub command: &'static str,
    pub schema_version: u32,
    pub problem: ProblemOut,
    pub r0: Option<f64>,
    pub rows: Vec<SweepRow>,
}

#[derive(Debug, Serialize)]
pub struct BubbleReport {
    pub command: &'static str,
    pub schema_version: u32,
    pub problem: ProblemOut,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r0: Option<f64>,
    pub bubble: Option<BubbleSolution>,
    pub stopping_region: Option<Region>,
}

#[derive(Debug, Serialize)]
pub struct OracleSummary {
    pub command: &'static str,
    pub schema_version: u32,
    pub problem: ProblemOut,
    pub h: f64,
    pub nodes: usize,
    pub iterations: usize,
    pub stopping_region: Region,
    pub grid_boundaries: Vec<f64>,
    pub analytic_boundaries: Vec<f64>,
    /// Largest distance between matched boundaries; null when the counts
    /// differ.
    pub max_boundary_deviation: Option<f64>,
}

#[derive(Debug, Serialize)]
pub struct SimulateReport {
    pub command: &'static str,
    pub schema_version: u32,
    pub problem: ProblemOut,
    pub x0: f64,
    pub sampler: Sampler,
    pub seed: u64,
    pub dt: f64,
    pub horizon: f64,
    pub estimate: McEstimate,
    pub analytic_value: f64,
    /// `|mean - V(x0)| <= 3 stderr + 5e-3`.
    pub within_tolerance: bool,
}

#[derive(Debug, Serialize)]
pub struct VerifyReport {
    pub command: &'static str,
    pub schema_version: u32,
    pub problem: ProblemOut,
    pub candidate: crate::cli::Candidate,
    pub stopping_region: Region,
    pub verification: VerificationReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub interface_fit: Option<CounterexampleReport>,
}
