use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use obm_stopping::{BaseReward, ObmParams, Reward, SkewParams, Tolerances};
use serde::Serialize;

use crate::error::CliError;

/// Optimal stopping of oscillating Brownian motion: solve, classify, sweep
/// and cross-check free boundaries.
#[derive(Debug, Parser)]
#[command(name = "obmstop", version, args_override_self = true)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve one problem and verify the assembled value function (JSON).
    Solve(SolveArgs),
    /// Report the regime and its thresholds (JSON).
    Classify(ProblemArgs),
    /// Regimes and boundaries over a range of discount rates (CSV or JSON).
    Sweep(SweepArgs),
    /// Bubble boundaries for the quadratic reward, or the critical rate (JSON).
    Bubble(BubbleArgs),
    /// Markov-chain approximation: per-node values and stop flags (CSV).
    Oracle(OracleArgs),
    /// Monte Carlo value estimate (JSON) or raw paths (CSV).
    Simulate(SimulateArgs),
    /// Run the verification checks on a candidate value function (JSON).
    Verify(VerifyArgs),
    /// Data behind the figures (CSV).
    Figure(FigureArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum RewardKind {
    /// (1+x)^+
    Linear,
    /// ((1+x)^+)^2
    #[value(alias = "quadratic")]
    Quad,
    /// (1+y)^+ for skew Brownian motion, seen in natural scale
    LinearSkew,
    /// ((1+y)^+)^2 for skew Brownian motion, seen in natural scale
    QuadSkew,
}

#[derive(Debug, Clone, Args)]
pub struct ConfigArg {
    /// key = value file; keys are long flag names, flags given on the
    /// command line take precedence.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct ModelArgs {
    /// Volatility on the negative half-line.
    #[arg(long)]
    pub sigma1: Option<f64>,
    /// Volatility on the positive half-line.
    #[arg(long)]
    pub sigma2: Option<f64>,
    /// Skew Brownian motion mode: take the volatilities from this skewness
    /// index and report regions in skew coordinates as well.
    #[arg(long, conflicts_with_all = ["sigma1", "sigma2"])]
    pub beta: Option<f64>,
}

/// The resolved model: natural-scale volatilities and, in skew mode, the
/// skewness index.
#[derive(Debug, Clone, Copy)]
pub struct Model {
    pub params: ObmParams,
    pub beta: Option<SkewParams>,
}

impl ModelArgs {
    pub fn resolve(&self) -> Result<Model, CliError> {
        match (self.beta, self.sigma1, self.sigma2) {
            (Some(b), _, _) => {
                let beta = SkewParams::new(b).map_err(CliError::usage)?;
                Ok(Model {
                    params: obm_stopping::sbm_to_obm(beta),
                    beta: Some(beta),
                })
            }
            (None, Some(s1), Some(s2)) => Ok(Model {
                params: ObmParams::new(s1, s2).map_err(CliError::usage)?,
                beta: None,
            }),
            _ => Err(CliError::Usage(
                "give --sigma1 and --sigma2, or --beta".into(),
            )),
        }
    }
}

impl Model {
    pub fn reward(&self, kind: RewardKind) -> Result<Reward, CliError> {
        let skew = |base| {
            self.beta
                .map(|b| Reward::Skew(base, b))
                .ok_or_else(|| CliError::Usage("skew rewards need --beta".into()))
        };
        match kind {
            RewardKind::Linear => Ok(Reward::LinearPlus),
            RewardKind::Quad => Ok(Reward::QuadraticPlus),
            RewardKind::LinearSkew => skew(BaseReward::LinearPlus),
            RewardKind::QuadSkew => skew(BaseReward::QuadraticPlus),
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct TolArgs {
    /// Absolute tolerance on boundary locations.
    #[arg(long, default_value_t = 1e-12)]
    pub root_tol: f64,
    /// Bound on accepted smooth-fit residuals.
    #[arg(long, default_value_t = 1e-10)]
    pub residual_tol: f64,
    /// Iteration cap of the bubble Newton search.
    #[arg(long, default_value_t = 60)]
    pub newton_max_iter: usize,
}

impl TolArgs {
    pub fn tolerances(&self) -> Result<Tolerances, CliError> {
        if !(self.root_tol > 0.0 && self.residual_tol > 0.0) {
            return Err(CliError::Usage("tolerances must be positive".into()));
        }
        Ok(Tolerances {
            root: self.root_tol,
            residual: self.residual_tol,
            newton_max_iter: self.newton_max_iter,
            ..Tolerances::default()
        })
    }
}

#[derive(Debug, Clone, Args)]
pub struct ProblemArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Discount rate.
    #[arg(long)]
    pub r: f64,
    #[arg(long, value_enum, default_value = "quad")]
    pub reward: RewardKind,
    #[command(flatten)]
    pub tol: TolArgs,
    /// Output file; relative paths resolve against $OBMSTOP_OUT_DIR when set.
    /// Standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub config: ConfigArg,
}

#[derive(Debug, Clone, Args)]
pub struct SolveArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    /// Number of points of the verification grid.
    #[arg(long, default_value_t = 2000)]
    pub grid_points: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, value_enum, default_value = "quad")]
    pub reward: RewardKind,
    #[arg(long)]
    pub r_min: f64,
    #[arg(long)]
    pub r_max: f64,
    /// Spacing of the rates; exclusive with --r-count.
    #[arg(long, conflicts_with = "r_count")]
    pub r_step: Option<f64>,
    /// Number of equally spaced rates, ends included.
    #[arg(long)]
    pub r_count: Option<usize>,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: Format,
    #[command(flatten)]
    pub tol: TolArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub config: ConfigArg,
}

#[derive(Debug, Clone, Args)]
pub struct BubbleArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, required_unless_present = "find_r0")]
    pub r: Option<f64>,
    /// Locate the smallest rate with a bubble instead.
    #[arg(long)]
    pub find_r0: bool,
    #[command(flatten)]
    pub tol: TolArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub config: ConfigArg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OracleMethod {
    Policy,
    Sor,
}

#[derive(Debug, Clone, Args)]
pub struct OracleArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    #[arg(long, default_value_t = -2.0, allow_hyphen_values = true)]
    pub xmin: f64,
    /// Upper end; defaults to max(3 c + 3, 5) with c the largest analytic
    /// boundary.
    #[arg(long)]
    pub xmax: Option<f64>,
    /// Number of nodes; defaults to a step of 1e-3.
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long, value_enum, default_value = "policy")]
    pub method: OracleMethod,
    /// Relaxation parameter of the SOR method.
    #[arg(long, default_value_t = 1.5)]
    pub omega: f64,
    /// Also write a JSON summary comparing with the analytic boundaries.
    #[arg(long)]
    pub summary: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SamplerKind {
    Exact,
    Euler,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    #[arg(long, allow_hyphen_values = true)]
    pub x0: f64,
    #[arg(long, default_value_t = 100_000)]
    pub n_paths: usize,
    #[arg(long, default_value_t = 1e-4)]
    pub dt: f64,
    /// Defaults to 50 / r.
    #[arg(long)]
    pub horizon: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value = "exact")]
    pub sampler: SamplerKind,
    /// Probability bound for skipping monitoring dates; 0 disables skipping.
    #[arg(long, default_value_t = 1e-12)]
    pub skip_tol: f64,
    /// Write the paths (path_id, t, x) instead of estimating a value.
    #[arg(long)]
    pub dump_paths: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Candidate {
    /// The solver's value function.
    Solution,
    /// Stop on [threshold, inf) for the given --threshold.
    Threshold,
    /// The function pasted to the quadratic reward at 0 in value and slope.
    InterfaceFit,
    /// V = g.
    StopEverywhere,
}

#[derive(Debug, Clone, Args)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    #[arg(long, value_enum, default_value = "solution")]
    pub candidate: Candidate,
    #[arg(
        long,
        allow_hyphen_values = true,
        required_if_eq("candidate", "threshold")
    )]
    pub threshold: Option<f64>,
    #[arg(long, default_value_t = 2000)]
    pub grid_points: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FigureId {
    /// r(1+x)^2 - sigma(x)^2 for r = 1.5, sigma = (1, 2) on [-2, 2].
    Fig1,
    /// The skew-linear reward for beta = 3/4.
    Fig3,
}

#[derive(Debug, Clone, Args)]
pub struct FigureArgs {
    #[arg(long, value_enum)]
    pub id: FigureId,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub config: ConfigArg,
}
