//! Optimal stopping of oscillating Brownian motion.
//!
//! An oscillating Brownian motion (OBM) has volatility `sigma1` below zero
//! and `sigma2` above. This crate computes the fundamental solutions of its
//! discounted generator, locates the free boundaries of the stopping
//! problems with rewards `(1+x)^+` and `((1+x)^+)^2` (including the bubble
//! regime in which the stopping set is disconnected), assembles and checks
//! the value function, and provides two independent numerical checks: a
//! Markov-chain approximation and a Monte Carlo estimator built on an exact
//! skew Brownian motion sampler.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytics;
pub mod error;
pub mod grid;
pub mod mc;
pub mod region;
pub mod roots;
pub mod solver;
pub mod value;

pub use analytics::{
    fundamental_pair, generator_apply, obm_to_sbm, sbm_scale, sbm_scale_inv, sbm_to_obm,
    BaseReward, Discount, FundamentalPair, ObmParams, Reward, Side, SkewParams, SmoothFn,
};
pub use error::{Error, Result};
pub use grid::{build_chain, extract_region, solve_stopping, GridModel, GridSolution};
pub use mc::{estimate_value, obm_step, sbm_step_exact, McConfig, McEstimate, Sampler};
pub use region::{Interval, Region};
pub use solver::{
    classify_regime, find_r0, g_minus, g_minus_roots, g_plus, h_minus, h_plus,
    interface_fit_report, solve_bubble, solve_linear_threshold, solve_quadratic_one_sided,
    BubbleSolution, CounterexampleReport, Regime, RegimeTag, Solution, Solver, Structure,
    Tolerances,
};
pub use value::{
    assemble, excessivity_check, majorant_check, verify, ValueFunctionRep, VerificationReport,
};
