//! Value function assembly and grid-certified verification.
//!
//! A candidate value is `g` on a stopping region and `a psi + b phi` on each
//! continuation component. It is the value of the stopping problem when it
//! is r-excessive and dominates `g`; excessivity is checked through the
//! representing functions `I_V = psi' V - psi V'` (nondecreasing) and
//! `D_V = phi V' - phi' V` (nonincreasing, nonnegative).

use serde::Serialize;

use crate::analytics::{Discount, FundamentalPair, ObmParams, Reward, Side};
use crate::error::{domain, Result};
use crate::region::{Interval, Region};
use crate::solver::{Solver, Structure};

/// Monotonicity slack for the representing-function scans, relative to
/// `max(1, |value|)`.
pub const MONOTONE_SLACK: f64 = 1e-10;
pub const MAJORANT_TOL: f64 = 1e-12;
pub const SMOOTH_FIT_TOL: f64 = 1e-9;
pub const HARMONIC_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ContinuationPiece {
    pub lo: f64,
    pub hi: f64,
    pub coef_psi: f64,
    pub coef_phi: f64,
}

impl ContinuationPiece {
    fn holds(&self, x: f64, side: Side) -> bool {
        (x > self.lo && x < self.hi)
            || (side == Side::Left && x == self.hi)
            || (side == Side::Right && x == self.lo)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValueFunctionRep {
    pub region: Region,
    pub pieces: Vec<ContinuationPiece>,
    pub reward: Reward,
    pub fp: FundamentalPair,
}

impl ValueFunctionRep {
    /// Candidate with stopping set `region`; `coefs[i]` are the `(psi, phi)`
    /// coefficients on the i-th component of the complement.
    pub fn from_parts(
        fp: FundamentalPair,
        reward: Reward,
        region: Region,
        coefs: &[(f64, f64)],
    ) -> Result<Self> {
        let cont = region.complement();
        if cont.components().len() != coefs.len() {
            return Err(domain(format!(
                "{} continuation components but {} coefficient pairs",
                cont.components().len(),
                coefs.len()
            )));
        }
        let pieces = cont
            .components()
            .iter()
            .zip(coefs)
            .map(|(c, &(a, b))| ContinuationPiece {
                lo: c.lo,
                hi: c.hi,
                coef_psi: a,
                coef_phi: b,
            })
            .collect();
        Ok(Self {
            region,
            pieces,
            reward,
            fp,
        })
    }

    fn piece(&self, x: f64, side: Side) -> Option<&ContinuationPiece> {
        self.pieces.iter().find(|p| p.holds(x, side))
    }

    pub fn value(&self, x: f64) -> f64 {
        match self
            .piece(x, Side::Right)
            .or_else(|| self.piece(x, Side::Left))
        {
            Some(p) => p.coef_psi * self.fp.psi(x) + p.coef_phi * self.fp.phi(x),
            None => self.reward.value(x),
        }
    }

    /// One-sided derivative.
    pub fn deriv(&self, x: f64, side: Side) -> f64 {
        match self.piece(x, side) {
            Some(p) => p.coef_psi * self.fp.psi_deriv(x) + p.coef_phi * self.fp.phi_deriv(x),
            None => self.reward.deriv(x, side),
        }
    }

    pub fn deriv2(&self, x: f64) -> f64 {
        match self.piece(x, Side::Right) {
            Some(p) => p.coef_psi * self.fp.psi_deriv2(x) + p.coef_phi * self.fp.phi_deriv2(x),
            None => self.reward.deriv2(x),
        }
    }

    pub fn rep_i(&self, x: f64, side: Side) -> f64 {
        self.fp.psi_deriv(x) * self.value(x) - self.fp.psi(x) * self.deriv(x, side)
    }

    pub fn rep_d(&self, x: f64, side: Side) -> f64 {
        self.fp.phi(x) * self.deriv(x, side) - self.fp.phi_deriv(x) * self.value(x)
    }

    pub fn boundaries(&self) -> Vec<f64> {
        self.region.boundaries()
    }

    /// `|V'(b-) - V'(b+)|` at each finite boundary where `g` is
    /// differentiable.
    pub fn smooth_fit_residuals(&self) -> Vec<(f64, f64)> {
        self.boundaries()
            .into_iter()
            .filter(|&b| self.reward.is_differentiable_at(b))
            .map(|b| {
                (
                    b,
                    (self.deriv(b, Side::Left) - self.deriv(b, Side::Right)).abs(),
                )
            })
            .collect()
    }

    /// `|sigma^2/2 V'' - r V|` relative to `max(1, |r V|)`, or `None` when `x`
    /// is in the stopping set or at the interface.
    pub fn harmonic_residual(&self, x: f64) -> Option<f64> {
        if x == 0.0 || self.region.contains(x) {
            return None;
        }
        let s = self.fp.params.sigma(x);
        let rv = self.fp.r.value() * self.value(x);
        Some((0.5 * s * s * self.deriv2(x) - rv).abs() / rv.abs().max(1.0))
    }
}

/// Value function of the stopping problem.
pub fn assemble(params: ObmParams, r: Discount, reward: Reward) -> Result<ValueFunctionRep> {
    assemble_with(&Solver::default(), params, r, reward)
}

pub fn assemble_with(
    solver: &Solver,
    params: ObmParams,
    r: Discount,
    reward: Reward,
) -> Result<ValueFunctionRep> {
    let fp = FundamentalPair::new(params, r);
    let sol = solver.solve(params, r, reward)?;
    let coefs = match sol.structure {
        Structure::OneSided { k, .. } => vec![(k, 0.0)],
        Structure::Bubble(b) => vec![(b.k, 0.0), (b.a, b.b)],
    };
    ValueFunctionRep::from_parts(fp, reward, sol.stopping, &coefs)
}

/// The rule "stop at the first entrance to `[c, inf)`" for an arbitrary
/// `c`, with its value `psi g(c) / psi(c)` to the left of `c`.
pub fn one_sided_candidate(
    params: ObmParams,
    r: Discount,
    reward: Reward,
    c: f64,
) -> Result<ValueFunctionRep> {
    let fp = FundamentalPair::new(params, r);
    let k = reward.value(c) / fp.psi(c);
    ValueFunctionRep::from_parts(fp, reward, Region::right_of(c), &[(k, 0.0)])
}

/// Stop immediately everywhere: `V = g`.
pub fn stop_everywhere(params: ObmParams, r: Discount, reward: Reward) -> ValueFunctionRep {
    let fp = FundamentalPair::new(params, r);
    ValueFunctionRep::from_parts(fp, reward, Region::whole_line(), &[])
        .expect("whole line has no continuation component")
}

/// The function `A e^{l1 x} + B e^{-l1 x}` (x < 0), `(1+x)^2` (x >= 0) with
/// `A = (1 + 2/l1)/2`, `B = (1 - 2/l1)/2`: it pastes to the quadratic reward
/// in value and slope at 0 but is not r-excessive.
pub fn interface_fit_candidate(params: ObmParams, r: Discount) -> ValueFunctionRep {
    let fp = FundamentalPair::new(params, r);
    let l = fp.lambda1;
    let (a, b) = (0.5 * (1.0 + 2.0 / l), 0.5 * (1.0 - 2.0 / l));
    // On x < 0: e^{l1 x} = psi, e^{-l1 x} = (phi - a2 psi) / a1.
    let coef_phi = b / fp.a1;
    let coef_psi = a - b * fp.a2 / fp.a1;
    ValueFunctionRep::from_parts(
        fp,
        Reward::QuadraticPlus,
        Region::right_of(0.0),
        &[(coef_psi, coef_phi)],
    )
    .expect("one continuation component")
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Violation {
    pub x: f64,
    pub amount: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExcessivityReport {
    pub i_nondecreasing: bool,
    pub d_nonincreasing: bool,
    pub i_zero_left_of_first_boundary: bool,
    pub d_nonnegative: bool,
    pub kink_at_interface: bool,
    /// `V'(0-) - V'(0+)`.
    pub interface_kink: f64,
    pub worst_i_decrease: Option<Violation>,
    pub worst_d_increase: Option<Violation>,
    pub worst_i_left: Option<Violation>,
    pub most_negative_d: Option<Violation>,
    pub pass: bool,
}

fn slack(a: f64, b: f64) -> f64 {
    MONOTONE_SLACK * a.abs().max(b.abs()).max(1.0)
}

fn worse(current: Option<Violation>, x: f64, amount: f64) -> Option<Violation> {
    match current {
        Some(v) if v.amount >= amount => Some(v),
        _ => Some(Violation { x, amount }),
    }
}

pub fn excessivity_check(v: &ValueFunctionRep, grid: &[f64]) -> ExcessivityReport {
    let i: Vec<f64> = grid.iter().map(|&x| v.rep_i(x, Side::Right)).collect();
    let d: Vec<f64> = grid.iter().map(|&x| v.rep_d(x, Side::Right)).collect();

    let mut worst_i_decrease = None;
    let mut worst_d_increase = None;
    for k in 1..grid.len() {
        let drop = i[k - 1] - i[k];
        if drop > slack(i[k - 1], i[k]) {
            worst_i_decrease = worse(worst_i_decrease, grid[k], drop);
        }
        let rise = d[k] - d[k - 1];
        if rise > slack(d[k - 1], d[k]) {
            worst_d_increase = worse(worst_d_increase, grid[k], rise);
        }
    }

    let first = v.boundaries().first().copied();
    let mut worst_i_left = None;
    let mut most_negative_d = None;
    for (k, &x) in grid.iter().enumerate() {
        if first.is_some_and(|c| x < c) {
            let scale = (v.fp.psi_deriv(x) * v.value(x)).abs();
            if i[k].abs() > slack(scale, 0.0) {
                worst_i_left = worse(worst_i_left, x, i[k].abs());
            }
        }
        if d[k] < -slack(d[k], 0.0) {
            most_negative_d = worse(most_negative_d, x, -d[k]);
        }
    }

    let interface_kink = v.deriv(0.0, Side::Left) - v.deriv(0.0, Side::Right);
    let kink_ok = interface_kink >= -slack(v.deriv(0.0, Side::Left), v.deriv(0.0, Side::Right));

    let report = ExcessivityReport {
        i_nondecreasing: worst_i_decrease.is_none(),
        d_nonincreasing: worst_d_increase.is_none(),
        i_zero_left_of_first_boundary: worst_i_left.is_none(),
        d_nonnegative: most_negative_d.is_none(),
        kink_at_interface: kink_ok,
        interface_kink,
        worst_i_decrease,
        worst_d_increase,
        worst_i_left,
        most_negative_d,
        pass: false,
    };
    ExcessivityReport {
        pass: report.i_nondecreasing
            && report.d_nonincreasing
            && report.i_zero_left_of_first_boundary
            && report.d_nonnegative
            && report.kink_at_interface,
        ..report
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MajorantReport {
    pub pass: bool,
    /// Largest `g - V` on the grid (negative when `V > g` everywhere).
    pub worst: Violation,
}

pub fn majorant_check(v: &ValueFunctionRep, grid: &[f64]) -> MajorantReport {
    let mut worst = Violation {
        x: f64::NAN,
        amount: f64::NEG_INFINITY,
    };
    let mut pass = true;
    for &x in grid {
        let g = v.reward.value(x);
        let gap = g - v.value(x);
        if gap > MAJORANT_TOL * g.abs().max(1.0) || gap.is_nan() {
            pass = false;
        }
        if gap > worst.amount || gap.is_nan() {
            worst = Violation { x, amount: gap };
        }
    }
    MajorantReport { pass, worst }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SmoothFitReport {
    pub pass: bool,
    /// `(boundary, |V'(b-) - V'(b+)|)`.
    pub residuals: Vec<(f64, f64)>,
}

pub fn smooth_fit_check(v: &ValueFunctionRep) -> SmoothFitReport {
    let residuals = v.smooth_fit_residuals();
    SmoothFitReport {
        pass: residuals.iter().all(|&(_, r)| r < SMOOTH_FIT_TOL),
        residuals,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HarmonicityReport {
    pub pass: bool,
    pub points_checked: usize,
    pub worst: Option<Violation>,
}

/// Checks `generator V = r V` at grid points of the continuation set at
/// least `1e-6` away from the interface.
pub fn harmonicity_check(v: &ValueFunctionRep, grid: &[f64]) -> HarmonicityReport {
    let mut worst: Option<Violation> = None;
    let mut n = 0;
    for &x in grid.iter().filter(|x| x.abs() >= 1e-6) {
        if let Some(res) = v.harmonic_residual(x) {
            n += 1;
            if worst.is_none_or(|w| res > w.amount) {
                worst = Some(Violation { x, amount: res });
            }
        }
    }
    HarmonicityReport {
        pass: worst.is_none_or(|w| w.amount < HARMONIC_TOL),
        points_checked: n,
        worst,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerificationReport {
    pub pass: bool,
    pub excessivity: ExcessivityReport,
    pub majorant: MajorantReport,
    pub smooth_fit: SmoothFitReport,
    pub harmonicity: HarmonicityReport,
    pub grid_points: usize,
}

pub fn verify(v: &ValueFunctionRep, grid: &[f64]) -> VerificationReport {
    let excessivity = excessivity_check(v, grid);
    let majorant = majorant_check(v, grid);
    let smooth_fit = smooth_fit_check(v);
    let harmonicity = harmonicity_check(v, grid);
    VerificationReport {
        pass: excessivity.pass && majorant.pass && smooth_fit.pass && harmonicity.pass,
        excessivity,
        majorant,
        smooth_fit,
        harmonicity,
        grid_points: grid.len(),
    }
}

pub const DEFAULT_CHECK_POINTS: usize = 2000;

/// Check grid on `[-1 + 1e-6, c_max + 3]`: a uniform part plus geometric
/// clusters on both sides of every boundary, of 0 and of -1, with points
/// closer than `1e-9` to a boundary or a kink of `g` removed.
pub fn check_grid(v: &ValueFunctionRep, n: usize) -> Vec<f64> {
    let bounds = v.boundaries();
    let c_max = bounds.iter().copied().fold(0.0, f64::max);
    let (lo, hi) = (-1.0 + 1e-6, c_max + 3.0);
    let mut special = bounds.clone();
    special.extend([0.0, -1.0, v.reward.zero_point()]);

    let n = n.max(50);
    let n_uniform = n / 2;
    let per_side = ((n - n_uniform) / (2 * special.len())).max(2);
    let mut xs: Vec<f64> = (0..n_uniform)
        .map(|k| lo + (hi - lo) * k as f64 / (n_uniform - 1) as f64)
        .collect();
    for &s in &special {
        for k in 0..per_side {
            let t = k as f64 / (per_side - 1) as f64;
            let offset = 1e-8 * (1e7f64).powf(t);
            xs.push(s - offset);
            xs.push(s + offset);
        }
    }

    let mut avoid = bounds;
    avoid.extend(v.reward.kinks());
    xs.retain(|&x| x >= lo && x <= hi && avoid.iter().all(|&a| (x - a).abs() >= 1e-9));
    xs.sort_by(|a, b| a.total_cmp(b));
    xs.dedup();
    xs
}

/// Continuation-set helper for reports: the components of the complement.
pub fn continuation(v: &ValueFunctionRep) -> Vec<Interval> {
    v.region.complement().components().to_vec()
}
