//! Threshold functions, regime classification and the free-boundary
//! solvers.
//!
//! Everything here is phrased through the two representing functions of a
//! reward `g`,
//!
//! ```text
//! I(x) = psi'(x) g(x) - psi(x) g'(x)      D(x) = phi(x) g'(x) - phi'(x) g(x)
//! ```
//!
//! `I` is `G_-` (or `H_-` for the linear reward) and `D` is `G_+`. On smooth
//! pieces `I' = m psi (r g - L g)` and `D' = -m phi (r g - L g)`, so the
//! monotone pieces of `I` are cut at the zeros of `r g - L g`, at the
//! interface and at the kinks of `g`. A smooth-fit boundary is a zero of
//! `I` (left component spanned by `psi`) or a pair of points with equal
//! `I` and equal `D` (a bubble spanned by `psi` and `phi`).

use serde::Serialize;

use crate::analytics::{
    generator_apply, BaseReward, Discount, FundamentalPair, ObmParams, Reward, Side,
};
use crate::error::{domain, Error, Result};
use crate::region::{Interval, Region};
use crate::roots::{bisect, expand_until_positive};

/// Numerical tolerances of the solvers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Tolerances {
    /// Absolute tolerance on boundary locations.
    pub root: f64,
    /// Bound on smooth-fit residuals of an accepted bubble.
    pub residual: f64,
    /// Absolute tolerance on the critical rate.
    pub r0: f64,
    pub newton_max_iter: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            root: 1e-12,
            residual: 1e-10,
            r0: 1e-8,
            newton_max_iter: 60,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum RegimeTag {
    OneSidedNegativeC,
    OneSidedZeroC,
    OneSidedPositiveC,
    Bubble,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Regime {
    pub tag: RegimeTag,
    /// `[c]` for one-sided regimes, `[c1, c2, c3]` for the bubble.
    pub thresholds: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SearchMethod {
    Newton,
    NestedBisection,
}

/// Stopping set `[c1, c2] ∪ [c3, inf)`; the value is `k psi` on
/// `(-inf, c1)` and `a psi + b phi` on the bubble `(c2, c3)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BubbleSolution {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub k: f64,
    pub a: f64,
    pub b: f64,
    /// Absolute smooth-fit residuals `|V'(c-) - V'(c+)|` at c1, c2, c3.
    pub residuals: [f64; 3],
    pub method: SearchMethod,
}

impl BubbleSolution {
    pub fn stopping_region(&self) -> Region {
        Region::new(vec![
            Interval::closed(self.c1, self.c2),
            Interval::closed(self.c3, f64::INFINITY),
        ])
        .expect("bubble boundaries are ordered")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum Structure {
    /// Stopping set `[c, inf)`, value `k psi` to the left of `c`.
    OneSided {
        c: f64,
        k: f64,
    },
    Bubble(BubbleSolution),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Solution {
    pub regime: Regime,
    pub stopping: Region,
    pub structure: Structure,
}

/// The representing functions `I` and `D` of a reward.
#[derive(Debug, Clone, Copy)]
pub struct Representing<'a> {
    pub fp: &'a FundamentalPair,
    pub reward: Reward,
}

impl<'a> Representing<'a> {
    pub fn new(fp: &'a FundamentalPair, reward: Reward) -> Self {
        Self { fp, reward }
    }

    /// `psi' g - psi g'` (one-sided at kinks of `g`).
    pub fn i(&self, x: f64, side: Side) -> f64 {
        let g = self.reward.value(x);
        self.fp.psi_deriv(x) * g - self.fp.psi(x) * self.reward.deriv(x, side)
    }

    /// `phi g' - phi' g`.
    pub fn d(&self, x: f64, side: Side) -> f64 {
        let g = self.reward.value(x);
        self.fp.phi(x) * self.reward.deriv(x, side) - self.fp.phi_deriv(x) * g
    }

    /// Magnitude of the terms of `I`, for judging cancellation.
    fn i_scale(&self, x: f64) -> f64 {
        (self.fp.psi_deriv(x) * self.reward.value(x)).abs()
            + (self.fp.psi(x) * self.reward.deriv(x, Side::Right)).abs()
    }

    /// Sign of `r g - L g`, i.e. of `I'` on a smooth piece.
    fn increasing_at(&self, x: f64) -> bool {
        let lg = generator_apply(&self.fp.params, &self.reward, x).unwrap_or(0.0);
        self.fp.r.value() * self.reward.value(x) - lg > 0.0
    }
}

fn check_above_minus_one(x: f64) -> Result<()> {
    if x.is_nan() || x <= -1.0 {
        Err(domain(format!("threshold functions need x > -1, got {x}")))
    } else {
        Ok(())
    }
}

/// `H_-(x) = psi'(x)(1+x) - psi(x)`.
pub fn h_minus(fp: &FundamentalPair, x: f64) -> Result<f64> {
    check_above_minus_one(x)?;
    Ok(Representing::new(fp, Reward::LinearPlus).i(x, Side::Right))
}

/// `H_+(x) = phi(x) - phi'(x)(1+x)`.
pub fn h_plus(fp: &FundamentalPair, x: f64) -> Result<f64> {
    check_above_minus_one(x)?;
    Ok(Representing::new(fp, Reward::LinearPlus).d(x, Side::Right))
}

/// `G_-(x) = (1+x)(psi'(x)(1+x) - 2 psi(x))`.
pub fn g_minus(fp: &FundamentalPair, x: f64) -> Result<f64> {
    check_above_minus_one(x)?;
    Ok(Representing::new(fp, Reward::QuadraticPlus).i(x, Side::Right))
}

/// `G_+(x) = 2 phi(x)(1+x) - phi'(x)(1+x)^2`.
pub fn g_plus(fp: &FundamentalPair, x: f64) -> Result<f64> {
    check_above_minus_one(x)?;
    Ok(Representing::new(fp, Reward::QuadraticPlus).d(x, Side::Right))
}

/// A monotone piece of `I` on `(lo, hi)`.
#[derive(Debug, Clone, Copy)]
struct Piece {
    lo: f64,
    hi: f64,
    increasing: bool,
    /// One-sided limits of `I` at the ends.
    i_lo: f64,
    i_hi: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Root {
    x: f64,
    /// `I` changes from negative to positive.
    up: bool,
}

/// Monotone decomposition of `I` on `(zero_point, inf)` and its zeros.
#[derive(Debug, Clone)]
struct Shape {
    pieces: Vec<Piece>,
    roots: Vec<Root>,
}

/// Points where `r g - L g` changes sign.
fn generator_sign_changes(fp: &FundamentalPair, reward: &Reward) -> Vec<f64> {
    if reward.base() != BaseReward::QuadraticPlus {
        return Vec::new();
    }
    // g = (1 + s x)^2 on each side, L g = sigma^2 s^2: zero where
    // 1 + s x = sigma s / sqrt(r).
    let sr = fp.r.value().sqrt();
    let slope = |side: Side| match reward {
        Reward::Skew(_, beta) => 1.0 / beta.scale_deriv(0.0, side),
        _ => 1.0,
    };
    let mut out = Vec::new();
    let s_left = slope(Side::Left);
    let left = (fp.params.sigma1() * s_left / sr - 1.0) / s_left;
    if left < 0.0 {
        out.push(left);
    }
    let s_right = slope(Side::Right);
    let right = (fp.params.sigma2() * s_right / sr - 1.0) / s_right;
    if right > 0.0 {
        out.push(right);
    }
    out
}

impl Shape {
    fn analyse(rep: &Representing, tol: &Tolerances) -> Result<Shape> {
        let z = rep.reward.zero_point();
        let mut cuts: Vec<f64> = generator_sign_changes(rep.fp, &rep.reward);
        cuts.push(0.0);
        cuts.extend(rep.reward.kinks());
        cuts.retain(|&c| c > z);
        cuts.sort_by(|a, b| a.total_cmp(b));
        cuts.dedup();

        let mut bounds = vec![z];
        bounds.extend(cuts.iter().copied());
        bounds.push(f64::INFINITY);

        // Values of I at the cut points, snapped to zero when the terms
        // cancel to rounding.
        let snap = |x: f64, side: Side| {
            let v = rep.i(x, side);
            if v.abs() <= 16.0 * f64::EPSILON * rep.i_scale(x) {
                0.0
            } else {
                v
            }
        };

        let mut pieces = Vec::with_capacity(bounds.len() - 1);
        for w in bounds.windows(2) {
            let (lo, hi) = (w[0], w[1]);
            let mid = if hi.is_finite() {
                0.5 * (lo + hi)
            } else {
                lo + 1.0
            };
            let i_lo = snap(lo, Side::Right);
            let i_hi = if hi.is_finite() {
                snap(hi, Side::Left)
            } else {
                f64::INFINITY
            };
            pieces.push(Piece {
                lo,
                hi,
                increasing: rep.increasing_at(mid),
                i_lo,
                i_hi,
            });
        }

        let mut roots: Vec<Root> = Vec::new();
        let mut push = |root: Root| {
            if roots.last().is_none_or(|r: &Root| r.x < root.x) {
                roots.push(root);
            }
        };
        for (idx, p) in pieces.iter().enumerate() {
            // Zero exactly at the left end of a piece (interior cut point).
            // A touching zero counts as a root as well.
            if idx > 0 && p.i_lo == 0.0 {
                push(Root {
                    x: p.lo,
                    up: p.increasing,
                });
            }
            // Sign change across a jump at the left end.
            if idx > 0 {
                let before = pieces[idx - 1];
                if before.i_hi != 0.0 && p.i_lo != 0.0 && before.i_hi.signum() != p.i_lo.signum() {
                    push(Root {
                        x: p.lo,
                        up: p.i_lo > 0.0,
                    });
                }
            }
            if p.i_lo != 0.0 && p.i_hi != 0.0 && p.i_lo.signum() != p.i_hi.signum() {
                let hi = if p.hi.is_finite() {
                    p.hi
                } else {
                    expand_until_positive(|x| rep.i(x, Side::Right), p.lo.max(0.0), 1.0)?
                };
                let lo = p.lo;
                let inside = |x: f64| rep.i(x, if x == lo { Side::Right } else { Side::Left });
                let x = bisect(inside, lo, hi, tol.root * 0.1)?;
                push(Root {
                    x,
                    up: p.increasing,
                });
            }
        }
        Ok(Shape { pieces, roots })
    }

    /// The unique non-increasing stretch that follows an increasing one:
    /// `(peak, trough, index of first increasing piece after the trough)`.
    /// `peak == trough` for a downward jump.
    fn dip(&self) -> Result<Option<Dip>> {
        let mut dips = Vec::new();
        let n = self.pieces.len();
        for k in 0..n {
            let p = self.pieces[k];
            if !p.increasing {
                continue;
            }
            if k + 1 >= n {
                break;
            }
            let q = self.pieces[k + 1];
            if q.increasing {
                if q.i_lo < p.i_hi {
                    dips.push(Dip {
                        left: k,
                        right: k + 1,
                    });
                }
            } else if k + 2 < n && self.pieces[k + 2].increasing {
                dips.push(Dip {
                    left: k,
                    right: k + 2,
                });
            }
        }
        match dips.len() {
            0 => Ok(None),
            1 => Ok(Some(dips[0])),
            _ => Err(Error::State(format!(
                "representing function has {} dips; at most one is supported",
                dips.len()
            ))),
        }
    }
}

/// Increasing piece `left` ends at the local maximum (peak) and increasing
/// piece `right` starts at the local minimum (trough).
#[derive(Debug, Clone, Copy)]
struct Dip {
    left: usize,
    right: usize,
}

/// Outcome of the bubble search in a regime that admits one.
enum BubbleSearch {
    Found(BubbleSolution),
    /// The left and right one-sided candidates are ordered so that the
    /// right one dominates: no bubble.
    Absent,
}

/// Free-boundary solver with configurable tolerances.
#[derive(Debug, Clone, Copy, Default)]
pub struct Solver {
    pub tol: Tolerances,
}

impl Solver {
    pub fn new(tol: Tolerances) -> Self {
        Self { tol }
    }

    /// Solves the stopping problem for any supported reward.
    pub fn solve(&self, params: ObmParams, r: Discount, reward: Reward) -> Result<Solution> {
        let fp = FundamentalPair::new(params, r);
        let rep = Representing::new(&fp, reward);
        let shape = Shape::analyse(&rep, &self.tol)?;
        match self.bubble_search(&rep, &shape)? {
            Some(BubbleSearch::Found(b)) => Ok(Solution {
                regime: Regime {
                    tag: RegimeTag::Bubble,
                    thresholds: vec![b.c1, b.c2, b.c3],
                },
                stopping: b.stopping_region(),
                structure: Structure::Bubble(b),
            }),
            Some(BubbleSearch::Absent) | None => {
                let c = shape
                    .roots
                    .last()
                    .filter(|root| root.up)
                    .map(|root| root.x)
                    .ok_or_else(|| {
                        Error::Bracket("representing function has no up-crossing".into())
                    })?;
                let k = reward.value(c) / fp.psi(c);
                let tag = if c == 0.0 {
                    RegimeTag::OneSidedZeroC
                } else if c < 0.0 {
                    RegimeTag::OneSidedNegativeC
                } else {
                    RegimeTag::OneSidedPositiveC
                };
                Ok(Solution {
                    regime: Regime {
                        tag,
                        thresholds: vec![c],
                    },
                    stopping: Region::right_of(c),
                    structure: Structure::OneSided { c, k },
                })
            }
        }
    }

    /// `None` when the shape of `I` rules out a bubble altogether.
    fn bubble_search(&self, rep: &Representing, shape: &Shape) -> Result<Option<BubbleSearch>> {
        self.bubble_search_inner(rep, shape).map_err(|e| {
            let width = shape
                .dip()
                .ok()
                .flatten()
                .map(|d| shape.pieces[d.right].lo - shape.pieces[d.left].hi);
            match width {
                Some(w) if w < 1e-5 => Error::State(format!(
                    "the dip of the representing function has width {w:.3e}, \
                     below what the bubble search can resolve ({e})"
                )),
                _ => e,
            }
        })
    }

    fn bubble_search_inner(
        &self,
        rep: &Representing,
        shape: &Shape,
    ) -> Result<Option<BubbleSearch>> {
        let Some(dip) = shape.dip()? else {
            return Ok(None);
        };
        let left = shape.pieces[dip.left];
        let right = shape.pieces[dip.right];
        let (peak, trough) = (left.hi, right.lo);
        if !(left.i_hi > 0.0) || !(left.i_lo < 0.0) {
            return Ok(None);
        }
        let c1 = shape
            .roots
            .iter()
            .find(|root| root.up && root.x > left.lo && root.x < peak)
            .map(|root| root.x)
            .ok_or_else(|| Error::Bracket("missing left root of I".into()))?;

        let i = |x: f64| rep.i(x, Side::Right);
        let i_left = |x: f64| rep.i(x, Side::Left);
        let d = |x: f64| rep.d(x, Side::Right);
        let tol = self.tol.root * 0.1;

        // Point on the right branch where I equals `level`.
        let right_at = |level: f64| -> Result<f64> {
            if level <= right.i_lo {
                return Ok(trough);
            }
            let hi = expand_until_positive(|x| i(x) - level, trough, 1.0)?;
            bisect(|x| i(x) - level, trough, hi, tol * 1e-3)
        };

        let level_lo = right.i_lo.max(0.0);
        let c2_lo = if level_lo == 0.0 {
            c1
        } else {
            bisect(|x| i_left(x) - level_lo, left.lo, peak, tol * 1e-3)?
        };
        // Left-branch quantities use left limits so that a peak at a kink is
        // approached from inside the branch.
        let d_left = |x: f64| rep.d(x, Side::Left);
        let residual = |c2: f64| -> Result<f64> { Ok(d_left(c2) - d(right_at(i_left(c2))?)) };
        let f_lo = residual(c2_lo)?;
        if f_lo < 0.0 {
            return Ok(Some(BubbleSearch::Absent));
        }
        let f_peak = d_left(peak) - d(right_at(i_left(peak))?);
        if f_peak >= 0.0 {
            return Err(Error::State(format!(
                "bubble boundary does not separate from the peak at {peak}"
            )));
        }

        let (c2, c3, method) = match self.newton(rep, c2_lo, peak, trough, &right_at) {
            Some((c2, c3)) => (c2, c3, SearchMethod::Newton),
            None => {
                let c2 = if f_lo == 0.0 {
                    c2_lo
                } else {
                    bisect(|c| residual(c).unwrap_or(f64::NAN), c2_lo, peak, 0.0)?
                };
                (c2, right_at(i_left(c2))?, SearchMethod::NestedBisection)
            }
        };

        let sol = self.bubble_from_boundaries(rep, c1, c2, c3, method);
        let worst = sol.residuals.iter().cloned().fold(0.0, f64::max);
        let ordered = c1 <= c2 && c2 < peak && c3 > trough.max(c2);
        if !ordered || !(worst < self.tol.residual) {
            return Err(Error::NoConvergence {
                method: "bubble search",
                iterations: self.tol.newton_max_iter,
                residuals: sol.residuals.to_vec(),
            });
        }
        Ok(Some(BubbleSearch::Found(sol)))
    }

    fn bubble_from_boundaries(
        &self,
        rep: &Representing,
        c1: f64,
        c2: f64,
        c3: f64,
        method: SearchMethod,
    ) -> BubbleSolution {
        let fp = rep.fp;
        let g = &rep.reward;
        let (a, b) = match_at(rep, c2);
        let k = g.value(c1) / fp.psi(c1);
        let r1 = (k * fp.psi_deriv(c1) - g.deriv(c1, Side::Right)).abs();
        let r2 = (a * fp.psi_deriv(c2) + b * fp.phi_deriv(c2) - g.deriv(c2, Side::Left)).abs();
        let r3 = (a * fp.psi_deriv(c3) + b * fp.phi_deriv(c3) - g.deriv(c3, Side::Right))
            .abs()
            .max((a * fp.psi(c3) + b * fp.phi(c3) - g.value(c3)).abs());
        BubbleSolution {
            c1,
            c2,
            c3,
            k,
            a,
            b,
            residuals: [r1, r2, r3],
            method,
        }
    }

    /// Damped Newton on the value and derivative mismatch at `c3` of the
    /// function `a psi + b phi` fitted at `c2`, with a finite-difference
    /// Jacobian. Returns `None` if it fails to reach the residual tolerance
    /// inside the admissible box.
    fn newton(
        &self,
        rep: &Representing,
        c2_lo: f64,
        peak: f64,
        trough: f64,
        right_at: &dyn Fn(f64) -> Result<f64>,
    ) -> Option<(f64, f64)> {
        let fp = rep.fp;
        let g = &rep.reward;
        let resid = |c2: f64, c3: f64| -> [f64; 2] {
            let (a, b) = match_at(rep, c2);
            [
                a * fp.psi(c3) + b * fp.phi(c3) - g.value(c3),
                a * fp.psi_deriv(c3) + b * fp.phi_deriv(c3) - g.deriv(c3, Side::Right),
            ]
        };
        let norm = |v: [f64; 2]| v[0].hypot(v[1]);
        let admissible = |c2: f64, c3: f64| c2 >= c2_lo && c2 < peak && c3 > trough;

        let mut c2 = 0.5 * (c2_lo + peak);
        let mut c3 = right_at(rep.i(c2, Side::Left)).ok()?;
        let mut f = resid(c2, c3);
        for _ in 0..self.tol.newton_max_iter {
            if norm(f) < 0.01 * self.tol.residual {
                return Some((c2, c3));
            }
            let h2 = 1e-7 * c2.abs().max(1e-3);
            let h3 = 1e-7 * c3.abs().max(1e-3);
            let (p2, m2) = (resid(c2 + h2, c3), resid(c2 - h2, c3));
            let (p3, m3) = (resid(c2, c3 + h3), resid(c2, c3 - h3));
            let j = [
                [(p2[0] - m2[0]) / (2.0 * h2), (p3[0] - m3[0]) / (2.0 * h3)],
                [(p2[1] - m2[1]) / (2.0 * h2), (p3[1] - m3[1]) / (2.0 * h3)],
            ];
            let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
            if !det.is_finite() || det == 0.0 {
                return None;
            }
            let step2 = (j[1][1] * f[0] - j[0][1] * f[1]) / det;
            let step3 = (j[0][0] * f[1] - j[1][0] * f[0]) / det;
            let mut t = 1.0;
            let mut accepted = false;
            for _ in 0..40 {
                let (n2, n3) = (c2 - t * step2, c3 - t * step3);
                if admissible(n2, n3) {
                    let nf = resid(n2, n3);
                    if norm(nf) < norm(f) {
                        c2 = n2;
                        c3 = n3;
                        f = nf;
                        accepted = true;
                        break;
                    }
                }
                t *= 0.5;
            }
            if !accepted {
                break;
            }
        }
        (norm(f) < 0.01 * self.tol.residual).then_some((c2, c3))
    }

    /// Unique root of `H_-` on `(-1, inf)`.
    pub fn linear_threshold(&self, params: ObmParams, r: Discount) -> Result<f64> {
        let fp = FundamentalPair::new(params, r);
        let shape = Shape::analyse(&Representing::new(&fp, Reward::LinearPlus), &self.tol)?;
        match shape.roots.as_slice() {
            [root] => Ok(root.x),
            roots => Err(Error::State(format!(
                "expected a single root of H_-, found {}",
                roots.len()
            ))),
        }
    }

    pub fn g_minus_roots(&self, params: ObmParams, r: Discount) -> Result<Vec<f64>> {
        let fp = FundamentalPair::new(params, r);
        let shape = Shape::analyse(&Representing::new(&fp, Reward::QuadraticPlus), &self.tol)?;
        Ok(shape.roots.iter().map(|root| root.x).collect())
    }

    /// Threshold of the one-sided quadratic problem; an error in the bubble
    /// regime.
    pub fn quadratic_one_sided(&self, params: ObmParams, r: Discount) -> Result<f64> {
        match self.solve(params, r, Reward::QuadraticPlus)?.structure {
            Structure::OneSided { c, .. } => Ok(c),
            Structure::Bubble(_) => Err(Error::State(format!(
                "r = {} lies in the bubble regime",
                r.value()
            ))),
        }
    }

    /// Bubble for the quadratic reward, `None` when the region is one-sided.
    pub fn bubble(&self, params: ObmParams, r: Discount) -> Result<Option<BubbleSolution>> {
        let (s1, s2) = (params.sigma1(), params.sigma2());
        require_bubble_volatilities(params)?;
        let rv = r.value();
        if !(rv > 2.0 * s1 * s1 && rv < s2 * s2) {
            return Err(domain(format!(
                "bubble search needs r in (2 sigma1^2, sigma2^2) = ({}, {}), got {rv}",
                2.0 * s1 * s1,
                s2 * s2
            )));
        }
        let fp = FundamentalPair::new(params, r);
        let rep = Representing::new(&fp, Reward::QuadraticPlus);
        let shape = Shape::analyse(&rep, &self.tol)?;
        match self.bubble_search(&rep, &shape)? {
            Some(BubbleSearch::Found(b)) => Ok(Some(b)),
            _ => Ok(None),
        }
    }

    /// Smallest discount rate at which the quadratic problem has a bubble.
    /// The returned rate has the bubble (possibly degenerate, `c1 ≈ c2`).
    pub fn find_r0(&self, params: ObmParams) -> Result<f64> {
        require_bubble_volatilities(params)?;
        let (s1, s2) = (params.sigma1(), params.sigma2());
        let (a, b) = (2.0 * s1 * s1, s2 * s2);
        let margin = 1e-9 * (b - a);
        let has_bubble = |r: f64| -> Result<bool> {
            Ok(self
                .bubble(params, Discount::new(r)?)?
                .is_some_and(|sol| sol.c2 - sol.c1 >= 0.0))
        };
        let mut lo = a + margin;
        // Close to sigma2^2 the bubble shrinks onto the interface and the
        // search loses resolution, so start from the first rate below it
        // that resolves cleanly.
        let hi = (1..=8)
            .map(|k| b - (b - a) * 0.5f64.powi(k))
            .find(|&r| has_bubble(r).unwrap_or(false));
        let Some(mut hi) = hi else {
            return Err(Error::State(format!("no bubble found on ({a}, {b})")));
        };
        if has_bubble(lo)? {
            return Err(Error::State(format!(
                "bubble predicate is not monotone on ({a}, {b})"
            )));
        }
        while hi - lo > self.tol.r0 {
            let mid = 0.5 * (lo + hi);
            if has_bubble(mid)? {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Ok(hi)
    }

    pub fn classify(&self, params: ObmParams, r: Discount, reward: Reward) -> Result<Regime> {
        Ok(self.solve(params, r, reward)?.regime)
    }
}

fn require_bubble_volatilities(params: ObmParams) -> Result<()> {
    let (s1, s2) = (params.sigma1(), params.sigma2());
    if s2 * s2 > 2.0 * s1 * s1 * (1.0 + 1e-12) {
        Ok(())
    } else {
        Err(domain(format!(
            "a bubble needs sigma2^2 > 2 sigma1^2, got sigma1 = {s1}, sigma2 = {s2}"
        )))
    }
}

/// Coefficients `(a, b)` of `a psi + b phi` matching `g` in value and
/// derivative at `x`: `a = D(x) / W`, `b = I(x) / W`.
fn match_at(rep: &Representing, x: f64) -> (f64, f64) {
    let w = rep.fp.wronskian();
    (rep.d(x, Side::Left) / w, rep.i(x, Side::Left) / w)
}

pub fn solve_linear_threshold(params: ObmParams, r: Discount) -> Result<f64> {
    Solver::default().linear_threshold(params, r)
}

pub fn g_minus_roots(params: ObmParams, r: Discount) -> Result<Vec<f64>> {
    Solver::default().g_minus_roots(params, r)
}

pub fn solve_quadratic_one_sided(params: ObmParams, r: Discount) -> Result<f64> {
    Solver::default().quadratic_one_sided(params, r)
}

pub fn solve_bubble(params: ObmParams, r: Discount) -> Result<Option<BubbleSolution>> {
    Solver::default().bubble(params, r)
}

pub fn find_r0(params: ObmParams) -> Result<f64> {
    Solver::default().find_r0(params)
}

pub fn classify_regime(params: ObmParams, r: Discount, reward: Reward) -> Result<Regime> {
    Solver::default().classify(params, r, reward)
}

/// The function `A e^{l1 x} + B e^{-l1 x}` on `x <= 0`, `(1+x)^2` on `x >= 0`,
/// fitted in value and slope at the interface, and why it is not excessive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CounterexampleReport {
    pub r: f64,
    pub a: f64,
    pub b: f64,
    /// Derivative of `I_F` with respect to the speed measure just right of
    /// the interface: `psi(x)(r(1+x)^2 - sigma2^2)`.
    pub rep_derivative_right_of_zero: f64,
    pub probe: f64,
    pub b_negative: bool,
    /// `F -> -inf` as `x -> -inf`.
    pub unbounded_below: bool,
    pub excessive: bool,
}

pub fn interface_fit_report(params: ObmParams, r: Discount) -> CounterexampleReport {
    let fp = FundamentalPair::new(params, r);
    let l = fp.lambda1;
    let a = 0.5 * (1.0 + 2.0 / l);
    let b = 0.5 * (1.0 - 2.0 / l);
    let probe = 1e-6;
    let rv = r.value();
    let s2 = params.sigma2();
    let deriv = fp.psi(probe) * (rv * (1.0 + probe).powi(2) - s2 * s2);
    CounterexampleReport {
        r: rv,
        a,
        b,
        rep_derivative_right_of_zero: deriv,
        probe,
        b_negative: b < 0.0,
        unbounded_below: b < 0.0,
        excessive: b >= 0.0 && deriv >= 0.0,
    }
}
