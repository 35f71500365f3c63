//! Markov-chain approximation of the OBM and dynamic programming on it.
//!
//! The chain lives on a uniform grid in natural scale, moves one node up or
//! down with probability 1/2 and spends `h^2 / sigma(x)^2` units of time per
//! step, so it matches the scale and speed measure of the diffusion. No
//! closed form of the continuous problem is used.

use std::io::{self, Write};

use serde::Serialize;

use crate::analytics::{Discount, ObmParams, Reward};
use crate::error::{domain, Error, Result};
use crate::region::{Interval, Region};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridModel {
    pub xs: Vec<f64>,
    pub h: f64,
    pub p_up: Vec<f64>,
    pub p_down: Vec<f64>,
    pub dt: Vec<f64>,
    /// Discount factors `e^{-r dt}`; empty until a rate is attached.
    pub discount: Vec<f64>,
}

/// Uniform chain on about `n` nodes covering `[xmin, xmax]`. The step is
/// `1/m` for an integer `m` so that `-1` and `0` are nodes.
pub fn build_chain(params: ObmParams, xmin: f64, xmax: f64, n: usize) -> Result<GridModel> {
    if !(xmin < -1.0 && xmax > 0.0 && xmin.is_finite() && xmax.is_finite()) {
        return Err(domain(format!(
            "grid needs xmin < -1 < 0 < xmax, got [{xmin}, {xmax}]"
        )));
    }
    if n < 100 {
        return Err(domain(format!("grid needs at least 100 nodes, got {n}")));
    }
    let m = ((n - 1) as f64 / (xmax - xmin)).ceil();
    let h = 1.0 / m;
    let k_lo = (xmin * m).floor() as i64;
    let k_hi = (xmax * m).ceil() as i64;
    let xs: Vec<f64> = (k_lo..=k_hi).map(|k| k as f64 / m).collect();
    let (s1, s2) = (params.sigma1(), params.sigma2());
    let dt = xs
        .iter()
        .map(|&x| {
            if x == 0.0 {
                0.5 * h * h * (1.0 / (s1 * s1) + 1.0 / (s2 * s2))
            } else {
                let s = params.sigma(x);
                h * h / (s * s)
            }
        })
        .collect();
    let len = xs.len();
    Ok(GridModel {
        xs,
        h,
        p_up: vec![0.5; len],
        p_down: vec![0.5; len],
        dt,
        discount: Vec::new(),
    })
}

impl GridModel {
    /// Chain on `[-2, xmax]` with step at most `h`.
    pub fn with_step(params: ObmParams, xmax: f64, h: f64) -> Result<GridModel> {
        let xmin = -2.0;
        let n = ((xmax - xmin) / h).ceil() as usize + 1;
        build_chain(params, xmin, xmax, n)
    }

    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }

    pub fn with_discount(mut self, r: Discount) -> Self {
        self.discount = self.dt.iter().map(|&dt| (-r.value() * dt).exp()).collect();
        self
    }

    /// Index of the node at `x`, if `x` is a node.
    pub fn node(&self, x: f64) -> Option<usize> {
        let k = ((x - self.xs[0]) / self.h).round();
        if k < 0.0 {
            return None;
        }
        let k = k as usize;
        (k < self.xs.len() && (self.xs[k] - x).abs() < 1e-12).then_some(k)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum GridMethod {
    /// Howard policy iteration with a tridiagonal solve per policy.
    PolicyIteration { max_iter: usize },
    /// Projected successive over-relaxation started from `V = g`.
    ValueIteration {
        omega: f64,
        max_iter: usize,
        tol: f64,
    },
}

impl Default for GridMethod {
    fn default() -> Self {
        GridMethod::PolicyIteration { max_iter: 10_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridSolution {
    pub values: Vec<f64>,
    pub stop: Vec<bool>,
    pub iterations: usize,
}

pub const STOP_TOL: f64 = 1e-12;

/// Solves `V = max(g, e^{-r dt} (V_up + V_down) / 2)` with `V = 0` at the
/// lowest node (killing) and `V = g` at the highest (absorption).
pub fn solve_stopping(gm: &GridModel, reward: Reward, r: Discount) -> Result<GridSolution> {
    solve_stopping_with(gm, reward, r, GridMethod::default())
}

pub fn solve_stopping_with(
    gm: &GridModel,
    reward: Reward,
    r: Discount,
    method: GridMethod,
) -> Result<GridSolution> {
    let gm_owned;
    let gm = if gm.discount.len() == gm.len() {
        gm
    } else {
        gm_owned = gm.clone().with_discount(r);
        &gm_owned
    };
    let g: Vec<f64> = gm.xs.iter().map(|&x| reward.value(x)).collect();
    let (values, iterations) = match method {
        GridMethod::PolicyIteration { max_iter } => policy_iteration(gm, &g, max_iter)?,
        GridMethod::ValueIteration {
            omega,
            max_iter,
            tol,
        } => value_iteration(gm, &g, omega, max_iter, tol)?,
    };
    // The lowest node is killed, not stopped.
    let stop = values
        .iter()
        .zip(&g)
        .enumerate()
        .map(|(i, (&v, &gv))| i > 0 && v <= gv + STOP_TOL * gv.abs().max(1.0))
        .collect();
    Ok(GridSolution {
        values,
        stop,
        iterations,
    })
}

fn continuation(gm: &GridModel, v: &[f64], i: usize) -> f64 {
    gm.discount[i] * (gm.p_down[i] * v[i - 1] + gm.p_up[i] * v[i + 1])
}

fn policy_iteration(gm: &GridModel, g: &[f64], max_iter: usize) -> Result<(Vec<f64>, usize)> {
    let n = gm.len();
    // Start from the one-step-lookahead rule.
    let mut stop: Vec<bool> = (0..n)
        .map(|i| i > 0 && i < n - 1 && g[i] > 0.0 && g[i] >= continuation(gm, g, i))
        .collect();
    stop[n - 1] = true;
    let mut v = vec![0.0; n];
    let (mut lower, mut diag, mut upper, mut rhs) =
        (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    for iter in 1..=max_iter {
        for i in 0..n {
            lower[i] = 0.0;
            upper[i] = 0.0;
            diag[i] = 1.0;
            rhs[i] = 0.0;
            if i == 0 {
                continue;
            }
            if i == n - 1 || stop[i] {
                rhs[i] = g[i];
            } else {
                lower[i] = -gm.discount[i] * gm.p_down[i];
                upper[i] = -gm.discount[i] * gm.p_up[i];
            }
        }
        thomas(&lower, &diag, &upper, &mut rhs);
        v.copy_from_slice(&rhs);

        let mut changed = false;
        for i in 1..n - 1 {
            let next = g[i] >= continuation(gm, &v, i);
            if next != stop[i] {
                stop[i] = next;
                changed = true;
            }
        }
        if !changed {
            return Ok((v, iter));
        }
    }
    Err(Error::NoConvergence {
        method: "policy iteration",
        iterations: max_iter,
        residuals: vec![],
    })
}

/// In-place tridiagonal solve; `rhs` is overwritten with the solution.
fn thomas(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &mut [f64]) {
    let n = diag.len();
    let mut c = vec![0.0; n];
    c[0] = upper[0] / diag[0];
    rhs[0] /= diag[0];
    for i in 1..n {
        let m = diag[i] - lower[i] * c[i - 1];
        c[i] = upper[i] / m;
        rhs[i] = (rhs[i] - lower[i] * rhs[i - 1]) / m;
    }
    for i in (0..n - 1).rev() {
        rhs[i] -= c[i] * rhs[i + 1];
    }
}

fn value_iteration(
    gm: &GridModel,
    g: &[f64],
    omega: f64,
    max_iter: usize,
    tol: f64,
) -> Result<(Vec<f64>, usize)> {
    if !(omega > 0.0 && omega < 2.0) {
        return Err(domain(format!(
            "relaxation parameter must lie in (0, 2), got {omega}"
        )));
    }
    let mut v = g.to_vec();
    v[0] = 0.0;
    let mut change = f64::INFINITY;
    for iter in 1..=max_iter {
        change = sweep(gm, g, &mut v, omega);
        if change <= tol {
            return Ok((v, iter));
        }
    }
    Err(Error::NoConvergence {
        method: "value iteration",
        iterations: max_iter,
        residuals: vec![change],
    })
}

/// One projected Gauss-Seidel sweep; returns the largest change.
fn sweep(gm: &GridModel, g: &[f64], v: &mut [f64], omega: f64) -> f64 {
    let mut change: f64 = 0.0;
    for i in 1..v.len() - 1 {
        let target = v[i] + omega * (continuation(gm, v, i) - v[i]);
        let next = target.max(g[i]);
        change = change.max((next - v[i]).abs());
        v[i] = next;
    }
    change
}

/// Maximal runs of stopping nodes as intervals. Interior ends sit at the
/// midpoint between the last continuation node and the first stopping
/// node; runs touching the ends of the grid keep the end node.
pub fn extract_region(stop: &[bool], xs: &[f64]) -> Region {
    let n = xs.len();
    let mut comps = Vec::new();
    let mut i = 0;
    while i < n {
        if !stop[i] {
            i += 1;
            continue;
        }
        let start = i;
        while i < n && stop[i] {
            i += 1;
        }
        let lo = if start == 0 {
            xs[0]
        } else {
            0.5 * (xs[start - 1] + xs[start])
        };
        let hi = if i == n {
            xs[n - 1]
        } else {
            0.5 * (xs[i - 1] + xs[i])
        };
        comps.push(Interval::closed(lo, hi));
    }
    Region::new(comps).expect("runs are separated by continuation nodes")
}

/// Boundaries of an extracted region that are not grid ends.
pub fn interior_boundaries(region: &Region, xs: &[f64]) -> Vec<f64> {
    let (lo, hi) = (xs[0], xs[xs.len() - 1]);
    region
        .boundaries()
        .into_iter()
        .filter(|&b| b != lo && b != hi)
        .collect()
}

impl GridSolution {
    /// CSV with header `x,g,V,stop`, 17 significant digits.
    pub fn write_csv<W: Write>(&self, gm: &GridModel, reward: Reward, mut w: W) -> io::Result<()> {
        writeln!(w, "x,g,V,stop")?;
        for (i, &x) in gm.xs.iter().enumerate() {
            writeln!(
                w,
                "{:.16e},{:.16e},{:.16e},{}",
                x,
                reward.value(x),
                self.values[i],
                u8::from(self.stop[i])
            )?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(s1: f64, s2: f64) -> ObmParams {
        ObmParams::new(s1, s2).unwrap()
    }

    fn r(v: f64) -> Discount {
        Discount::new(v).unwrap()
    }

    #[test]
    fn chain_construction() {
        let gm = build_chain(p(1.0, 2.0), -2.0, 3.0, 501).unwrap();
        assert!(gm.node(-1.0).is_some() && gm.node(0.0).is_some());
        assert!((gm.h - 0.01).abs() < 1e-15);
        let i0 = gm.node(0.0).unwrap();
        assert!((gm.dt[i0] - 0.5 * 1e-4 * 1.25).abs() < 1e-18);
        assert!((gm.dt[i0 - 1] - 1e-4).abs() < 1e-18);
        assert!((gm.dt[i0 + 1] - 0.25e-4).abs() < 1e-18);
        for i in 0..gm.len() {
            assert_eq!(gm.p_up[i] + gm.p_down[i], 1.0);
        }
        assert!(build_chain(p(1.0, 1.0), -0.5, 1.0, 200).is_err());
        assert!(build_chain(p(1.0, 1.0), -2.0, 1.0, 50).is_err());
    }

    #[test]
    fn equal_volatility_uniform_step() {
        let gm = build_chain(p(1.3, 1.3), -2.0, 2.0, 401).unwrap();
        assert!(gm
            .dt
            .iter()
            .all(|&d| (d - gm.h * gm.h / 1.69).abs() < 1e-18));
    }

    #[test]
    fn interface_variance_matches_both_sides() {
        // One step from a node next to 0 has variance h^2 = sigma^2 dt.
        let gm = build_chain(p(1.0, 2.0), -2.0, 3.0, 501).unwrap();
        let i0 = gm.node(0.0).unwrap();
        for (i, s) in [(i0 - 1, 1.0), (i0 + 1, 2.0)] {
            let var = gm.h * gm.h;
            assert!((var - s * s * gm.dt[i]).abs() < 1e-15);
        }
        let avg = 0.5 * (1.0 * 1.0 + 2.0 * 2.0) * gm.dt[i0];
        assert!((avg - gm.h * gm.h).abs() < gm.h * gm.h);
    }

    #[test]
    fn thomas_solves_tridiagonal() {
        let lower = [0.0, -1.0, -1.0, -1.0];
        let diag = [4.0, 4.0, 4.0, 4.0];
        let upper = [-1.0, -1.0, -1.0, 0.0];
        let x = [1.0, 2.0, 3.0, 4.0];
        let mut rhs: Vec<f64> = (0..4)
            .map(|i| {
                diag[i] * x[i]
                    + if i > 0 { lower[i] * x[i - 1] } else { 0.0 }
                    + if i < 3 { upper[i] * x[i + 1] } else { 0.0 }
            })
            .collect();
        thomas(&lower, &diag, &upper, &mut rhs);
        for i in 0..4 {
            assert!((rhs[i] - x[i]).abs() < 1e-14);
        }
    }

    #[test]
    fn methods_agree_on_small_grid() {
        let gm = build_chain(p(1.0, 2.0), -2.0, 3.0, 201).unwrap();
        let pi = solve_stopping(&gm, Reward::QuadraticPlus, r(4.5)).unwrap();
        let vi = solve_stopping_with(
            &gm,
            Reward::QuadraticPlus,
            r(4.5),
            GridMethod::ValueIteration {
                omega: 1.5,
                max_iter: 1_000_000,
                tol: 1e-13,
            },
        )
        .unwrap();
        for (a, b) in pi.values.iter().zip(&vi.values) {
            assert!((a - b).abs() < 1e-9);
        }
        assert_eq!(pi.stop, vi.stop);
    }

    #[test]
    fn plain_value_iteration_is_monotone() {
        let gm = build_chain(p(1.0, 2.0), -2.0, 3.0, 101)
            .unwrap()
            .with_discount(r(3.0));
        let g: Vec<f64> = gm
            .xs
            .iter()
            .map(|&x| Reward::QuadraticPlus.value(x))
            .collect();
        let g_max = g.iter().cloned().fold(0.0, f64::max);
        let mut v = g.clone();
        v[0] = 0.0;
        for _ in 0..500 {
            let prev = v.clone();
            sweep(&gm, &g, &mut v, 1.0);
            assert!(v.iter().zip(&prev).all(|(a, b)| a >= b));
            assert!(v.iter().all(|&x| x <= g_max));
        }
    }

    #[test]
    fn extract_region_patterns() {
        let xs: Vec<f64> = (0..6).map(f64::from).collect();
        let all = extract_region(&[true; 6], &xs);
        assert_eq!(all.components(), &[Interval::closed(0.0, 5.0)]);
        let one = extract_region(&[false, false, true, true, true, true], &xs);
        assert_eq!(one.components(), &[Interval::closed(1.5, 5.0)]);
        assert_eq!(interior_boundaries(&one, &xs), vec![1.5]);
        let two = extract_region(&[false, true, false, false, true, true], &xs);
        assert_eq!(two.components().len(), 2);
        assert!(two.components()[1].contains(5.0));
        assert_eq!(interior_boundaries(&two, &xs), vec![0.5, 1.5, 3.5]);
    }

    #[test]
    fn csv_dump() {
        let gm = build_chain(p(1.0, 1.0), -2.0, 1.0, 101).unwrap();
        let sol = solve_stopping(&gm, Reward::LinearPlus, r(1.0)).unwrap();
        let mut out = Vec::new();
        sol.write_csv(&gm, Reward::LinearPlus, &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert!(text.starts_with("x,g,V,stop\n"));
        assert_eq!(text.lines().count(), gm.len() + 1);
    }
}
