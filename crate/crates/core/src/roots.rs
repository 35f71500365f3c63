//! Bracketing root finders used by the threshold solvers.

use crate::error::{Error, Result};

/// Bisection on `[lo, hi]` where `f(lo)` and `f(hi)` have opposite signs
/// (or one of them is zero). Stops when the bracket is narrower than `tol`
/// or cannot be split further in floating point.
pub fn bisect<F>(mut f: F, mut lo: f64, mut hi: f64, tol: f64) -> Result<f64>
where
    F: FnMut(f64) -> f64,
{
    let mut flo = f(lo);
    let fhi = f(hi);
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 {
        return Ok(hi);
    }
    if flo.is_nan() || fhi.is_nan() || flo.signum() == fhi.signum() {
        return Err(Error::Bracket(format!(
            "no sign change on [{lo}, {hi}]: f = ({flo}, {fhi})"
        )));
    }
    for _ in 0..2000 {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= tol || mid <= lo || mid >= hi {
            return Ok(mid);
        }
        let fm = f(mid);
        if fm == 0.0 {
            return Ok(mid);
        }
        if fm.signum() == flo.signum() {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Grows `start + step * 2^k` until `f` becomes positive. Returns the first
/// such point.
pub fn expand_until_positive<F>(mut f: F, start: f64, step: f64) -> Result<f64>
where
    F: FnMut(f64) -> f64,
{
    let mut width = step;
    for _ in 0..200 {
        let x = start + width;
        let v = f(x);
        if v > 0.0 {
            return Ok(x);
        }
        if !x.is_finite() {
            break;
        }
        width *= 2.0;
    }
    Err(Error::Bracket(format!(
        "function stayed non-positive to the right of {start}"
    )))
}
