//! Finite unions of disjoint intervals, used for stopping and continuation
//! sets.

use serde::Serialize;

use crate::error::{domain, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
    pub lo_closed: bool,
    pub hi_closed: bool,
}

impl Interval {
    /// `[lo, hi]`, with infinite endpoints left open.
    pub fn closed(lo: f64, hi: f64) -> Self {
        Self {
            lo,
            hi,
            lo_closed: lo.is_finite(),
            hi_closed: hi.is_finite(),
        }
    }

    pub fn open(lo: f64, hi: f64) -> Self {
        Self {
            lo,
            hi,
            lo_closed: false,
            hi_closed: false,
        }
    }

    pub fn contains(&self, x: f64) -> bool {
        let above = if self.lo_closed {
            x >= self.lo
        } else {
            x > self.lo
        };
        let below = if self.hi_closed {
            x <= self.hi
        } else {
            x < self.hi
        };
        above && below
    }

    pub fn is_empty(&self) -> bool {
        self.lo > self.hi || (self.lo == self.hi && !(self.lo_closed && self.hi_closed))
    }

    /// True when `self ⊆ other` after widening `other` by `tol` on both ends.
    fn within(&self, other: &Interval, tol: f64) -> bool {
        let lo_ok = if tol > 0.0 {
            self.lo >= other.lo - tol
        } else {
            self.lo > other.lo || (self.lo == other.lo && (other.lo_closed || !self.lo_closed))
        };
        let hi_ok = if tol > 0.0 {
            self.hi <= other.hi + tol
        } else {
            self.hi < other.hi || (self.hi == other.hi && (other.hi_closed || !self.hi_closed))
        };
        lo_ok && hi_ok
    }
}

/// Sorted, pairwise disjoint, non-adjacent, non-empty intervals.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Region {
    components: Vec<Interval>,
}

impl Region {
    pub fn new(components: Vec<Interval>) -> Result<Self> {
        for c in &components {
            if c.lo.is_nan() || c.hi.is_nan() || c.is_empty() {
                return Err(domain(format!("invalid interval {c:?}")));
            }
        }
        for w in components.windows(2) {
            let (a, b) = (&w[0], &w[1]);
            let separated = a.hi < b.lo || (a.hi == b.lo && !a.hi_closed && !b.lo_closed);
            if !separated {
                return Err(domain(format!(
                    "intervals {a:?} and {b:?} overlap, touch or are out of order"
                )));
            }
        }
        Ok(Self { components })
    }

    pub fn empty() -> Self {
        Self {
            components: Vec::new(),
        }
    }

    pub fn whole_line() -> Self {
        Self {
            components: vec![Interval::open(f64::NEG_INFINITY, f64::INFINITY)],
        }
    }

    /// `[c, inf)`.
    pub fn right_of(c: f64) -> Self {
        Self {
            components: vec![Interval::closed(c, f64::INFINITY)],
        }
    }

    pub fn components(&self) -> &[Interval] {
        &self.components
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn is_connected(&self) -> bool {
        self.components.len() == 1
    }

    pub fn contains(&self, x: f64) -> bool {
        self.components.iter().any(|c| c.contains(x))
    }

    /// Finite endpoints in increasing order.
    pub fn boundaries(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for c in &self.components {
            for e in [c.lo, c.hi] {
                if e.is_finite() && out.last() != Some(&e) {
                    out.push(e);
                }
            }
        }
        out
    }

    pub fn complement(&self) -> Region {
        let mut out = Vec::new();
        let mut lo = f64::NEG_INFINITY;
        let mut lo_closed = false;
        for c in &self.components {
            let gap = Interval {
                lo,
                hi: c.lo,
                lo_closed,
                hi_closed: !c.lo_closed && c.lo.is_finite(),
            };
            if !gap.is_empty() && !(gap.lo == f64::NEG_INFINITY && gap.hi == f64::NEG_INFINITY) {
                out.push(gap);
            }
            lo = c.hi;
            lo_closed = !c.hi_closed && c.hi.is_finite();
        }
        if lo < f64::INFINITY {
            let tail = Interval {
                lo,
                hi: f64::INFINITY,
                lo_closed,
                hi_closed: false,
            };
            if !tail.is_empty() {
                out.push(tail);
            }
        }
        Region { components: out }
    }

    /// Set inclusion; with `tol > 0` each endpoint of `other` may be off by
    /// up to `tol`.
    pub fn is_subset_of(&self, other: &Region, tol: f64) -> bool {
        self.components
            .iter()
            .all(|c| other.components.iter().any(|o| c.within(o, tol)))
    }

    /// Image under a continuous strictly increasing bijection of the line.
    pub fn map_increasing(&self, f: impl Fn(f64) -> f64) -> Region {
        let components = self
            .components
            .iter()
            .map(|c| Interval {
                lo: if c.lo.is_finite() { f(c.lo) } else { c.lo },
                hi: if c.hi.is_finite() { f(c.hi) } else { c.hi },
                ..*c
            })
            .collect();
        Region { components }
    }
}
