//! Closed-form building blocks for the oscillating Brownian motion: the
//! volatility pair, the discount rate, the rewards, the fundamental solutions
//! of `d/dm d/dx u = r u`, and the skew Brownian motion correspondence.

use serde::{Deserialize, Serialize};

use crate::error::{domain, require_finite, Result};

/// Exponent above which exponentials are reported as `+inf`.
pub const DEFAULT_MAX_EXPONENT: f64 = 700.0;

/// Which one-sided limit to take at a point where a function is only
/// piecewise smooth.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

/// Volatilities of the oscillating Brownian motion: `sigma1` on `x < 0`,
/// `sigma2` on `x >= 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObmParams {
    sigma1: f64,
    sigma2: f64,
}

impl ObmParams {
    pub fn new(sigma1: f64, sigma2: f64) -> Result<Self> {
        for (name, v) in [("sigma1", sigma1), ("sigma2", sigma2)] {
            require_finite(name, v)?;
            if v <= 0.0 {
                return Err(domain(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(Self { sigma1, sigma2 })
    }

    pub fn sigma1(&self) -> f64 {
        self.sigma1
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    /// Local volatility; the interface point belongs to the right half-line.
    pub fn sigma(&self, x: f64) -> f64 {
        if x < 0.0 {
            self.sigma1
        } else {
            self.sigma2
        }
    }

    /// Density of the speed measure, `2 / sigma(x)^2`. The measure puts no
    /// mass on the interface.
    pub fn speed_density(&self, x: f64) -> f64 {
        let s = self.sigma(x);
        2.0 / (s * s)
    }

    /// `(lambda1, lambda2) = (sqrt(2r)/sigma1, sqrt(2r)/sigma2)`; the
    /// exponents of the fundamental solutions are `±lambda_i`.
    pub fn exponents(&self, r: Discount) -> (f64, f64) {
        let s = (2.0 * r.value()).sqrt();
        (s / self.sigma1, s / self.sigma2)
    }
}

/// Strictly positive discount rate.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct Discount(f64);

impl Discount {
    pub fn new(r: f64) -> Result<Self> {
        require_finite("r", r)?;
        if r <= 0.0 {
            return Err(domain(format!("discount rate must be positive, got {r}")));
        }
        Ok(Self(r))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// Skewness index of a skew Brownian motion, `0 < beta < 1`. `beta` is the
/// probability that an excursion from the origin is positive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SkewParams {
    beta: f64,
}

impl SkewParams {
    pub fn new(beta: f64) -> Result<Self> {
        require_finite("beta", beta)?;
        if !(beta > 0.0 && beta < 1.0) {
            return Err(domain(format!("beta must lie in (0, 1), got {beta}")));
        }
        Ok(Self { beta })
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// Slope of the scale function on the side of `x` selected by `side`.
    pub fn scale_deriv(&self, x: f64, side: Side) -> f64 {
        let left = x < 0.0 || (x == 0.0 && side == Side::Left);
        if left {
            1.0 / (2.0 * (1.0 - self.beta))
        } else {
            1.0 / (2.0 * self.beta)
        }
    }

    /// Scale function: `x / (2(1-beta))` for `x < 0`, `x / (2 beta)` for `x >= 0`.
    pub fn scale(&self, x: f64) -> f64 {
        x * self.scale_deriv(x, Side::Right)
    }

    pub fn scale_inv(&self, y: f64) -> f64 {
        if y < 0.0 {
            y * 2.0 * (1.0 - self.beta)
        } else {
            y * 2.0 * self.beta
        }
    }

    /// Density of the speed measure of the skew Brownian motion.
    pub fn speed_density(&self, x: f64) -> f64 {
        if x < 0.0 {
            4.0 * (1.0 - self.beta)
        } else {
            4.0 * self.beta
        }
    }
}

/// The OBM obtained by putting a skew Brownian motion in natural scale.
pub fn sbm_to_obm(beta: SkewParams) -> ObmParams {
    let b = beta.beta();
    ObmParams {
        sigma1: 1.0 / (2.0 * (1.0 - b)),
        sigma2: 1.0 / (2.0 * b),
    }
}

/// Inverse of [`sbm_to_obm`] up to a spatial factor: if `Y` is a skew
/// Brownian motion with the returned index, `factor * scale(Y)` is an OBM
/// with volatilities `params`.
pub fn obm_to_sbm(params: ObmParams) -> (SkewParams, f64) {
    let (s1, s2) = (params.sigma1, params.sigma2);
    let beta = SkewParams {
        beta: s1 / (s1 + s2),
    };
    (beta, 2.0 * s1 * s2 / (s1 + s2))
}

/// Functions with first and second derivatives, enough to apply the
/// generator.
pub trait SmoothFn {
    fn value(&self, x: f64) -> f64;
    fn d1(&self, x: f64) -> f64;
    fn d2(&self, x: f64) -> f64;
}

/// Generator of the OBM, `sigma(x)^2 / 2 * f''(x)`, off the interface.
pub fn generator_apply(params: &ObmParams, f: &impl SmoothFn, x: f64) -> Result<f64> {
    require_finite("x", x)?;
    if x == 0.0 {
        return Err(domain("generator is undefined at the interface x = 0"));
    }
    let s = params.sigma(x);
    Ok(0.5 * s * s * f.d2(x))
}

/// The increasing (`psi`) and decreasing (`phi`) fundamental solutions for a
/// fixed discount rate, normalised by `psi(0) = phi(0) = 1`.
///
/// `phi = a1 e^{-l1 x} + a2 e^{l1 x}` on `x < 0` and `e^{-l2 x}` on `x >= 0`;
/// `psi = e^{l1 x}` on `x < 0` and `b1 e^{l2 x} + b2 e^{-l2 x}` on `x >= 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FundamentalPair {
    pub params: ObmParams,
    pub r: Discount,
    pub a1: f64,
    pub a2: f64,
    pub b1: f64,
    pub b2: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    pub max_exponent: f64,
}

impl FundamentalPair {
    pub fn new(params: ObmParams, r: Discount) -> Self {
        let (lambda1, lambda2) = params.exponents(r);
        let ratio = params.sigma1 / params.sigma2;
        Self {
            params,
            r,
            a1: 0.5 * (1.0 + ratio),
            a2: 0.5 * (1.0 - ratio),
            b1: 0.5 * (1.0 + 1.0 / ratio),
            b2: 0.5 * (1.0 - 1.0 / ratio),
            lambda1,
            lambda2,
            max_exponent: DEFAULT_MAX_EXPONENT,
        }
    }

    pub fn with_max_exponent(mut self, max_exponent: f64) -> Self {
        self.max_exponent = max_exponent;
        self
    }

    fn exp(&self, arg: f64) -> f64 {
        if arg > self.max_exponent {
            f64::INFINITY
        } else {
            arg.exp()
        }
    }

    pub fn psi(&self, x: f64) -> f64 {
        if x < 0.0 {
            self.exp(self.lambda1 * x)
        } else {
            let l = self.lambda2;
            self.b1 * self.exp(l * x) + self.b2 * self.exp(-l * x)
        }
    }

    pub fn psi_deriv(&self, x: f64) -> f64 {
        if x < 0.0 {
            self.lambda1 * self.exp(self.lambda1 * x)
        } else {
            let l = self.lambda2;
            l * (self.b1 * self.exp(l * x) - self.b2 * self.exp(-l * x))
        }
    }

    pub fn psi_deriv2(&self, x: f64) -> f64 {
        if x < 0.0 {
            self.lambda1 * self.lambda1 * self.psi(x)
        } else {
            self.lambda2 * self.lambda2 * self.psi(x)
        }
    }

    pub fn phi(&self, x: f64) -> f64 {
        if x < 0.0 {
            let l = self.lambda1;
            self.a1 * self.exp(-l * x) + self.a2 * self.exp(l * x)
        } else {
            self.exp(-self.lambda2 * x)
        }
    }

    pub fn phi_deriv(&self, x: f64) -> f64 {
        if x < 0.0 {
            let l = self.lambda1;
            l * (self.a2 * self.exp(l * x) - self.a1 * self.exp(-l * x))
        } else {
            -self.lambda2 * self.exp(-self.lambda2 * x)
        }
    }

    pub fn phi_deriv2(&self, x: f64) -> f64 {
        if x < 0.0 {
            self.lambda1 * self.lambda1 * self.phi(x)
        } else {
            self.lambda2 * self.lambda2 * self.phi(x)
        }
    }

    /// `psi' phi - psi phi'`, constant in natural scale.
    pub fn wronskian(&self) -> f64 {
        self.lambda1 + self.lambda2
    }

    pub fn psi_fn(&self) -> Psi<'_> {
        Psi(self)
    }

    pub fn phi_fn(&self) -> Phi<'_> {
        Phi(self)
    }
}

pub fn fundamental_pair(params: ObmParams, r: Discount) -> FundamentalPair {
    FundamentalPair::new(params, r)
}

#[derive(Debug, Clone, Copy)]
pub struct Psi<'a>(&'a FundamentalPair);

#[derive(Debug, Clone, Copy)]
pub struct Phi<'a>(&'a FundamentalPair);

impl SmoothFn for Psi<'_> {
    fn value(&self, x: f64) -> f64 {
        self.0.psi(x)
    }
    fn d1(&self, x: f64) -> f64 {
        self.0.psi_deriv(x)
    }
    fn d2(&self, x: f64) -> f64 {
        self.0.psi_deriv2(x)
    }
}

impl SmoothFn for Phi<'_> {
    fn value(&self, x: f64) -> f64 {
        self.0.phi(x)
    }
    fn d1(&self, x: f64) -> f64 {
        self.0.phi_deriv(x)
    }
    fn d2(&self, x: f64) -> f64 {
        self.0.phi_deriv2(x)
    }
}

/// Shape of the payoff before any change of scale.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaseReward {
    /// `(1 + x)^+`
    LinearPlus,
    /// `((1 + x)^+)^2`
    QuadraticPlus,
}

impl BaseReward {
    fn value(self, u: f64) -> f64 {
        let p = (1.0 + u).max(0.0);
        match self {
            BaseReward::LinearPlus => p,
            BaseReward::QuadraticPlus => p * p,
        }
    }

    fn d1(self, u: f64, side: Side) -> f64 {
        let active = u > -1.0 || (u == -1.0 && side == Side::Right);
        match self {
            BaseReward::LinearPlus if active => 1.0,
            BaseReward::QuadraticPlus if active => 2.0 * (1.0 + u),
            _ => 0.0,
        }
    }

    fn d2(self, u: f64) -> f64 {
        match self {
            BaseReward::QuadraticPlus if u > -1.0 => 2.0,
            _ => 0.0,
        }
    }
}

/// Reward function `g` seen by the OBM.
///
/// The skew variants are the built-in rewards of a skew Brownian motion
/// transported to natural scale, `g = base ∘ scale⁻¹`; `Skew(LinearPlus, β)`
/// is `(1 + 2(1-β)x)^+` on `x < 0` and `1 + 2βx` on `x >= 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reward {
    LinearPlus,
    QuadraticPlus,
    Skew(BaseReward, SkewParams),
}

impl Reward {
    pub fn base(&self) -> BaseReward {
        match *self {
            Reward::LinearPlus => BaseReward::LinearPlus,
            Reward::QuadraticPlus => BaseReward::QuadraticPlus,
            Reward::Skew(b, _) => b,
        }
    }

    fn inner(&self, x: f64, side: Side) -> (f64, f64) {
        match *self {
            Reward::Skew(_, beta) => (beta.scale_inv(x), 1.0 / beta.scale_deriv(x, side)),
            _ => (x, 1.0),
        }
    }

    pub fn value(&self, x: f64) -> f64 {
        self.base().value(self.inner(x, Side::Right).0)
    }

    pub fn deriv(&self, x: f64, side: Side) -> f64 {
        let (u, slope) = self.inner(x, side);
        self.base().d1(u, side) * slope
    }

    pub fn deriv2(&self, x: f64) -> f64 {
        let (u, slope) = self.inner(x, Side::Right);
        self.base().d2(u) * slope * slope
    }

    /// `g = 0` on `(-inf, zero_point]` and `g > 0` to the right of it.
    pub fn zero_point(&self) -> f64 {
        match *self {
            Reward::Skew(_, beta) => beta.scale(-1.0),
            _ => -1.0,
        }
    }

    /// Points where `g'` jumps.
    pub fn kinks(&self) -> Vec<f64> {
        let mut out = Vec::new();
        if self.base() == BaseReward::LinearPlus {
            out.push(self.zero_point());
        }
        if let Reward::Skew(_, beta) = *self {
            if beta.beta() != 0.5 {
                out.push(0.0);
            }
        }
        out
    }

    pub fn is_differentiable_at(&self, x: f64) -> bool {
        self.deriv(x, Side::Left) == self.deriv(x, Side::Right)
    }
}

impl SmoothFn for Reward {
    fn value(&self, x: f64) -> f64 {
        Reward::value(self, x)
    }
    fn d1(&self, x: f64) -> f64 {
        self.deriv(x, Side::Right)
    }
    fn d2(&self, x: f64) -> f64 {
        self.deriv2(x)
    }
}

/// Piecewise-linear evaluation of the SBM scale function.
pub fn sbm_scale(beta: SkewParams, x: f64) -> f64 {
    beta.scale(x)
}

pub fn sbm_scale_inv(beta: SkewParams, y: f64) -> f64 {
    beta.scale_inv(y)
}
