//! Monte Carlo estimation of stopping values.
//!
//! OBM increments are drawn exactly by sampling a skew Brownian motion and
//! mapping it through the scale function. First entry into a stopping set
//! is detected on the time grid `dt, 2 dt, ...`; monitoring dates at which
//! the path provably cannot be in the set (up to a configurable
//! probability) are skipped with a single exact transition.

use std::io::{self, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytics::{obm_to_sbm, Discount, ObmParams, Reward, SkewParams};
use crate::error::{domain, require_finite, Result};
use crate::region::Region;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sampler {
    ExactSbm,
    Euler,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McConfig {
    pub n_paths: usize,
    pub horizon: f64,
    pub dt: f64,
    pub seed: u64,
    pub sampler: Sampler,
    /// Largest probability with which a skipped stretch of monitoring dates
    /// may contain an entry into the stopping set; 0 disables skipping.
    /// Only used with the exact sampler.
    pub skip_tol: f64,
}

pub const PATHS_PER_BATCH: usize = 1024;

impl McConfig {
    pub fn new(n_paths: usize, horizon: f64, dt: f64, seed: u64, sampler: Sampler) -> Result<Self> {
        let cfg = Self {
            n_paths,
            horizon,
            dt,
            seed,
            sampler,
            skip_tol: 1e-12,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// 1e5 paths, `dt = 1e-4`, horizon `50 / r`, exact sampler.
    pub fn for_rate(r: Discount) -> Self {
        Self {
            n_paths: 100_000,
            horizon: 50.0 / r.value(),
            dt: 1e-4,
            seed: 0,
            sampler: Sampler::ExactSbm,
            skip_tol: 1e-12,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_paths == 0 {
            return Err(domain("Monte Carlo needs at least one path"));
        }
        require_finite("dt", self.dt)?;
        require_finite("horizon", self.horizon)?;
        if !(self.dt > 0.0) || !(self.horizon >= self.dt) {
            return Err(domain(format!(
                "need dt > 0 and horizon >= dt, got dt = {}, horizon = {}",
                self.dt, self.horizon
            )));
        }
        if !(0.0..1.0).contains(&self.skip_tol) {
            return Err(domain(format!(
                "skip_tol must lie in [0, 1), got {}",
                self.skip_tol
            )));
        }
        Ok(())
    }
}

/// One exact draw of a skew Brownian motion at time `t` started from `x`.
///
/// A Brownian candidate `y ~ N(x, t)` that stays on the side of `x` is kept
/// with the probability `1 - exp(-2|x||y|/t)` that the bridge avoids 0.
/// Otherwise the path has met 0; the magnitude `|y|` then has density
/// proportional to `n(|x| + |y|)` and the sign is `+` with probability
/// `beta`.
pub fn sbm_step_exact<R: Rng + ?Sized>(x: f64, t: f64, beta: SkewParams, rng: &mut R) -> f64 {
    let z: f64 = rng.sample(StandardNormal);
    let y = x + t.sqrt() * z;
    if x * y > 0.0 {
        let a = 2.0 * x.abs() * y.abs() / t;
        if a > 745.0 || rng.random::<f64>() < -(-a).exp_m1() {
            return y;
        }
    }
    if rng.random::<f64>() < beta.beta() {
        y.abs()
    } else {
        -y.abs()
    }
}

/// Exact OBM transition over time `t`.
pub fn obm_step<R: Rng + ?Sized>(x: f64, t: f64, params: ObmParams, rng: &mut R) -> f64 {
    let (beta, _) = obm_to_sbm(params);
    let y = sbm_step_exact(x / params.sigma(x), t, beta, rng);
    y * params.sigma(y)
}

pub fn euler_step<R: Rng + ?Sized>(x: f64, dt: f64, params: ObmParams, rng: &mut R) -> f64 {
    let z: f64 = rng.sample(StandardNormal);
    x + params.sigma(x) * dt.sqrt() * z
}

fn std_normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

fn std_normal_cdf(z: f64) -> f64 {
    0.5 * statrs::function::erf::erfc(-z / std::f64::consts::SQRT_2)
}

/// Transition density of skew Brownian motion,
/// `n_t(y - x) + (2 beta - 1) sgn(y) n_t(|x| + |y|)`.
pub fn sbm_transition_density(beta: SkewParams, x: f64, t: f64, y: f64) -> f64 {
    let s = t.sqrt();
    let sgn = if y >= 0.0 { 1.0 } else { -1.0 };
    (std_normal_pdf((y - x) / s)
        + (2.0 * beta.beta() - 1.0) * sgn * std_normal_pdf((x.abs() + y.abs()) / s))
        / s
}

/// Distribution function of [`sbm_transition_density`].
pub fn sbm_transition_cdf(beta: SkewParams, x: f64, t: f64, y: f64) -> f64 {
    let s = t.sqrt();
    let k = 2.0 * beta.beta() - 1.0;
    let ax = x.abs();
    let base = std_normal_cdf((y - x) / s);
    if y < 0.0 {
        base - k * std_normal_cdf((y - ax) / s)
    } else {
        base - k * std_normal_cdf(-ax / s)
            + k * (std_normal_cdf((ax + y) / s) - std_normal_cdf(ax / s))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub n_paths: usize,
    /// Fraction of paths still running at the horizon.
    pub censored_fraction: f64,
    /// Average number of transitions drawn per path.
    pub mean_steps: f64,
}

#[derive(Debug, Clone, Copy, Default)]
struct BatchStats {
    n: usize,
    sum: f64,
    sum_sq: f64,
    censored: usize,
    steps: u64,
}

impl BatchStats {
    fn merge(self, o: BatchStats) -> BatchStats {
        BatchStats {
            n: self.n + o.n,
            sum: self.sum + o.sum,
            sum_sq: self.sum_sq + o.sum_sq,
            censored: self.censored + o.censored,
            steps: self.steps + o.steps,
        }
    }
}

fn distance_to(region: &Region, x: f64) -> f64 {
    region
        .components()
        .iter()
        .map(|c| {
            if x < c.lo {
                c.lo - x
            } else if x > c.hi {
                x - c.hi
            } else {
                0.0
            }
        })
        .fold(f64::INFINITY, f64::min)
}

/// Generator for batch `batch` of a run with seed `seed`.
pub fn batch_rng(seed: u64, batch: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(batch);
    rng
}

struct PathSim<'a> {
    params: ObmParams,
    region: &'a Region,
    cfg: &'a McConfig,
    /// Squared distance per unit time beyond which a skip is allowed.
    skip_scale: f64,
    total_steps: u64,
}

impl<'a> PathSim<'a> {
    fn new(params: ObmParams, region: &'a Region, cfg: &'a McConfig) -> Self {
        let smax = params.sigma1().max(params.sigma2());
        // P(sup |X_u - X_0| >= d over a stretch s) <= 2 exp(-d^2 / (2 smax^2 s)).
        let skip_scale = if cfg.skip_tol > 0.0 && cfg.sampler == Sampler::ExactSbm {
            2.0 * smax * smax * (2.0 / cfg.skip_tol).ln()
        } else {
            f64::INFINITY
        };
        let total_steps = (cfg.horizon / cfg.dt).round().max(1.0) as u64;
        Self {
            params,
            region,
            cfg,
            skip_scale,
            total_steps,
        }
    }

    /// Runs one path; returns `(exit time, exit position, censored, draws)`.
    fn run<R: Rng + ?Sized>(&self, x0: f64, rng: &mut R) -> (f64, f64, bool, u64) {
        let dt = self.cfg.dt;
        let mut x = x0;
        let mut n: u64 = 0;
        let mut draws = 0;
        while n < self.total_steps {
            let mut k = 1;
            if self.skip_scale.is_finite() {
                let d = distance_to(self.region, x);
                let stretch = d * d / self.skip_scale;
                k = ((stretch / dt).floor() as u64).clamp(1, self.total_steps - n);
            }
            x = match self.cfg.sampler {
                Sampler::ExactSbm => obm_step(x, k as f64 * dt, self.params, rng),
                Sampler::Euler => euler_step(x, dt, self.params, rng),
            };
            n += k;
            draws += 1;
            if self.region.contains(x) {
                return (n as f64 * dt, x, false, draws);
            }
        }
        (n as f64 * dt, x, true, draws)
    }
}

/// Estimates `E_x0[e^{-r tau} g(X_tau)]` for the first monitoring date
/// `tau` at which the path lies in `region`. Paths still running at the
/// horizon `T` contribute `e^{-r T} g(X_T)`.
pub fn estimate_value(
    x0: f64,
    region: &Region,
    params: ObmParams,
    r: Discount,
    reward: Reward,
    cfg: &McConfig,
) -> Result<McEstimate> {
    cfg.validate()?;
    require_finite("x0", x0)?;
    if region.is_empty() {
        return Err(domain("stopping region is empty"));
    }
    if region.contains(x0) {
        return Ok(McEstimate {
            mean: reward.value(x0),
            stderr: 0.0,
            n_paths: cfg.n_paths,
            censored_fraction: 0.0,
            mean_steps: 0.0,
        });
    }
    let sim = PathSim::new(params, region, cfg);
    let rv = r.value();
    let n_batches = cfg.n_paths.div_ceil(PATHS_PER_BATCH);
    let batches: Vec<BatchStats> = (0..n_batches)
        .into_par_iter()
        .map(|b| {
            let mut rng = batch_rng(cfg.seed, b as u64);
            let n = PATHS_PER_BATCH.min(cfg.n_paths - b * PATHS_PER_BATCH);
            let mut st = BatchStats::default();
            for _ in 0..n {
                let (t, x, censored, draws) = sim.run(x0, &mut rng);
                let payoff = (-rv * t).exp() * reward.value(x);
                st.n += 1;
                st.sum += payoff;
                st.sum_sq += payoff * payoff;
                st.censored += usize::from(censored);
                st.steps += draws;
            }
            st
        })
        .collect();
    let total = batches
        .into_iter()
        .fold(BatchStats::default(), BatchStats::merge);
    let n = total.n as f64;
    let mean = total.sum / n;
    let var = if total.n > 1 {
        ((total.sum_sq - n * mean * mean) / (n - 1.0)).max(0.0)
    } else {
        0.0
    };
    Ok(McEstimate {
        mean,
        stderr: (var / n).sqrt(),
        n_paths: total.n,
        censored_fraction: total.censored as f64 / n,
        mean_steps: total.steps as f64 / n,
    })
}

/// Simulated positions `(path_id, t, x)` on the grid `0, dt, 2 dt, ...`
/// up to the horizon, without stopping.
pub fn simulate_paths(
    x0: f64,
    params: ObmParams,
    cfg: &McConfig,
) -> Result<Vec<(usize, f64, f64)>> {
    cfg.validate()?;
    require_finite("x0", x0)?;
    let steps = (cfg.horizon / cfg.dt).round() as usize;
    let per_path: Vec<Vec<(usize, f64, f64)>> = (0..cfg.n_paths)
        .into_par_iter()
        .map(|id| {
            let mut rng = batch_rng(cfg.seed, id as u64);
            let mut x = x0;
            let mut out = Vec::with_capacity(steps + 1);
            out.push((id, 0.0, x));
            for k in 1..=steps {
                x = match cfg.sampler {
                    Sampler::ExactSbm => obm_step(x, cfg.dt, params, &mut rng),
                    Sampler::Euler => euler_step(x, cfg.dt, params, &mut rng),
                };
                out.push((id, k as f64 * cfg.dt, x));
            }
            out
        })
        .collect();
    Ok(per_path.into_iter().flatten().collect())
}

pub fn write_paths_csv<W: Write>(paths: &[(usize, f64, f64)], mut w: W) -> io::Result<()> {
    writeln!(w, "path_id,t,x")?;
    for &(id, t, x) in paths {
        writeln!(w, "{id},{t:.16e},{x:.16e}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(s1: f64, s2: f64) -> ObmParams {
        ObmParams::new(s1, s2).unwrap()
    }

    #[test]
    fn config_validation() {
        assert!(McConfig::new(0, 1.0, 1e-3, 0, Sampler::ExactSbm).is_err());
        assert!(McConfig::new(10, 1.0, 0.0, 0, Sampler::ExactSbm).is_err());
        assert!(McConfig::new(10, 1e-4, 1e-3, 0, Sampler::ExactSbm).is_err());
        assert!(McConfig::new(10, 1.0, 1e-3, 0, Sampler::Euler).is_ok());
    }

    #[test]
    fn inside_region_is_exact() {
        let cfg = McConfig::new(100, 1.0, 1e-3, 1, Sampler::ExactSbm).unwrap();
        let est = estimate_value(
            0.5,
            &Region::right_of(0.0),
            p(1.0, 2.0),
            Discount::new(1.0).unwrap(),
            Reward::QuadraticPlus,
            &cfg,
        )
        .unwrap();
        assert_eq!((est.mean, est.stderr), (2.25, 0.0));
        assert!(estimate_value(
            0.5,
            &Region::empty(),
            p(1.0, 2.0),
            Discount::new(1.0).unwrap(),
            Reward::QuadraticPlus,
            &cfg
        )
        .is_err());
    }

    #[test]
    fn same_seed_same_estimate() {
        let cfg = McConfig::new(3000, 2.0, 1e-3, 7, Sampler::ExactSbm).unwrap();
        let run = || {
            estimate_value(
                -0.5,
                &Region::right_of(0.0),
                p(1.0, 2.0),
                Discount::new(2.0).unwrap(),
                Reward::QuadraticPlus,
                &cfg,
            )
            .unwrap()
        };
        let (a, b) = (run(), run());
        assert_eq!(a.mean.to_bits(), b.mean.to_bits());
        assert_eq!(a.stderr.to_bits(), b.stderr.to_bits());
    }

    #[test]
    fn cdf_matches_integrated_density() {
        let beta = SkewParams::new(0.75).unwrap();
        for &(x, t) in &[(0.5, 1.0), (-1.0, 0.5), (0.0, 2.0)] {
            let lo = x - 12.0 * f64::sqrt(t);
            for &y in &[-2.0f64, -0.3, 0.0, 0.4, 1.7] {
                // composite Simpson, split at 0 where the density jumps
                let simpson = |a: f64, b: f64| {
                    let n = 20_000;
                    let h = (b - a) / n as f64;
                    let mut s = sbm_transition_density(beta, x, t, a)
                        + sbm_transition_density(beta, x, t, b);
                    for k in 1..n {
                        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
                        s += w * sbm_transition_density(beta, x, t, a + k as f64 * h);
                    }
                    s * h / 3.0
                };
                let integral = if y <= 0.0 {
                    simpson(lo, y.min(-1e-300))
                } else {
                    simpson(lo, -1e-300) + simpson(0.0, y)
                };
                let cdf = sbm_transition_cdf(beta, x, t, y);
                assert!(
                    (integral - cdf).abs() < 1e-9,
                    "x={x} t={t} y={y}: {integral} vs {cdf}"
                );
            }
            assert!((sbm_transition_cdf(beta, x, t, 50.0) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn equal_volatility_step_is_gaussian() {
        // mean and variance of the increment for sigma1 = sigma2 = 1.5
        let params = p(1.5, 1.5);
        let mut rng = batch_rng(3, 0);
        let n = 200_000;
        let (mut s, mut s2) = (0.0, 0.0);
        for _ in 0..n {
            let d = obm_step(0.2, 0.5, params, &mut rng) - 0.2;
            s += d;
            s2 += d * d;
        }
        let mean = s / n as f64;
        let var = s2 / n as f64 - mean * mean;
        let target = 1.5 * 1.5 * 0.5;
        assert!(mean.abs() < 4.0 * (target / n as f64).sqrt());
        assert!((var - target).abs() < 4.0 * target * (2.0 / n as f64).sqrt());
    }

    #[test]
    fn obm_step_is_a_martingale_with_local_variance() {
        let params = p(1.0, 2.0);
        let mut rng = batch_rng(11, 0);
        let n = 200_000;
        let mut acc = [0.0; 2];
        for _ in 0..n {
            let y = obm_step(1.0, 0.2, params, &mut rng);
            acc[0] += y;
        }
        let mean = acc[0] / n as f64;
        // variance bounded by 4 * 0.2
        assert!((mean - 1.0).abs() < 3.0 * (0.8f64 / n as f64).sqrt());
        let (mut s, mut s2) = (0.0, 0.0);
        for _ in 0..n {
            let d = obm_step(-2.0, 0.01, params, &mut rng) + 2.0;
            s += d;
            s2 += d * d;
        }
        let m = s / n as f64;
        let var = s2 / n as f64 - m * m;
        assert!((var - 0.01).abs() < 3.0 * 0.01 * (2.0 / n as f64).sqrt());
    }

    #[test]
    fn path_dump_shape() {
        let cfg = McConfig::new(3, 0.01, 1e-3, 0, Sampler::ExactSbm).unwrap();
        let paths = simulate_paths(0.0, p(1.0, 2.0), &cfg).unwrap();
        assert_eq!(paths.len(), 3 * 11);
        let mut out = Vec::new();
        write_paths_csv(&paths, &mut out).unwrap();
        assert_eq!(String::from_utf8(out).unwrap().lines().count(), 34);
    }
}
