//! Purity from measurement records.
//!
//! Two routes:
//!
//! * **Q-joint**: vacuum-corrected second moments of heterodyne pairs,
//!   `σ̂_xx = Var̂(x) − ½`, `σ̂_pp = Var̂(p) − ½`, `σ̂_xp = Cov̂(x, p)`, then
//!   `μ̂ = 1 / (2 √det σ̂)`.
//! * **Three-quadrature**: homodyne variances at θ = 0, π/4, π/2 plugged into
//!   `μ = [4σ_{π/4}(σ₀ + σ_{π/2} − σ_{π/4}) − (σ₀ − σ_{π/2})²]^{−1/2}`.
//!
//! Confidence intervals are percentile bootstrap intervals. Degenerate
//! estimates (non-positive determinant or bracket) are reported as errors,
//! never clamped.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::{GaussianState, PhasePoint};
use crate::rng::Seed;
use crate::sampling::{sample_q, sample_three_quadratures, HomodyneBatch, QSampleBatch, THREE_QUADRATURE_PHASES};

const PHASE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Method {
    QJoint,
    ThreeQuadrature,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentEstimate {
    pub mean_x: f64,
    pub mean_p: f64,
    pub sxx_hat: f64,
    pub spp_hat: f64,
    pub sxp_hat: f64,
    pub n: usize,
}

impl MomentEstimate {
    pub fn det(&self) -> f64 {
        self.sxx_hat * self.spp_hat - self.sxp_hat * self.sxp_hat
    }

    /// Plug-in purity `1 / (2 √det σ̂)`.
    pub fn purity(&self) -> Result<f64> {
        let det = self.det();
        if !(det > 0.0 && self.sxx_hat > 0.0) {
            return Err(Error::DegenerateSample(format!(
                "estimated covariance is not positive definite, det {det:e} (n = {})",
                self.n
            )));
        }
        Ok(0.5 / det.sqrt())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PurityEstimate {
    pub method: Method,
    pub mu_hat: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub level: f64,
    pub n: usize,
}

impl PurityEstimate {
    /// Half width of the interval relative to the estimate.
    pub fn relative_half_width(&self) -> f64 {
        0.5 * (self.ci_high - self.ci_low) / self.mu_hat
    }
}

/// Percentile-bootstrap settings. `resamples == 0` yields the degenerate
/// interval `[μ̂, μ̂]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bootstrap {
    pub resamples: usize,
    pub level: f64,
    pub seed: Seed,
}

impl Default for Bootstrap {
    fn default() -> Self {
        Bootstrap {
            resamples: 400,
            level: 0.68,
            seed: Seed(0x0005_EED0),
        }
    }
}

impl Bootstrap {
    pub fn new(resamples: usize, level: f64, seed: Seed) -> Self {
        Bootstrap { resamples, level, seed }
    }

    fn validate(&self) -> Result<()> {
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(Error::param("level", format!("must lie in (0, 1), got {}", self.level)));
        }
        Ok(())
    }

    /// Runs `stat` on `resamples` derived streams and returns the percentile
    /// interval, widened if needed so it contains `point`.
    fn interval<F>(&self, point: f64, stat: F) -> Result<(f64, f64)>
    where
        F: Fn(&mut rand_chacha::ChaCha8Rng) -> Result<f64> + Sync,
    {
        if self.resamples == 0 {
            return Ok((point, point));
        }
        let mut values: Vec<f64> = (0..self.resamples as u64)
            .into_par_iter()
            .filter_map(|i| stat(&mut self.seed.derive(i).rng()).ok())
            .collect();
        if values.len() * 2 < self.resamples {
            return Err(Error::DegenerateSample(format!(
                "{} of {} bootstrap resamples were degenerate",
                self.resamples - values.len(),
                self.resamples
            )));
        }
        values.sort_by(f64::total_cmp);
        let lo = quantile_sorted(&values, 0.5 * (1.0 - self.level));
        let hi = quantile_sorted(&values, 0.5 * (1.0 + self.level));
        Ok((lo.min(point), hi.max(point)))
    }
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let (i, frac) = (pos.floor() as usize, pos.fract());
    if i + 1 < sorted.len() {
        sorted[i] + frac * (sorted[i + 1] - sorted[i])
    } else {
        sorted[i]
    }
}

/// Shifted single-pass accumulator for means and unbiased (co)variances.
#[derive(Default, Clone, Copy)]
struct Moments2 {
    n: usize,
    sx: f64,
    sp: f64,
    sxx: f64,
    spp: f64,
    sxp: f64,
}

impl Moments2 {
    fn push(&mut self, dx: f64, dp: f64) {
        self.n += 1;
        self.sx += dx;
        self.sp += dp;
        self.sxx += dx * dx;
        self.spp += dp * dp;
        self.sxp += dx * dp;
    }

    /// (mean_x, mean_p, var_x, var_p, cov_xp) relative to the shift.
    fn finish(&self) -> (f64, f64, f64, f64, f64) {
        let n = self.n as f64;
        let (mx, mp) = (self.sx / n, self.sp / n);
        let d = n - 1.0;
        (
            mx,
            mp,
            (self.sxx - n * mx * mx) / d,
            (self.spp - n * mp * mp) / d,
            (self.sxp - n * mx * mp) / d,
        )
    }
}

fn moments_from_iter(pairs: impl Iterator<Item = PhasePoint>, shift: PhasePoint) -> MomentEstimate {
    let mut acc = Moments2::default();
    for pt in pairs {
        acc.push(pt.x - shift.x, pt.p - shift.p);
    }
    let (mx, mp, vx, vp, cxp) = acc.finish();
    MomentEstimate {
        mean_x: mx + shift.x,
        mean_p: mp + shift.p,
        sxx_hat: vx - 0.5,
        spp_hat: vp - 0.5,
        sxp_hat: cxp,
        n: acc.n,
    }
}

fn rough_center(pairs: &[PhasePoint]) -> PhasePoint {
    let k = pairs.len().min(64);
    let (sx, sp) = pairs[..k].iter().fold((0.0, 0.0), |(a, b), pt| (a + pt.x, b + pt.p));
    PhasePoint::new(sx / k as f64, sp / k as f64)
}

/// Vacuum-corrected covariance estimate from Q-distributed pairs.
pub fn moments_from_q(batch: &QSampleBatch) -> Result<MomentEstimate> {
    let pairs = batch.pairs();
    if pairs.len() < 2 {
        return Err(Error::InsufficientData {
            required: 2,
            got: pairs.len(),
        });
    }
    Ok(moments_from_iter(pairs.iter().copied(), rough_center(pairs)))
}

/// Q-joint point estimate without an interval.
pub fn q_point_estimate(batch: &QSampleBatch) -> Result<f64> {
    moments_from_q(batch)?.purity()
}

pub fn purity_from_q(batch: &QSampleBatch, bootstrap: &Bootstrap) -> Result<PurityEstimate> {
    bootstrap.validate()?;
    let pairs = batch.pairs();
    let n = pairs.len();
    if n < 3 {
        return Err(Error::InsufficientData { required: 3, got: n });
    }
    let shift = rough_center(pairs);
    let mu_hat = moments_from_iter(pairs.iter().copied(), shift).purity()?;
    let (ci_low, ci_high) = bootstrap.interval(mu_hat, |rng| {
        moments_from_iter((0..n).map(|_| pairs[rng.random_range(0..n)]), shift).purity()
    })?;
    Ok(PurityEstimate {
        method: Method::QJoint,
        mu_hat,
        ci_low,
        ci_high,
        level: bootstrap.level,
        n,
    })
}

/// Purity from homodyne variances at θ = 0, π/4, π/2.
pub fn purity_from_three_quadratures(var0: f64, var45: f64, var90: f64) -> Result<f64> {
    let bracket = 4.0 * var45 * (var0 + var90 - var45) - (var0 - var90).powi(2);
    if !(bracket > 0.0) {
        return Err(Error::DegenerateSample(format!(
            "three-quadrature bracket is non-positive ({bracket:e})"
        )));
    }
    Ok(bracket.powf(-0.5))
}

fn unbiased_variance(values: impl Iterator<Item = f64>, shift: f64) -> (usize, f64) {
    let (mut n, mut s, mut ss) = (0usize, 0.0, 0.0);
    for v in values {
        let d = v - shift;
        n += 1;
        s += d;
        ss += d * d;
    }
    let nf = n as f64;
    let m = s / nf;
    (n, (ss - nf * m * m) / (nf - 1.0))
}

pub fn estimate_purity_homodyne(
    b0: &HomodyneBatch,
    b45: &HomodyneBatch,
    b90: &HomodyneBatch,
    bootstrap: &Bootstrap,
) -> Result<PurityEstimate> {
    bootstrap.validate()?;
    let batches = [b0, b45, b90];
    for (b, expected) in batches.iter().zip(THREE_QUADRATURE_PHASES) {
        if (b.theta() - expected).abs() > PHASE_TOL {
            return Err(Error::param(
                "theta",
                format!("expected batch at θ = {expected}, got θ = {}", b.theta()),
            ));
        }
    }
    let shifts = batches.map(|b| b.values()[0]);
    let vars: Vec<f64> = batches
        .iter()
        .zip(shifts)
        .map(|(b, s)| unbiased_variance(b.values().iter().copied(), s).1)
        .collect();
    let mu_hat = purity_from_three_quadratures(vars[0], vars[1], vars[2])?;
    let (ci_low, ci_high) = bootstrap.interval(mu_hat, |rng| {
        let mut v = [0.0; 3];
        for (k, (b, s)) in batches.iter().zip(shifts).enumerate() {
            let vals = b.values();
            let m = vals.len();
            v[k] = unbiased_variance((0..m).map(|_| vals[rng.random_range(0..m)]), s).1;
        }
        purity_from_three_quadratures(v[0], v[1], v[2])
    })?;
    Ok(PurityEstimate {
        method: Method::ThreeQuadrature,
        mu_hat,
        ci_low,
        ci_high,
        level: bootstrap.level,
        n: batches.iter().map(|b| b.n()).sum(),
    })
}

/// Point estimate for `n_total` simulated detections with the given method.
pub fn simulate_point_estimate(state: &GaussianState, method: Method, n_total: usize, seed: Seed) -> Result<f64> {
    match method {
        Method::QJoint => q_point_estimate(&sample_q(state, n_total, seed)?),
        Method::ThreeQuadrature => {
            let [b0, b45, b90] = sample_three_quadratures(state, n_total, seed)?;
            let v = [&b0, &b45, &b90].map(|b| unbiased_variance(b.values().iter().copied(), b.values()[0]).1);
            purity_from_three_quadratures(v[0], v[1], v[2])
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingRow {
    pub n: usize,
    /// Mean over trials of `|μ̂ − μ| / μ`.
    pub mean_rel_error: f64,
    pub mean_mu: f64,
    /// Across-trial standard deviation of `μ̂`.
    pub sd_mu: f64,
    /// Trials whose estimate was degenerate and excluded.
    pub degenerate: usize,
}

/// Relative error of repeated independent estimates versus sample size. Trial
/// `j` of grid point `i` uses stream `seed.derive(i).derive(j)`.
pub fn error_scaling_sweep(
    state: &GaussianState,
    method: Method,
    n_grid: &[usize],
    trials: usize,
    seed: Seed,
) -> Result<Vec<ScalingRow>> {
    if n_grid.is_empty() || n_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::param("n_grid", "must be non-empty and strictly ascending"));
    }
    if trials == 0 {
        return Err(Error::param("trials", "must be at least 1"));
    }
    let truth = state.purity();
    n_grid
        .iter()
        .enumerate()
        .map(|(i, &n)| {
            let row_seed = seed.derive(i as u64);
            let results: Vec<Result<f64>> = (0..trials as u64)
                .into_par_iter()
                .map(|j| simulate_point_estimate(state, method, n, row_seed.derive(j)))
                .collect();
            let mut mus = Vec::with_capacity(trials);
            for r in results {
                match r {
                    Ok(mu) => mus.push(mu),
                    Err(Error::DegenerateSample(_)) => {}
                    Err(e) => return Err(e),
                }
            }
            let k = mus.len() as f64;
            let mean_mu = mus.iter().sum::<f64>() / k;
            let sd_mu = if mus.len() > 1 {
                (mus.iter().map(|m| (m - mean_mu).powi(2)).sum::<f64>() / (k - 1.0)).sqrt()
            } else {
                0.0
            };
            Ok(ScalingRow {
                n,
                mean_rel_error: mus.iter().map(|m| (m - truth).abs() / truth).sum::<f64>() / k,
                mean_mu,
                sd_mu,
                degenerate: trials - mus.len(),
            })
        })
        .collect()
}
