//! Gaussian states in a damped, possibly squeezed, thermal bath.
//!
//! The bath (Γ, N, M = M₁ + iM₂) drives the covariance matrix linearly toward
//!
//! ```text
//! σ∞ = [[(2N+1)/2 + M₁, M₂], [M₂, (2N+1)/2 − M₁]]
//! ```
//!
//! via `σ̇ = Γ(σ∞ − σ)`, while first moments decay as `Ẋ₀ = −(Γ/2) X₀`. The
//! solution is the convex combination `σ(t) = σ∞(1 − e^{−Γt}) + σ(0)e^{−Γt}`,
//! so every trajectory stays physical whenever `|M|² ≤ N(N+1)`.
//!
//! Squeezing angles follow the covariance parametrization of
//! [`crate::gaussian`]: a bath with `M₁ > 0` compresses p̂ and therefore has
//! asymptotic angle φ∞ = π/2.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::{normalize_angle, purity, CovMatrix, GaussianParams, GaussianState, PhasePoint, Sym2};

/// Relative slack on `|M|² ≤ N(N+1)`.
pub const BATH_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BathParams {
    pub gamma: f64,
    #[serde(rename = "N")]
    pub n: f64,
    #[serde(rename = "M1", default)]
    pub m1: f64,
    #[serde(rename = "M2", default)]
    pub m2: f64,
}

impl BathParams {
    pub fn new(gamma: f64, n: f64, m1: f64, m2: f64) -> Result<Self> {
        validate_bath(&BathParams { gamma, n, m1, m2 })
    }

    /// Unsqueezed bath (M = 0).
    pub fn thermal(gamma: f64, n: f64) -> Result<Self> {
        Self::new(gamma, n, 0.0, 0.0)
    }

    pub fn m_abs2(&self) -> f64 {
        self.m1 * self.m1 + self.m2 * self.m2
    }

    pub fn is_squeezed(&self) -> bool {
        self.m1 != 0.0 || self.m2 != 0.0
    }
}

pub fn validate_bath(bath: &BathParams) -> Result<BathParams> {
    let b = *bath;
    if !(b.gamma.is_finite() && b.n.is_finite() && b.m1.is_finite() && b.m2.is_finite()) {
        return Err(Error::UnphysicalBath("parameters must be finite".into()));
    }
    if !(b.gamma > 0.0) {
        return Err(Error::UnphysicalBath(format!("requires gamma > 0, got {}", b.gamma)));
    }
    if b.n < 0.0 {
        return Err(Error::UnphysicalBath(format!("requires N >= 0, got {}", b.n)));
    }
    let bound = b.n * (b.n + 1.0);
    if b.m_abs2() > bound * (1.0 + BATH_TOL) {
        return Err(Error::UnphysicalBath(format!(
            "requires |M|^2 <= N(N+1), got |M|^2 = {} > {}",
            b.m_abs2(),
            bound
        )));
    }
    Ok(b)
}

fn check_time(t: f64) -> Result<()> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::param("t", format!("must be finite and >= 0, got {t}")));
    }
    Ok(())
}

pub fn asymptotic_cov(bath: &BathParams) -> Result<CovMatrix> {
    let b = validate_bath(bath)?;
    let half = 0.5 * (2.0 * b.n + 1.0);
    CovMatrix::new(half + b.m1, half - b.m1, b.m2)
}

/// Closed-form evolution over a time `t` (in the same units as `1/Γ`).
pub fn evolve_cov(state: &GaussianState, bath: &BathParams, t: f64) -> Result<GaussianState> {
    check_time(t)?;
    let inf = asymptotic_cov(bath)?.as_sym();
    let decay = (-bath.gamma * t).exp();
    let cov = inf.scale(1.0 - decay).add(&state.cov.as_sym().scale(decay));
    let damp = (-0.5 * bath.gamma * t).exp();
    Ok(GaussianState::new(
        PhasePoint::new(state.mean.x * damp, state.mean.p * damp),
        CovMatrix::from_sym(&cov)?,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelAsymptote {
    pub mu_inf: f64,
    pub r_inf: f64,
    pub phi_inf: f64,
    pub nbar_inf: f64,
}

impl ChannelAsymptote {
    pub fn cosh_2r(&self) -> f64 {
        (2.0 * self.r_inf).cosh()
    }
}

/// Purity, squeezing and mean thermal photon number of the stationary state.
pub fn channel_asymptote(bath: &BathParams) -> Result<ChannelAsymptote> {
    let b = validate_bath(bath)?;
    let m2 = b.m_abs2();
    let thermal = 2.0 * b.n + 1.0;
    let mu_inf = (thermal * thermal - 4.0 * m2).max(1.0).powf(-0.5);
    // cosh 2r∞ = √(1 + 4μ∞²|M|²), i.e. sinh 2r∞ = 2μ∞|M|.
    let r_inf = 0.5 * (2.0 * mu_inf * m2.sqrt()).asinh();
    let phi_inf = if b.is_squeezed() {
        normalize_angle(0.5 * b.m2.atan2(-b.m1))
    } else {
        0.0
    };
    Ok(ChannelAsymptote {
        mu_inf,
        r_inf,
        phi_inf,
        nbar_inf: 0.5 * (1.0 / mu_inf - 1.0),
    })
}

/// Bath thermal parameter reproducing a given asymptotic photon number:
/// `N = (√((2n̄∞+1)² + 4|M|²) − 1)/2`.
pub fn bath_n_from_asymptote(nbar_inf: f64, m_abs2: f64) -> f64 {
    0.5 * (((2.0 * nbar_inf + 1.0).powi(2) + 4.0 * m_abs2).sqrt() - 1.0)
}

struct Evolution {
    mu0: f64,
    mu_inf: f64,
    decay: f64,
    /// `cosh 2r∞ cosh 2r₀ − sinh 2r∞ sinh 2r₀ cos(2φ∞ − 2φ₀)`
    overlap: f64,
}

impl Evolution {
    fn new(state0: &GaussianParams, bath: &BathParams, t: f64) -> Result<Self> {
        check_time(t)?;
        let p = state0.normalized()?;
        let asym = channel_asymptote(bath)?;
        let r0 = 2.0 * p.r;
        let overlap = asym.cosh_2r() * r0.cosh()
            - (2.0 * asym.r_inf).sinh() * r0.sinh() * (2.0 * asym.phi_inf - 2.0 * p.phi).cos();
        Ok(Evolution {
            mu0: p.purity()?,
            mu_inf: asym.mu_inf,
            decay: (-bath.gamma * t).exp(),
            overlap,
        })
    }

    fn mu(&self) -> f64 {
        let k = self.mu0 / self.mu_inf;
        let (e, g) = (self.decay, 1.0 - self.decay);
        let bracket = k * k * g * g + e * e + 2.0 * k * self.overlap * g * e;
        self.mu0 / bracket.sqrt()
    }
}

/// Purity at time `t` in closed form, parametrized by the initial
/// `(μ₀, r₀, φ₀)` and the bath asymptote `(μ∞, r∞, φ∞)`.
pub fn mu_of_t(state0: &GaussianParams, bath: &BathParams, t: f64) -> Result<f64> {
    Ok(Evolution::new(state0, bath, t)?.mu())
}

/// `(σ_pp − σ_xx, 2σ_xp)` at time t, scaled by μ₀.
fn squeezing_components(p: &GaussianParams, bath: &BathParams, t: f64) -> Result<(f64, f64)> {
    let mu0 = p.purity()?;
    let e = (-bath.gamma * t).exp();
    let s0 = (2.0 * p.r).sinh();
    let (sin0, cos0) = (2.0 * p.phi).sin_cos();
    let num = 2.0 * mu0 * bath.m2 * (1.0 - e) + s0 * sin0 * e;
    let den = -2.0 * mu0 * bath.m1 * (1.0 - e) + s0 * cos0 * e;
    Ok((den, num))
}

/// `cosh 2r(t) = μ(t) [ (2N+1)(1 − e^{−Γt}) + e^{−Γt} cosh 2r₀ / μ₀ ]`
pub fn cosh_2r_of_t(state0: &GaussianParams, bath: &BathParams, t: f64) -> Result<f64> {
    let ev = Evolution::new(state0, bath, t)?;
    let p = state0.normalized()?;
    let e = ev.decay;
    let value = ev.mu() * ((2.0 * bath.n + 1.0) * (1.0 - e) + e * (2.0 * p.r).cosh() / ev.mu0);
    Ok(if value < 1.0 && value > 1.0 - 1e-12 { 1.0 } else { value })
}

/// Squeezing magnitude at time `t`, from `sinh 2r(t) = (μ(t)/μ₀) |(den, num)|`
/// where `num/den` is the closed-form `tan 2φ(t)` pair.
pub fn r_of_t(state0: &GaussianParams, bath: &BathParams, t: f64) -> Result<f64> {
    let ev = Evolution::new(state0, bath, t)?;
    let p = state0.normalized()?;
    let (den, num) = squeezing_components(&p, bath, t)?;
    Ok(0.5 * (ev.mu() / ev.mu0 * den.hypot(num)).asinh())
}

/// Squeezing angle at time `t` in `[0, π)`; the quadrant comes from the signs of
/// the `tan 2φ(t)` numerator and denominator.
pub fn phi_of_t(state0: &GaussianParams, bath: &BathParams, t: f64) -> Result<f64> {
    check_time(t)?;
    validate_bath(bath)?;
    let p = state0.normalized()?;
    let (den, num) = squeezing_components(&p, bath, t)?;
    Ok(normalize_angle(0.5 * num.atan2(den)))
}

/// Purity of an unsqueezed input in an unsqueezed bath (equivalently, of the
/// matched input in any bath): `μ₀μ∞ / (μ₀ + e^{−Γt}(μ∞ − μ₀))`.
pub fn mu_optimal(mu0: f64, bath: &BathParams, t: f64) -> Result<f64> {
    check_time(t)?;
    if !(mu0 > 0.0 && mu0 <= 1.0) {
        return Err(Error::param("mu0", format!("must lie in (0, 1], got {mu0}")));
    }
    let mu_inf = channel_asymptote(bath)?.mu_inf;
    let e = (-bath.gamma * t).exp();
    Ok(mu0 * mu_inf / (mu0 + e * (mu_inf - mu0)))
}

/// Whether μ(t) has an interior minimum in a thermal (M = 0) bath:
/// `cosh 2r₀ > max(μ₀/μ∞, μ∞/μ₀)`.
pub fn has_purity_minimum(state0: &GaussianParams, bath: &BathParams) -> Result<bool> {
    let b = validate_bath(bath)?;
    if b.is_squeezed() {
        return Err(Error::Unsupported(
            "the purity-minimum criterion holds for M = 0 baths only; use find_purity_minimum".into(),
        ));
    }
    let p = state0.normalized()?;
    let mu0 = p.purity()?;
    let mu_inf = 1.0 / (2.0 * b.n + 1.0);
    Ok((2.0 * p.r).cosh() > (mu0 / mu_inf).max(mu_inf / mu0))
}

/// Numerically locates an interior minimum of μ(t) for any bath: a log-spaced
/// scan over Γt ∈ [1e−6, 60] followed by golden-section refinement. Returns the
/// time (units of 1/Γ scaled by Γ, i.e. real time) of the minimum if the dip lies
/// below both μ(0) and μ(∞).
pub fn find_purity_minimum(state0: &GaussianParams, bath: &BathParams) -> Result<Option<f64>> {
    const POINTS: usize = 4000;
    let b = validate_bath(bath)?;
    let mu = |tau: f64| mu_of_t(state0, &b, tau / b.gamma);
    let (lo_exp, hi_exp) = (-6.0f64, 60f64.log10());
    let mut taus = vec![0.0];
    taus.extend((0..POINTS).map(|i| 10f64.powf(lo_exp + (hi_exp - lo_exp) * i as f64 / (POINTS - 1) as f64)));
    let vals = taus.iter().map(|&t| mu(t)).collect::<Result<Vec<_>>>()?;
    let floor = vals[0].min(mu_of_t(state0, &b, f64::MAX.sqrt())?);
    let idx = (1..vals.len() - 1)
        .filter(|&i| vals[i] <= vals[i - 1] && vals[i] <= vals[i + 1])
        .min_by(|&i, &j| vals[i].total_cmp(&vals[j]));
    let Some(i) = idx else { return Ok(None) };
    if !(vals[i] < floor * (1.0 - 1e-14)) {
        return Ok(None);
    }
    let (mut a, mut c) = (taus[i - 1], taus[i + 1]);
    let inv_phi = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = c - inv_phi * (c - a);
    let mut x2 = a + inv_phi * (c - a);
    let (mut f1, mut f2) = (mu(x1)?, mu(x2)?);
    for _ in 0..200 {
        if (c - a) <= 1e-13 * c.max(1e-12) {
            break;
        }
        if f1 < f2 {
            c = x2;
            x2 = x1;
            f2 = f1;
            x1 = c - inv_phi * (c - a);
            f1 = mu(x1)?;
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + inv_phi * (c - a);
            f2 = mu(x2)?;
        }
    }
    Ok(Some(0.5 * (a + c) / b.gamma))
}

/// Pure input whose purity is best preserved: squeezed like the bath
/// asymptote (r₀ = r∞, φ₀ = φ∞ in covariance angles), centered, n̄₀ = 0. Its
/// squeezing cancels the bath's exactly, so μ(t) follows [`mu_optimal`] with
/// μ₀ = 1.
pub fn optimal_input(bath: &BathParams) -> Result<GaussianParams> {
    let asym = channel_asymptote(bath)?;
    GaussianParams::new(0.0, 0.0, 0.0, asym.r_inf, asym.phi_inf)
}

/// Classical fourth-order Runge–Kutta integration of `σ̇ = Γ(σ∞ − σ)`,
/// `Ẋ₀ = −(Γ/2)X₀` with uniform steps no longer than `step`.
pub fn integrate_cov_ode(state: &GaussianState, bath: &BathParams, t: f64, step: f64) -> Result<GaussianState> {
    check_time(t)?;
    if !(step > 0.0) || !step.is_finite() {
        return Err(Error::param("step", format!("must be finite and > 0, got {step}")));
    }
    let inf = asymptotic_cov(bath)?.as_sym();
    let g = bath.gamma;
    let rhs = |y: &[f64; 5]| -> [f64; 5] {
        [
            g * (inf.xx - y[0]),
            g * (inf.pp - y[1]),
            g * (inf.xp - y[2]),
            -0.5 * g * y[3],
            -0.5 * g * y[4],
        ]
    };
    let axpy = |y: &[f64; 5], k: &[f64; 5], a: f64| -> [f64; 5] { std::array::from_fn(|i| y[i] + a * k[i]) };

    let c = state.cov;
    let mut y = [c.sxx(), c.spp(), c.sxp(), state.mean.x, state.mean.p];
    let steps = (t / step).ceil().max(if t > 0.0 { 1.0 } else { 0.0 }) as usize;
    if steps > 0 {
        let h = t / steps as f64;
        for _ in 0..steps {
            let k1 = rhs(&y);
            let k2 = rhs(&axpy(&y, &k1, 0.5 * h));
            let k3 = rhs(&axpy(&y, &k2, 0.5 * h));
            let k4 = rhs(&axpy(&y, &k3, h));
            y = std::array::from_fn(|i| y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]));
        }
    }
    Ok(GaussianState::new(
        PhasePoint::new(y[3], y[4]),
        CovMatrix::from_sym(&Sym2::new(y[0], y[1], y[2]))?,
    ))
}

/// Closed-form trajectory sampled on a grid of dimensionless times Γt.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<GaussianState>,
    pub mus: Vec<f64>,
    pub rs: Vec<f64>,
    pub phis: Vec<f64>,
}

impl Trajectory {
    pub fn compute(state0: &GaussianParams, bath: &BathParams, gamma_ts: &[f64]) -> Result<Self> {
        let bath = validate_bath(bath)?;
        let p = state0.normalized()?;
        let start = p.to_state()?;
        let mut traj = Trajectory {
            times: Vec::with_capacity(gamma_ts.len()),
            states: Vec::with_capacity(gamma_ts.len()),
            mus: Vec::with_capacity(gamma_ts.len()),
            rs: Vec::with_capacity(gamma_ts.len()),
            phis: Vec::with_capacity(gamma_ts.len()),
        };
        for &gt in gamma_ts {
            let t = gt / bath.gamma;
            traj.times.push(gt);
            traj.states.push(evolve_cov(&start, &bath, t)?);
            traj.mus.push(mu_of_t(&p, &bath, t)?);
            traj.rs.push(r_of_t(&p, &bath, t)?);
            traj.phis.push(phi_of_t(&p, &bath, t)?);
        }
        Ok(traj)
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Largest `|μ_closed(t) − purity(σ(t))|` along the trajectory.
    pub fn max_purity_mismatch(&self) -> f64 {
        self.mus
            .iter()
            .zip(&self.states)
            .map(|(m, s)| (m - purity(&s.cov)).abs())
            .fold(0.0, f64::max)
    }

    /// CSV with columns `gamma_t,mu,r,phi,sxx,spp,sxp,x0,p0`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["gamma_t", "mu", "r", "phi", "sxx", "spp", "sxp", "x0", "p0"])?;
        for i in 0..self.len() {
            let s = &self.states[i];
            wtr.serialize((
                self.times[i],
                self.mus[i],
                self.rs[i],
                self.phis[i],
                s.cov.sxx(),
                s.cov.spp(),
                s.cov.sxp(),
                s.mean.x,
                s.mean.p,
            ))?;
        }
        wtr.flush().map_err(csv::Error::from)?;
        Ok(())
    }
}
