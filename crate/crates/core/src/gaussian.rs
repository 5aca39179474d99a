//! Single-mode Gaussian states in the covariance-matrix picture.
//!
//! Conventions: ħ = 1, x̂ = (a + a†)/√2, p̂ = i(a† − a)/√2, so the vacuum has
//! covariance I/2. A state is fixed by its first moments (x₀, p₀) and the
//! symmetric covariance matrix σ; the phenomenological parametrization
//! (n̄, r, φ) maps onto σ through
//!
//! ```text
//! σ_xx = (2n̄+1)/2 · [cosh 2r − sinh 2r · cos 2φ]
//! σ_pp = (2n̄+1)/2 · [cosh 2r + sinh 2r · cos 2φ]
//! σ_xp = (2n̄+1)/2 ·  sinh 2r · sin 2φ
//! ```

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative slack on the uncertainty bound `det σ ≥ 1/4`.
pub const PHYSICALITY_TOL: f64 = 1e-10;

/// Squeezing below this magnitude is treated as zero and its angle pinned to 0.
pub const SQUEEZING_EPS: f64 = 1e-12;

/// Maps an angle onto `[0, π)`.
pub fn normalize_angle(phi: f64) -> f64 {
    let a = phi.rem_euclid(PI);
    if a >= PI {
        0.0
    } else {
        a
    }
}

/// Distance between two squeezing angles, which are only defined modulo π.
pub fn angle_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(PI);
    d.min(PI - d)
}

/// Phenomenological parametrization `D(α₀) S(r, φ) ν_n̄ S†(r, φ) D†(α₀)` with
/// α₀ = (x₀ + i p₀)/√2. Missing fields deserialize as the vacuum's.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GaussianParams {
    pub x0: f64,
    pub p0: f64,
    pub nbar: f64,
    pub r: f64,
    pub phi: f64,
}

impl GaussianParams {
    /// Validated and normalized constructor.
    pub fn new(x0: f64, p0: f64, nbar: f64, r: f64, phi: f64) -> Result<Self> {
        GaussianParams { x0, p0, nbar, r, phi }.normalized()
    }

    pub fn vacuum() -> Self {
        GaussianParams {
            x0: 0.0,
            p0: 0.0,
            nbar: 0.0,
            r: 0.0,
            phi: 0.0,
        }
    }

    pub fn thermal(nbar: f64) -> Result<Self> {
        Self::new(0.0, 0.0, nbar, 0.0, 0.0)
    }

    /// Centered squeezed thermal state.
    pub fn squeezed_thermal(nbar: f64, r: f64, phi: f64) -> Result<Self> {
        Self::new(0.0, 0.0, nbar, r, phi)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("x0", self.x0),
            ("p0", self.p0),
            ("nbar", self.nbar),
            ("r", self.r),
            ("phi", self.phi),
        ] {
            if !v.is_finite() {
                return Err(Error::param(name, format!("must be finite, got {v}")));
            }
        }
        if self.nbar < 0.0 {
            return Err(Error::param("nbar", format!("must be >= 0, got {}", self.nbar)));
        }
        if self.r < 0.0 {
            return Err(Error::param("r", format!("must be >= 0, got {}", self.r)));
        }
        Ok(())
    }

    /// Validates, folds φ into `[0, π)` and pins φ = 0 for unsqueezed states.
    pub fn normalized(self) -> Result<Self> {
        self.validate()?;
        let phi = if self.r < SQUEEZING_EPS {
            0.0
        } else {
            normalize_angle(self.phi)
        };
        Ok(GaussianParams { phi, ..self })
    }

    pub fn purity(&self) -> Result<f64> {
        purity_from_nbar(self.nbar)
    }

    pub fn to_state(&self) -> Result<GaussianState> {
        Ok(GaussianState {
            mean: PhasePoint::new(self.x0, self.p0),
            cov: cov_from_params(self)?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhasePoint {
    pub x: f64,
    pub p: f64,
}

impl PhasePoint {
    pub const fn new(x: f64, p: f64) -> Self {
        PhasePoint { x, p }
    }
}

/// A real symmetric 2×2 matrix `[[xx, xp], [xp, pp]]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sym2 {
    pub xx: f64,
    pub pp: f64,
    pub xp: f64,
}

impl Sym2 {
    pub const IDENTITY: Sym2 = Sym2::new(1.0, 1.0, 0.0);
    /// `diag(1, −1)`
    pub const A: Sym2 = Sym2::new(1.0, -1.0, 0.0);
    /// `[[0, 1], [1, 0]]`
    pub const B: Sym2 = Sym2::new(0.0, 0.0, 1.0);

    pub const fn new(xx: f64, pp: f64, xp: f64) -> Self {
        Sym2 { xx, pp, xp }
    }

    /// Kahan's fma form, accurate even when `xx·pp ≈ xp²`.
    pub fn det(&self) -> f64 {
        let w = self.xp * self.xp;
        let e = self.xp.mul_add(self.xp, -w);
        self.xx.mul_add(self.pp, -w) - e
    }

    pub fn trace(&self) -> f64 {
        self.xx + self.pp
    }

    pub fn scale(&self, k: f64) -> Sym2 {
        Sym2::new(self.xx * k, self.pp * k, self.xp * k)
    }

    pub fn add(&self, o: &Sym2) -> Sym2 {
        Sym2::new(self.xx + o.xx, self.pp + o.pp, self.xp + o.xp)
    }

    pub fn inverse(&self) -> Result<Sym2> {
        let det = self.det();
        if !(det.abs() > f64::EPSILON * self.xx.abs().max(self.pp.abs()).max(1.0)) {
            return Err(Error::Singular { det });
        }
        Ok(Sym2::new(self.pp / det, self.xx / det, -self.xp / det))
    }

    /// `u·M·uᵀ` for a row vector `u = (x, p)`.
    pub fn quad_form(&self, x: f64, p: f64) -> f64 {
        self.xx * x * x + 2.0 * self.xp * x * p + self.pp * p * p
    }

    /// `(M·v)` for a column vector `v = (x, p)`.
    pub fn apply(&self, x: f64, p: f64) -> (f64, f64) {
        (self.xx * x + self.xp * p, self.xp * x + self.pp * p)
    }

    /// `Tr[self · o]`
    pub fn trace_product(&self, o: &Sym2) -> f64 {
        self.xx * o.xx + self.pp * o.pp + 2.0 * self.xp * o.xp
    }

    /// Eigenvalues (descending) and the rotation angle of the leading eigenvector.
    pub fn eigen(&self) -> (f64, f64, f64) {
        let mean = 0.5 * (self.xx + self.pp);
        let half_diff = 0.5 * (self.xx - self.pp);
        let rad = half_diff.hypot(self.xp);
        let angle = 0.5 * (2.0 * self.xp).atan2(self.xx - self.pp);
        (mean + rad, mean - rad, angle)
    }
}

/// Covariance matrix of a single mode. Always satisfies `det σ ≥ 1/4` up to
/// [`PHYSICALITY_TOL`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CovMatrix {
    sxx: f64,
    spp: f64,
    sxp: f64,
}

impl CovMatrix {
    pub fn new(sxx: f64, spp: f64, sxp: f64) -> Result<Self> {
        if !(sxx.is_finite() && spp.is_finite() && sxp.is_finite()) {
            return Err(Error::param("cov", "entries must be finite"));
        }
        let det = sxx * spp - sxp * sxp;
        if sxx <= 0.0 || spp <= 0.0 || det < 0.25 * (1.0 - PHYSICALITY_TOL) {
            return Err(Error::NonPhysical { det });
        }
        Ok(CovMatrix { sxx, spp, sxp })
    }

    pub fn vacuum() -> Self {
        CovMatrix {
            sxx: 0.5,
            spp: 0.5,
            sxp: 0.0,
        }
    }

    pub fn from_sym(m: &Sym2) -> Result<Self> {
        Self::new(m.xx, m.pp, m.xp)
    }

    pub fn sxx(&self) -> f64 {
        self.sxx
    }

    pub fn spp(&self) -> f64 {
        self.spp
    }

    pub fn sxp(&self) -> f64 {
        self.sxp
    }

    pub fn as_sym(&self) -> Sym2 {
        Sym2::new(self.sxx, self.spp, self.sxp)
    }

    pub fn det(&self) -> f64 {
        self.as_sym().det()
    }

    pub fn trace(&self) -> f64 {
        self.sxx + self.spp
    }

    pub fn purity(&self) -> f64 {
        purity(self)
    }

    /// Variance of the rotated quadrature `x_θ = x cos θ + p sin θ`.
    pub fn quadrature_variance(&self, theta: f64) -> f64 {
        let (s, c) = theta.sin_cos();
        self.as_sym().quad_form(c, s)
    }
}

impl<'de> Deserialize<'de> for CovMatrix {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let m = Sym2Record::deserialize(d)?;
        CovMatrix::new(m.sxx, m.spp, m.sxp).map_err(serde::de::Error::custom)
    }
}

#[derive(Deserialize)]
struct Sym2Record {
    sxx: f64,
    spp: f64,
    sxp: f64,
}

/// First moments plus covariance. Serialized flat as `{x0, p0, sxx, spp, sxp}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(into = "StateRecord", try_from = "StateRecord")]
pub struct GaussianState {
    pub mean: PhasePoint,
    pub cov: CovMatrix,
}

#[derive(Serialize, Deserialize)]
struct StateRecord {
    x0: f64,
    p0: f64,
    sxx: f64,
    spp: f64,
    sxp: f64,
}

impl From<GaussianState> for StateRecord {
    fn from(s: GaussianState) -> Self {
        StateRecord {
            x0: s.mean.x,
            p0: s.mean.p,
            sxx: s.cov.sxx,
            spp: s.cov.spp,
            sxp: s.cov.sxp,
        }
    }
}

impl TryFrom<StateRecord> for GaussianState {
    type Error = Error;

    fn try_from(r: StateRecord) -> Result<Self> {
        Ok(GaussianState {
            mean: PhasePoint::new(r.x0, r.p0),
            cov: CovMatrix::new(r.sxx, r.spp, r.sxp)?,
        })
    }
}

impl GaussianState {
    pub fn new(mean: PhasePoint, cov: CovMatrix) -> Self {
        GaussianState { mean, cov }
    }

    pub fn vacuum() -> Self {
        GaussianState {
            mean: PhasePoint::new(0.0, 0.0),
            cov: CovMatrix::vacuum(),
        }
    }

    pub fn purity(&self) -> f64 {
        purity(&self.cov)
    }

    pub fn params(&self) -> Result<GaussianParams> {
        params_from_cov(self)
    }
}

pub fn cov_from_params(params: &GaussianParams) -> Result<CovMatrix> {
    params.validate()?;
    let scale = 0.5 * (2.0 * params.nbar + 1.0);
    let (sq, anti) = ((-2.0 * params.r).exp(), (2.0 * params.r).exp());
    let (s, c) = params.phi.sin_cos();
    // cosh 2r ∓ sinh 2r cos 2φ as sums of positive terms, so the squeezed
    // variance keeps full relative precision.
    Ok(CovMatrix {
        sxx: scale * (sq * c * c + anti * s * s),
        spp: scale * (sq * s * s + anti * c * c),
        sxp: scale * (2.0 * params.r).sinh() * (2.0 * params.phi).sin(),
    })
}

/// Inverts [`cov_from_params`]: `2n̄+1 = 2√det σ`, then `sinh 2r` and `2φ` from
/// the pair `(σ_pp − σ_xx, 2σ_xp)`.
pub fn params_from_cov(state: &GaussianState) -> Result<GaussianParams> {
    let cov = CovMatrix::new(state.cov.sxx, state.cov.spp, state.cov.sxp)?;
    let thermal = 2.0 * cov.det().sqrt();
    let nbar = (0.5 * (thermal - 1.0)).max(0.0);
    let diff = cov.spp - cov.sxx;
    let off = 2.0 * cov.sxp;
    // sinh 2r = |(σ_pp − σ_xx, 2σ_xp)| / (2n̄+1); stays accurate as r → 0,
    // unlike inverting cosh 2r from the trace.
    let r = 0.5 * (diff.hypot(off) / thermal).asinh();
    let phi = if r < SQUEEZING_EPS {
        0.0
    } else {
        normalize_angle(0.5 * off.atan2(diff))
    };
    Ok(GaussianParams {
        x0: state.mean.x,
        p0: state.mean.p,
        nbar,
        r,
        phi,
    })
}

/// `μ = 1 / (2 √det σ)`
pub fn purity(cov: &CovMatrix) -> f64 {
    (0.5 / cov.det().sqrt()).min(1.0)
}

/// `μ = 1 / (2n̄ + 1)`
pub fn purity_from_nbar(nbar: f64) -> Result<f64> {
    if !(nbar >= 0.0) || !nbar.is_finite() {
        return Err(Error::param("nbar", format!("must be finite and >= 0, got {nbar}")));
    }
    Ok(1.0 / (2.0 * nbar + 1.0))
}

/// Linear entropy in the continuous-variable limit, `1 − μ`.
pub fn linear_entropy(mu: f64) -> Result<f64> {
    if !(mu > 0.0 && mu <= 1.0) {
        return Err(Error::param("mu", format!("must lie in (0, 1], got {mu}")));
    }
    Ok(1.0 - mu)
}

/// Gaussian Wigner function `exp(−½ X σ⁻¹ Xᵀ) / (π √det σ)`, X = (x − x₀, p − p₀).
/// Normalized to 1 over d²α with α = (x + ip)/√2, so `∬W dx dp = 2`.
pub fn wigner_eval(state: &GaussianState, pt: PhasePoint) -> f64 {
    let det = state.cov.det();
    let inv = Sym2::new(state.cov.spp / det, state.cov.sxx / det, -state.cov.sxp / det);
    let q = inv.quad_form(pt.x - state.mean.x, pt.p - state.mean.p);
    (-0.5 * q).exp() / (PI * det.sqrt())
}

/// Seralian `S_{Xσ}(γ) = X σ⁻¹ γ σ⁻¹ Xᵀ − Tr[γ σ⁻¹]` for a displaced vector X.
pub fn seralian(displacement: PhasePoint, sigma: &Sym2, gamma: &Sym2) -> Result<f64> {
    let inv = sigma.inverse()?;
    let (vx, vp) = inv.apply(displacement.x, displacement.p);
    Ok(gamma.quad_form(vx, vp) - gamma.trace_product(&inv))
}
