//! Phase-space integration over the Gaussian's principal-axis box.
//!
//! The closed forms in [`crate::gaussian`] are authoritative; everything here
//! exists to check them independently.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::gaussian::{seralian, wigner_eval, GaussianState, PhasePoint, Sym2};

/// Largest Wigner mass allowed to fall outside the integration box.
pub const MAX_TAIL_MASS: f64 = 1e-9;

/// Composite tensor-product Gauss–Legendre rule over a box of
/// `±half_width_sd` standard deviations along each principal axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureGrid {
    pub half_width_sd: f64,
    pub order: usize,
    pub initial_panels: usize,
    pub max_panels: usize,
    pub rel_tol: f64,
}

impl Default for QuadratureGrid {
    fn default() -> Self {
        QuadratureGrid {
            half_width_sd: 8.0,
            order: 16,
            initial_panels: 4,
            max_panels: 256,
            rel_tol: 1e-8,
        }
    }
}

impl QuadratureGrid {
    /// Wigner mass outside a `±k` standard-deviation box in both principal axes.
    pub fn tail_mass(&self) -> f64 {
        let outside = erfc(self.half_width_sd / std::f64::consts::SQRT_2);
        2.0 * outside - outside * outside
    }
}

/// Gauss–Legendre nodes and weights on `[-1, 1]` by Newton iteration on `P_n`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for j in 2..=n {
                let jf = j as f64;
                let p2 = ((2.0 * jf - 1.0) * x * p1 - (jf - 1.0) * p0) / jf;
                p0 = p1;
                p1 = p2;
            }
            dp = nf * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn composite_rule(half_width: f64, panels: usize, nodes: &[f64], weights: &[f64]) -> Vec<(f64, f64)> {
    let h = 2.0 * half_width / panels as f64;
    let mut out = Vec::with_capacity(panels * nodes.len());
    for k in 0..panels {
        let mid = -half_width + (k as f64 + 0.5) * h;
        for (&t, &w) in nodes.iter().zip(weights) {
            out.push((mid + 0.5 * h * t, 0.5 * h * w));
        }
    }
    out
}

/// Integrates `f` over phase space on the box aligned with the principal axes of
/// `state`, refining by panel doubling until the change falls below
/// `rel_tol · ∬|f|`.
pub fn integrate_phase_space<F>(state: &GaussianState, grid: &QuadratureGrid, f: F) -> Result<f64>
where
    F: Fn(PhasePoint) -> f64,
{
    let tail_mass = grid.tail_mass();
    if !(tail_mass <= MAX_TAIL_MASS) {
        return Err(Error::Coverage {
            tail_mass,
            limit: MAX_TAIL_MASS,
        });
    }
    if grid.order == 0 || grid.initial_panels == 0 {
        return Err(Error::param("grid", "order and initial_panels must be positive"));
    }
    let (l1, l2, angle) = state.cov.as_sym().eigen();
    let (sin, cos) = angle.sin_cos();
    let (w1, w2) = (grid.half_width_sd * l1.sqrt(), grid.half_width_sd * l2.sqrt());
    let (nodes, weights) = gauss_legendre(grid.order);

    let eval = |panels: usize| {
        let (mut total, mut abs_total) = (0.0, 0.0);
        let ru = composite_rule(w1, panels, &nodes, &weights);
        let rv = composite_rule(w2, panels, &nodes, &weights);
        for &(u, wu) in &ru {
            for &(v, wv) in &rv {
                let pt = PhasePoint::new(state.mean.x + cos * u - sin * v, state.mean.p + sin * u + cos * v);
                let val = f(pt) * wu * wv;
                total += val;
                abs_total += val.abs();
            }
        }
        (total, abs_total)
    };

    let mut panels = grid.initial_panels;
    let (mut prev, _) = eval(panels);
    while panels * 2 <= grid.max_panels {
        panels *= 2;
        let (cur, scale) = eval(panels);
        if (cur - prev).abs() <= grid.rel_tol * scale {
            return Ok(cur);
        }
        prev = cur;
    }
    Err(Error::QuadratureDiverged { panels })
}

/// `(π/2) ∬ W² dx dp`, an independent route to the purity.
pub fn purity_by_phase_space_integral(state: &GaussianState, grid: &QuadratureGrid) -> Result<f64> {
    let integral = integrate_phase_space(state, grid, |pt| {
        let w = wigner_eval(state, pt);
        w * w
    })?;
    Ok(0.5 * PI * integral)
}

/// `∬ S_{Xσ}(γ) W dx dp`; vanishes for every symmetric γ.
pub fn seralian_weighted_integral(state: &GaussianState, gamma: &Sym2, grid: &QuadratureGrid) -> Result<f64> {
    let sigma = state.cov.as_sym();
    // Surface the singular-matrix error before integrating.
    sigma.inverse()?;
    integrate_phase_space(state, grid, |pt| {
        let x = PhasePoint::new(pt.x - state.mean.x, pt.p - state.mean.p);
        seralian(x, &sigma, gamma).unwrap_or(f64::NAN) * wigner_eval(state, pt)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian::GaussianParams;

    #[test]
    fn legendre_rule_integrates_polynomials_exactly() {
        let (x, w) = gauss_legendre(5);
        let sum_w: f64 = w.iter().sum();
        assert!((sum_w - 2.0).abs() < 1e-14);
        // Degree 9 is the highest exact degree for five nodes.
        let i9: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(8)).sum();
        assert!((i9 - 2.0 / 9.0).abs() < 1e-14);
        let (x1, w1) = gauss_legendre(1);
        assert_eq!((x1[0], w1[0]), (0.0, 2.0));
    }

    #[test]
    fn purity_integral_examples() {
        let grid = QuadratureGrid::default();
        let vac = GaussianState::vacuum();
        assert!((purity_by_phase_space_integral(&vac, &grid).unwrap() - 1.0).abs() < 1e-6);
        let sq = GaussianParams::squeezed_thermal(0.5, 1.5, 0.0)
            .unwrap()
            .to_state()
            .unwrap();
        assert!((purity_by_phase_space_integral(&sq, &grid).unwrap() - 0.5).abs() < 1e-6);
        let th = GaussianParams::thermal(1.0).unwrap().to_state().unwrap();
        assert!((purity_by_phase_space_integral(&th, &grid).unwrap() - 1.0 / 3.0).abs() < 1e-6);
    }

    #[test]
    fn narrow_box_is_a_coverage_error() {
        let grid = QuadratureGrid {
            half_width_sd: 5.0,
            ..QuadratureGrid::default()
        };
        let err = purity_by_phase_space_integral(&GaussianState::vacuum(), &grid).unwrap_err();
        assert!(matches!(err, Error::Coverage { .. }));
    }

    #[test]
    fn seralian_integral_vanishes_for_basis() {
        let grid = QuadratureGrid::default();
        let s = GaussianParams::new(0.3, -0.2, 0.4, 0.9, 1.1)
            .unwrap()
            .to_state()
            .unwrap();
        for g in [Sym2::IDENTITY, Sym2::A, Sym2::B] {
            let v = seralian_weighted_integral(&s, &g, &grid).unwrap();
            assert!(v.abs() < 1e-8, "{v}");
        }
    }
}
