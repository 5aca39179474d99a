//! Synthetic measurement records.
//!
//! Joint (heterodyne-type) measurements yield pairs distributed by the Husimi
//! Q-function, a Gaussian with covariance `σ + I/2`; the extra half unit of
//! vacuum noise is what the antinormal-ordering moment relations
//! `⟨x̂²⟩ = E_Q[x²] − ½` remove again. Homodyne records are scalar samples of
//! the rotated quadrature `x_θ = x cos θ + p sin θ`.

use std::f64::consts::FRAC_PI_2;
use std::f64::consts::FRAC_PI_4;
use std::io::{Read, Write};

use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::{GaussianState, PhasePoint};
use crate::rng::Seed;

/// The three homodyne phases used by the three-quadrature purity formula.
pub const THREE_QUADRATURE_PHASES: [f64; 3] = [0.0, FRAC_PI_4, FRAC_PI_2];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QSampleBatch {
    pairs: Vec<PhasePoint>,
}

impl QSampleBatch {
    pub fn new(pairs: Vec<PhasePoint>) -> Result<Self> {
        if pairs.is_empty() {
            return Err(Error::InsufficientData { required: 1, got: 0 });
        }
        Ok(QSampleBatch { pairs })
    }

    pub fn pairs(&self) -> &[PhasePoint] {
        &self.pairs
    }

    pub fn n(&self) -> usize {
        self.pairs.len()
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["x", "p"])?;
        for pt in &self.pairs {
            wtr.serialize((pt.x, pt.p))?;
        }
        wtr.flush().map_err(csv::Error::from)?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(r);
        expect_header(&mut rdr, &["x", "p"])?;
        let pairs = rdr
            .deserialize::<(f64, f64)>()
            .map(|row| row.map(|(x, p)| PhasePoint::new(x, p)))
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(pairs)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HomodyneBatch {
    theta: f64,
    values: Vec<f64>,
}

impl HomodyneBatch {
    pub fn new(theta: f64, values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::InsufficientData {
                required: 2,
                got: values.len(),
            });
        }
        if !theta.is_finite() {
            return Err(Error::param("theta", "must be finite"));
        }
        Ok(HomodyneBatch { theta, values })
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn n(&self) -> usize {
        self.values.len()
    }
}

/// Writes batches as rows of `theta,value`.
pub fn write_homodyne_csv<W: Write>(batches: &[HomodyneBatch], w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["theta", "value"])?;
    for b in batches {
        for &v in &b.values {
            wtr.serialize((b.theta, v))?;
        }
    }
    wtr.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// Reads `theta,value` rows, grouping by θ in order of first appearance.
pub fn read_homodyne_csv<R: Read>(r: R) -> Result<Vec<HomodyneBatch>> {
    let mut rdr = csv::Reader::from_reader(r);
    expect_header(&mut rdr, &["theta", "value"])?;
    let mut groups: Vec<(f64, Vec<f64>)> = Vec::new();
    for row in rdr.deserialize::<(f64, f64)>() {
        let (theta, value) = row?;
        match groups.iter_mut().find(|(t, _)| *t == theta) {
            Some((_, vals)) => vals.push(value),
            None => groups.push((theta, vec![value])),
        }
    }
    groups
        .into_iter()
        .map(|(theta, values)| HomodyneBatch::new(theta, values))
        .collect()
}

fn expect_header<R: Read>(rdr: &mut csv::Reader<R>, expected: &[&str]) -> Result<()> {
    let header = rdr.headers()?;
    let got: Vec<&str> = header.iter().map(str::trim).collect();
    if got != expected {
        return Err(Error::Config(format!(
            "unexpected csv header {got:?}, expected {expected:?}"
        )));
    }
    Ok(())
}

/// Draws `n` pairs from the Q-function of `state`: mean `(x₀, p₀)`, covariance
/// `σ + I/2`.
pub fn sample_q(state: &GaussianState, n: usize, seed: Seed) -> Result<QSampleBatch> {
    if n == 0 {
        return Err(Error::InsufficientData { required: 1, got: 0 });
    }
    let q = state.cov.as_sym().add(&crate::gaussian::Sym2::IDENTITY.scale(0.5));
    // Cholesky factor of σ_Q.
    let a = q.xx.sqrt();
    let b = q.xp / a;
    let c = (q.pp - b * b).sqrt();
    let mut rng = seed.rng();
    let pairs = (0..n)
        .map(|_| {
            let z1: f64 = StandardNormal.sample(&mut rng);
            let z2: f64 = StandardNormal.sample(&mut rng);
            PhasePoint::new(state.mean.x + a * z1, state.mean.p + b * z1 + c * z2)
        })
        .collect();
    Ok(QSampleBatch { pairs })
}

/// Draws `n` homodyne outcomes of `x_θ`: mean `x₀ cos θ + p₀ sin θ`, variance
/// `(cos θ, sin θ) σ (cos θ, sin θ)ᵀ`.
pub fn sample_homodyne(state: &GaussianState, theta: f64, n: usize, seed: Seed) -> Result<HomodyneBatch> {
    if n < 2 {
        return Err(Error::InsufficientData { required: 2, got: n });
    }
    if !theta.is_finite() {
        return Err(Error::param("theta", "must be finite"));
    }
    let (s, c) = theta.sin_cos();
    let mean = state.mean.x * c + state.mean.p * s;
    let sd = state.cov.quadrature_variance(theta).sqrt();
    let dist = Normal::new(mean, sd).map_err(|e| Error::param("theta", e.to_string()))?;
    let mut rng = seed.rng();
    let values = (0..n).map(|_| dist.sample(&mut rng)).collect();
    Ok(HomodyneBatch { theta, values })
}

/// Splits `n_total` detections evenly over θ = 0, π/4, π/2 (any remainder is
/// dropped), one derived stream per phase.
pub fn sample_three_quadratures(state: &GaussianState, n_total: usize, seed: Seed) -> Result<[HomodyneBatch; 3]> {
    let per = n_total / 3;
    let [t0, t45, t90] = THREE_QUADRATURE_PHASES;
    Ok([
        sample_homodyne(state, t0, per, seed.derive(0))?,
        sample_homodyne(state, t45, per, seed.derive(1))?,
        sample_homodyne(state, t90, per, seed.derive(2))?,
    ])
}
