//! Purity of single-mode Gaussian states.
//!
//! * [`gaussian`]: covariance-matrix states, the (n̄, r, φ) parametrization,
//!   purity, Wigner function and seralian.
//! * [`quadrature`]: phase-space integration used as an independent oracle.
//! * [`sampling`]: seeded heterodyne (Husimi Q) and homodyne records.
//! * [`estimation`]: purity recovered from those records, with bootstrap
//!   confidence intervals.
//! * [`channel`]: evolution in thermal and squeezed-thermal baths, closed form
//!   and RK4.
//! * [`experiments`]: reproducible figure-style sweeps and report emission.

// `!(x > 0.0)` is used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod error;
pub mod estimation;
pub mod experiments;
pub mod gaussian;
pub mod quadrature;
pub mod rng;
pub mod sampling;

pub use channel::{BathParams, ChannelAsymptote, Trajectory};
pub use error::{Error, Result};
pub use estimation::{Method, MomentEstimate, PurityEstimate};
pub use experiments::{ExperimentConfig, ExperimentKind, ExperimentReport};
pub use gaussian::{CovMatrix, GaussianParams, GaussianState, PhasePoint, Sym2};
pub use rng::Seed;
pub use sampling::{HomodyneBatch, QSampleBatch};
