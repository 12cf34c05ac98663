//! Numerical homotopy invariants of explicitly given smooth maps.
//!
//! The library computes mapping degrees of maps `S^3 -> S^3` by Monte-Carlo
//! integration of Jacobian determinants, Hopf invariants of maps `S^3 -> S^2`
//! by tracing preimage circles and taking exact polygonal linking numbers,
//! and `pi_3(SO_3)` / `pi_3(SO_4)` classes through the quaternionic double
//! covers and the left/right isoclinic splitting of `SO(4)`. On top of that
//! sits the chart geometry of the link of the hypersurface singularity
//! `xy - z(z + v^d) = 0`: the two-chart parametrization, its normal frame
//! fields, and the extraction of the regular-homotopy integer `d` together
//! with its mod-2 image.
//!
//! All estimators are deterministic given a 64-bit seed: sampling is split
//! into fixed-size batches, one RNG stream per batch, and batch results are
//! merged in index order regardless of thread scheduling.

pub mod curves;
pub mod diff;
mod error;
pub mod invariants;
pub mod maps;
pub mod quat;
pub mod singularity;
pub mod so4;

pub use error::{Error, Result};
pub use invariants::IntegerEstimate;
pub use quat::{PointS2, Rot3, Rot4, UnitQuaternion};
