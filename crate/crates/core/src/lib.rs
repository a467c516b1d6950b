//! Su-Olson thermal radiative transfer with the multiplicative splitting
//! `f = B g`: a full-rank reference solver and an energy-stable,
//! mass-conservative rank-adaptive low-rank solver.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod angular;
pub mod diagnostics;
pub mod dlra;
pub mod error;
pub mod experiments;
pub mod full;
pub mod linalg;
pub mod mesh;
#[cfg(feature = "plots")]
pub mod plot;
pub mod quadrature;
pub mod verify;

pub use angular::AngularBasis;
pub use dlra::{step_dlra, LowRankState, ToleranceMode, TruncationConfig};
pub use error::{Error, Result};
pub use full::{step_full_advection, step_full_conservative, MomentField, Opacity, SolverConfig};
pub use mesh::{SpatialMesh, Stencil, StencilSet};
