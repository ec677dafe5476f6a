//! Hyperspherical diffusion with von Mises-Fisher noise.
//!
//! States live on the unit sphere S^{d-1}. The forward process corrupts a
//! direction by angular interpolation or vMF stepping, the reverse process
//! follows a score toward class hypercones, and [`metrics`] scores the
//! result by how samples populate those cones.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baseline;
pub mod bessel;
pub mod bounds;
pub mod error;
pub mod forward;
pub mod metrics;
pub mod reverse;
pub mod schedule;
pub mod score;
pub mod sphere;
pub mod vmf;

pub use error::{Error, Result};
pub use sphere::{Hypercone, UnitVector};
pub use vmf::{TruncatedVmf, VmfMixture, VmfParams};
