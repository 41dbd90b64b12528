//! Numerical laboratory for Ingham–Beurling type estimates with vector
//! coefficients.
//!
//! The crate builds finite windows of real exponent families, attaches unit
//! direction vectors in a `d`-dimensional complex space, and measures how the
//! resulting exponential (or divided-difference) systems behave on a bounded
//! interval: Gram matrices, their extreme eigenvalues as truncation grows,
//! projections onto Fourier grids, and the trace bookkeeping that links the
//! exponent count to the interval length.
//!
//! Modules:
//!
//! - [`exponents`]: families, gap conditions, chains, counting function and
//!   upper-density estimation, sharpness partitions.
//! - [`basisfuncs`]: vector exponentials, coefficient sums, divided
//!   differences of `ω ↦ e^{iωt}` and their derivative bounds.
//! - [`gram`]: inner products on the interval, Gram assembly, Fourier grids,
//!   dual families and orthogonal projections.
//! - [`analysis`]: spectral estimates and the experiment drivers.
//! - [`quadrature`]: Gauss–Legendre rules used throughout.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod basisfuncs;
mod error;
pub mod exponents;
pub mod gram;
pub mod quadrature;

pub use error::{Error, Result};

pub use analysis::{
    extreme_eigenvalues, ExtremeEigen, FrameBoundReport, SweepResult, TraceExperiment, Verdict,
};
pub use basisfuncs::{CoefficientVector, DirectionAssignment, DirectionsRule, DividedDifferenceBasis};
pub use exponents::{
    ChainDecomposition, DensityEstimate, ExponentFamily, FamilySpec, GapReport, Partition,
};
pub use gram::{FourierGrid, GramMatrix, IntervalSpec};

/// Complex scalar used everywhere in the crate.
pub type C64 = nalgebra::Complex<f64>;

/// Dense complex matrix.
pub type CMatrix = nalgebra::DMatrix<C64>;

/// `max_ij |m_ij|`.
pub fn max_entry_modulus(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}
