//! Calibration and simulation of the Bass local volatility model.
//!
//! The driving law `α` of a stretched Brownian motion between two marginals
//! `μ ⪯_c ν` is the fixed point of `F ↦ F_μ ∘ (φ ∗ (Q_ν ∘ (φ ∗ F)))`. This
//! crate computes it by plain iteration on quantile functions or by Newton's
//! method on the semidiscrete system, builds the transport maps `f_t`,
//! simulates paths across several maturities, and reads marginals from
//! option quotes.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bass_model;
pub mod error;
pub mod fixedpoint;
pub mod gauss_kernel;
pub mod market_io;
pub mod measures;
pub mod problems;
pub mod semidiscrete;

pub use error::{Error, Result};
pub use fixedpoint::{
    contraction_bound, DerivativeDensity, FixedPointProblem, IterationRecord, IterationTrace,
    SolverConfig,
};
pub use gauss_kernel::{phi_convolve_cdf, HeatKernel, KernelConfig, SMap};
pub use measures::{
    AnalyticDistribution, DiscreteMeasure, Interpolation, Measure, QuantileGrid, StepQuantile,
};
