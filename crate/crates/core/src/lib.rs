//! Monte Carlo estimation of the effective degrees of freedom of fitting
//! procedures.
//!
//! A fitting procedure's DF is (1/sigma^2) sum_i Cov(y_i, y_hat_i) under
//! y = mu + sigma * eps. This crate provides:
//!
//! - deterministic fitters (OLS, ridge, best subset, forward stepwise,
//!   keep-the-largest-coordinates, nearest point of a finite set) behind
//!   one interface ([`fitters`]);
//! - an unbiased Monte Carlo engine with per-replicate RNG streams, so
//!   estimates are bit-identical for a given seed at any worker count
//!   ([`mc`]);
//! - exact references: hat-matrix traces, Gauss-Hermite quadrature for
//!   n <= 3, and closed forms ([`oracles`]);
//! - experiment drivers sweeping mean location, subset size, diagonal
//!   scale and noise level ([`experiments`]);
//! - a CLI with CSV/JSON tables and an SVG heatmap renderer ([`cli`],
//!   [`output`]).
//!
//! The headline phenomena these tools expose: DF is not monotone in the
//! usual complexity parameters, can exceed both p and n, grows linearly
//! with the mean's diagonal distance in the two-coordinate selection
//! example, and diverges like 1/sigma for projections onto non-convex
//! sets.

pub mod cli;
pub mod error;
pub mod experiments;
pub mod fitters;
pub mod linalg;
pub mod mc;
pub mod oracles;
pub mod output;

pub use error::{Error, Result};
pub use fitters::{FitResult, Fitter};
pub use linalg::{DesignMatrix, Subspace};
pub use mc::{
    draw_replicate, estimate_df, estimate_df_both, DataModel, DfEstimate, EstimatorKind,
    NoiseLaw, ReplicateDraw,
};
pub use oracles::{df_quadrature, df_scaling_limit, df_trace_linear, QuadratureEstimate};
