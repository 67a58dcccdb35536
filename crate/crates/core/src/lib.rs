//! Hamilton–Jacobi analysis of singular Lagrangians.
//!
//! The pipeline runs [`model`] → [`legendre`] → [`chain`], then hands the
//! result to the numeric modules: [`dynamics`] integrates the total
//! differential equations, [`quantize`] and [`pathint`] perform desk-scale
//! operator and path-integral quantization checks.

pub mod expr;
pub mod model;
pub mod legendre;
pub mod chain;
pub mod dynamics;
pub mod quantize;
pub mod pathint;
pub mod cli;
