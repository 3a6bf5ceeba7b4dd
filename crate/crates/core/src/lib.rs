//! Semidiscrete optimal transport from an absolutely continuous reference
//! measure onto a finitely supported target, with the inference pipeline for
//! the empirical transport map: dual potentials, Laguerre geometry,
//! directional derivatives of the map's error and linear functionals, limit
//! laws, bootstrap and confidence sets.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod field;
pub mod geometry;
pub mod measure;
pub mod quadrature;
pub mod dual;
pub mod functionals;
pub mod inference;

pub use error::{Error, Result};
pub use field::VectorField;
pub use geometry::{LaguerreDiagram, SiteSet, SupportRegion};
pub use measure::{ReferenceMeasure, MonteCarloConfig};
