//! Pointwise tensor calculus for metric projective structures with Weyl
//! nullity.
//!
//! The crate computes, at sampled points of a coordinate chart, the
//! projective Weyl, Schouten and Cotton tensors of a metric, the Weyl
//! nullity space with its scalar `B` and fundamental invariant `phi`,
//! tractor connections and their splitting operators, the metrisability
//! prolongation systems, Gallot-Obata-Tanno operators, and Killing
//! integrals of warped products. Everything is certified by residuals:
//! each identity is evaluated numerically and the maximum componentwise
//! deviation is reported against a tolerance.
//!
//! Organization:
//! - [`expr`] / [`parse`]: symbolic scalar expressions, exact derivatives.
//! - [`chart`] / [`catalog`]: charts, metric specifications, builtin metrics.
//! - [`tensor`]: dense tensors, symbolic fields, covariant derivatives.
//! - [`curvature`]: the full curvature pack at a point.
//! - [`nullity`]: Weyl nullity space, `B`, `phi`, `Z`.
//! - [`projective`]: two-metric projective change machinery.
//! - [`tractor`]: tractor connections, splittings, loop holonomy.
//! - [`metrisability`]: the metrisability equation and its prolongations.
//! - [`got`]: Gallot-Obata-Tanno and Obata equations, `E`/`S` operators.
//! - [`flows`]: geodesics and parallel transport.
//! - [`suite`] / [`io`]: check registry, reports, metric files.

pub mod catalog;
pub mod chart;
pub mod curvature;
pub mod expr;
pub mod flows;
pub mod got;
pub mod io;
pub mod metrisability;
pub mod nullity;
pub mod parse;
pub mod projective;
pub mod suite;
pub mod tensor;
pub mod tractor;

use thiserror::Error as ThisError;

/// Unified error type for the whole crate.
#[derive(Debug, ThisError)]
pub enum Error {
    #[error("unbound symbol `{0}`")]
    UnboundSymbol(String),
    #[error("domain error in `{op}` at value {value}")]
    Domain { op: &'static str, value: f64 },
    #[error("parse error at {line}:{col}: {message}")]
    Parse {
        line: usize,
        col: usize,
        message: String,
    },
    #[error("schema error at {pointer}: {message}")]
    Schema { pointer: String, message: String },
    #[error("degenerate metric: |det g| = {det:.3e} at {point:?}")]
    DegenerateMetric { point: Vec<f64>, det: f64 },
    #[error("dimension {0} too small for this operation")]
    DimensionTooSmall(usize),
    #[error("valence mismatch: {0}")]
    ValenceMismatch(String),
    #[error("nullity data required but not supplied")]
    MissingNullity,
    #[error("nullity kernel is empty")]
    EmptyKernel,
    #[error("metrics are not projectively equivalent (residual {0:.3e})")]
    NotEquivalent(f64),
    #[error("nullity kernel is empty at this point")]
    NoNullity,
    #[error("field does not solve the metrisability equation (residual {0:.3e})")]
    NotASolution(f64),
    #[error("unknown catalog entry `{0}`")]
    UnknownEntry(String),
    #[error("bad catalog parameters: {0}")]
    BadParams(String),
    #[error("unknown check `{0}`")]
    UnknownCheck(String),
    #[error("curve left the sampling box at parameter {0}")]
    LeftDomain(f64),
    #[error("integration unstable: {0}")]
    StepUnstable(String),
    #[error("holonomy integration failed: {0}")]
    IntegrationFailure(String),
    #[error("unsupported bundle/connection combination: {0}")]
    UnsupportedCombination(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
