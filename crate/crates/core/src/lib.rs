//! Moment propagation for discrete-time stochastic polynomial systems.
//!
//! The library follows an offline/online split. Offline, the expected
//! one-step update of all monomials of the state up to a truncation degree
//! is assembled into a sparse linear propagator, together with sparse
//! expansions of the truncation error in terms of the initial moments.
//! Online, moments are propagated by repeated sparse matrix-vector
//! products, error certificates are evaluated from the stored expansions,
//! and probabilistic ellipsoidal safety regions are produced from the
//! approximate first and second moments and their certificates.
//!
//! Modules map onto the pipeline stages:
//!
//! - [`kron`] — multi-index algebra for full and reduced Kronecker powers,
//!   plus the sparse matrix primitives everything else is built on.
//! - [`model`] — declaration of stochastic polynomial systems: noise
//!   symbols with distributions, coefficient matrices with polynomial
//!   entries, and initial-state moment providers.
//! - [`carleman`] — assembly of the expected update blocks, the truncated
//!   propagator, moment propagation, and the exact-moment chain.
//! - [`errbound`] — truncation-error expansions and guaranteed
//!   per-coordinate error certificates.
//! - [`safety`] — tail-probability bounds and max-det ellipsoidal safety
//!   regions.
//! - [`oracle`] — independent ground-truth engines (Monte Carlo, grid
//!   search, direct small-case error expansion) used by the test suite.
//!
//! All numeric kernels are generic over the scalar type through
//! [`scalar::Scalar`]; `f64` aliases are exported at the crate root.

// `!(a < b)` rejects NaN parameters where `a >= b` would accept them;
// the negated comparisons in validation code are deliberate.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod carleman;
pub mod errbound;
pub mod error;
pub mod kron;
pub mod linalg;
pub mod model;
pub mod oracle;
pub mod safety;
pub mod scalar;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// `f64` is the working precision for the CLI and the acceptance suite.
pub type SparseMatrixF64 = kron::SparseMatrix<f64>;
pub type SystemSpecF64 = model::SystemSpec<f64>;
pub type PropagatorF64 = carleman::TruncatedPropagator<f64>;
pub type MomentStateF64 = carleman::MomentState<f64>;
pub type ErrorExpansionF64 = errbound::ErrorExpansion<f64>;
pub type ErrorCertificateF64 = errbound::ErrorCertificate<f64>;
pub type SafetyEllipsoidF64 = safety::SafetyEllipsoid<f64>;
