//! Desk-scale computations on the space of unimodular lattices:
//! shortest-vector functions, diagonal flows on sheared integer lattices,
//! the (C, alpha)-good function calculus, marking procedures on the poset
//! of primitive subgroups, and multiplicative Diophantine exponent scans,
//! together with a seeded, reproducible batch experiment runner.

// Validation sites use `!(x > 0.0)` so that NaN inputs are rejected along
// with nonpositive ones.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dioph;
pub mod experiment;
pub mod exterior;
pub mod goodfun;
pub mod intmat;
pub mod lattice;
pub mod linalg;
pub mod marking;
pub mod nondivergence;
pub mod scalar;
pub mod stats;

pub use scalar::{Real, Scalar};

/// Concrete aliases used throughout the experiment paths.
pub type MatF = linalg::Mat<f64>;
pub type MatZ = linalg::Mat<i128>;
pub type MultiVectorF = exterior::MultiVector<f64>;
pub type MultiVectorZ = exterior::MultiVector<i128>;
pub type LatticeF = lattice::Lattice<f64>;
pub type FlowVectorF = lattice::FlowVector<f64>;
