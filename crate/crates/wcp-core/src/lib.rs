//! Numerical toolkit for the Webster curvature prescription problem on the
//! standard CR sphere.
//!
//! The crate computes the topological degree of the curvature prescription
//! map from a candidate curvature polynomial `K`, and validates the
//! supporting calculus at desk scale: exact Heisenberg group arithmetic,
//! Jerison-Lee bubbles and their integrals, the Green function of the
//! conformal sublaplacian on `S^3` with its constant term `A_p`, critical
//! point analysis of `K`, the interaction matrix `M(S)` and its least
//! eigenvalue, the reduced variational energy in the concentration
//! parameters, and a hypoelliptic finite-difference solver for the
//! subcritical equation with blow-up diagnostics.

pub mod brouwer;
pub mod bubble;
pub mod cli;
pub mod error;
pub mod fd;
pub mod heisenberg;
pub mod interaction;
pub mod jet;
pub mod linalg;
pub mod morse;
pub mod reduction;
pub mod report;
pub mod rng;
pub mod sphere;

pub use error::{Error, Result};
