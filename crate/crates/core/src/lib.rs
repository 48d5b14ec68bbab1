//! Confidence-region entanglement verification.
//!
//! Given measurement counts on a finite-dimensional system and an
//! entanglement witness, the pipeline computes how confidently the data
//! place the prepared state inside the set of witness-detected states:
//!
//! * [`qstate`]: density matrices, Bloch coordinates, fidelity and
//!   Hilbert-Schmidt sampling/volumes.
//! * [`witness`]: linear and accessible nonlinear witnesses and the
//!   fidelity program that decides membership in the shrunken core `Γ_W`.
//! * [`likelihood`]: count data, log-likelihoods and convex maximization.
//! * [`regions`]: the enlargement parameter, integration rectangles,
//!   Monte Carlo normalization and the confidence solve.
//! * [`anneal`]: simulated annealing over black-box regions.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod anneal;
pub mod error;
pub mod likelihood;
pub mod linalg;
pub mod qstate;
pub mod regions;
pub mod rng;
pub mod witness;

pub use error::{Error, Result};
pub use qstate::DensityMatrix;
