//! Algebraic Bethe ansatz machinery for the open Temperley-Lieb spin-1 chain.
//!
//! Every operator of the model is built explicitly on the `3^N`-dimensional
//! quantum space: the Temperley-Lieb generator and Hamiltonian, the
//! Baxterized R-matrix, single- and double-row monodromies, and the transfer
//! matrix. On top of that the crate evaluates the scalar coefficient
//! functions of the Bethe ansatz, builds Bethe vectors, solves the Bethe
//! equations and evaluates the determinant scalar-product formula. Most
//! public functions return residuals so that algebraic identities can be
//! certified numerically.
//!
//! The crate is `no_std` and only needs `alloc`. IO, serialization and the
//! command-line driver live in the `tl-bethe` crate.
//!
//! Conventions: the local basis is ordered so that index 0 is the reference
//! (highest-weight) state, tensor factors are ordered with site 1 slowest,
//! and all residuals are relative, `‖lhs − rhs‖ / max(‖lhs‖, ‖rhs‖, 1)`.

#![no_std]

extern crate alloc;

pub mod bethe;
pub mod coefficients;
pub mod error;
pub mod lax;
pub mod linalg;
pub mod model;
pub mod monodromy;
pub mod operator;
pub mod residual;
pub mod sampling;
pub mod scalar_product;

pub use num_complex::Complex64 as C64;

pub use bethe::{BetheSolution, RapiditySet, SeedOutcome, Side, SolveReport};
pub use coefficients::CoefficientContext;
pub use error::{Error, Result};
pub use model::{Branch, ModelParams};
pub use monodromy::{DoubleRowBlocks, OperatorValuedMatrix};
pub use operator::{QOperator, StateVector};

/// Shorthand for a complex number from real and imaginary parts.
#[inline]
pub fn c64(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}
