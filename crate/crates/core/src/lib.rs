//! Numerical core for the long-range transverse-field Ising chain
//!
//! ```text
//! H = -Σ_{i<j} J_ij σˣ_i σˣ_j - g Σ_i σᶻ_i
//! ```
//!
//! with Kac-normalized exponentially decaying couplings, plus the machinery
//! needed to probe its finite-energy phase diagram: product-state quenches,
//! exact ensembles, classical Wolff Monte Carlo at `g = 0`, and Binder-cumulant
//! finite-size analysis.
//!
//! The crate is `no_std` (it needs `alloc`). Enable the `std` feature to
//! switch the dense eigensolver onto its faster std-only kernels.

#![cfg_attr(not(any(feature = "std", test)), no_std)]

extern crate alloc;

pub mod analysis;
pub mod basis;
pub mod dynamics;
pub mod ensembles;
pub mod error;
pub mod ionchain;
mod linalg;
pub mod model;
pub mod montecarlo;
pub mod observables;
pub mod rng;

pub use error::{Error, Result};
pub use model::{CouplingMatrix, ModelSpec, ProductState, Provenance};
