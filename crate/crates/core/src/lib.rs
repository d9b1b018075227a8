//! Simulation and verification of the spinor flow with flux on flat periodic tori.
//!
//! The evolving data is a metric `g`, a `g`-orthonormal frame `E`, a spinor field `ψ`,
//! a `k`-form flux `H` and a normalization function `φ`. Everything is discretized on a
//! periodic structured grid with central differences whose discrete adjoints are exact,
//! so the integration-by-parts identities of the continuum system hold to rounding.

pub mod clifford;
pub mod config;
pub mod diagnostics;
pub mod error;
pub mod exterior;
pub mod flow;
pub mod geometry;
pub mod grid;
pub mod linalg;
pub mod multi_index;
pub mod scenario;
pub mod snapshot;
pub mod spin;
pub mod verify;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;
