//! Numerical laboratory for solitary waves of the generalized derivative
//! nonlinear Schrödinger equation
//!
//! ```text
//! i u_t + u_xx + i |u|^{2σ} u_x = 0.
//! ```
//!
//! The crate builds the soliton family φ_{ω,c}, evaluates its conserved
//! quantities and the threshold z₀(σ), analyses the linearized operator,
//! integrates the PDE pseudo-spectrally and tracks the modulation and
//! virial diagnostics of perturbed solitons.

pub mod checks;
pub mod conserved;
pub mod critical;
pub mod error;
pub mod evolve;
pub mod experiment;
pub mod linop;
pub mod modulation;
pub mod numerics;
pub mod soliton;
pub mod virial;

pub use error::{Error, Result};
