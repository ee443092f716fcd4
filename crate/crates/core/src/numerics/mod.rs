//! Periodic grids, spectral calculus, quadrature, root finding and
//! parameter-space differences.

pub mod fd;
pub mod grid;
pub mod quad;
pub mod roots;
pub mod spectral;

pub use fd::{parameter_derivative, Which};
pub use grid::{Field, Grid};
pub use quad::{improper_integral, QuadratureResult};
pub use spectral::{h1_norm, inner, spectral_derivative};

/// Double-precision instantiations used throughout the crate.
pub type Quad = QuadratureResult<f64>;
