//! Numerical laboratory for standing-wave instability in focusing nonlinear
//! Schrödinger equations `i u_t + Δu + g(u) = 0`.
//!
//! The crate computes ground states of `-Δφ + ωφ = g(φ)`, evaluates the
//! action `S`, the Nehari functional `I` and the virial functional `Q`,
//! scans the mass-preserving dilation `v^λ = λ^{N/2} v(λ·)`, estimates the
//! variational levels that characterize the ground state, and integrates the
//! flow from `φ^λ` to observe blow-up.

pub mod dynamics;
pub mod error;
pub mod experiment;
pub mod field;
pub mod functionals;
pub mod groundstate;
pub mod nonlinearity;
pub mod quadrature;
pub mod rescale;
pub mod variational;

pub use error::{Error, Result};
pub use field::{ComplexField, Grid, GridSpec};
pub use functionals::{evaluate, FunctionalReport};
pub use nonlinearity::{NonlinearityModel, NonlinearitySpec};
