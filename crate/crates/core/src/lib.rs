//! Null controllability of the structurally damped wave equation
//! `y_tt - y_txx + y_xxx = b(x + t) h(t)` on the circle.
//!
//! Work happens in the moving frame `v(x, t) = y(x + t, t)` where the control
//! profile is fixed and every Fourier mode is a scalar second order ODE.

pub mod biorthogonal;
pub mod error;
pub mod moments;
pub mod quadrature;
pub mod solver;
pub mod spectrum;
pub mod synthesis;

pub use error::{Error, Result};
pub use solver::{FourierState, SampledControl};
pub use spectrum::{Branch, EigenvalueTable, SpectralClass};
