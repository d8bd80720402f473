//! Numerical laboratory for the black soliton tanh(x/sqrt2) of the defocusing
//! cubic NLS equation i psi_t + psi_xx - |psi|^2 psi = 0.
//!
//! The crate evaluates the conserved functionals (including the higher-order
//! functional S and Lambda = S - 2E), the linearized operators around the
//! soliton and their quadratic forms, the exact expansion of Lambda near the
//! soliton, the modulation decomposition, and a conservative time stepper.

pub mod evolution;
pub mod expansion;
pub mod functionals;
pub mod grid;
pub mod linalg;
pub mod modulation;
pub mod operators;
pub mod profiles;
pub mod sampling;

pub use grid::{ComplexField, Deriv, FdOrder, Field, Grid, GridError, RealField};
pub use num_complex::Complex64;
