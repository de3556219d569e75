//! Optimal and minimax-robust linear estimation for periodically correlated
//! processes.
//!
//! A process with period `T` is lifted to a `K`-component stationary vector
//! sequence (see [`lift`]). Interpolation, extrapolation and filtering are
//! then solved in the spectral domain on a uniform frequency grid
//! (see [`estimators`]), cross-checked against time-domain normal equations
//! (see [`oracle`]), and extended to least-favorable densities for several
//! uncertainty classes (see [`minimax`]).
//!
//! Conventions used throughout:
//!
//! * a density is `f(λ) = Σ_m F(m) e^{imλ}` and the covariance of the lifted
//!   sequence is `R(j) = E ζ_{l+j} ζ_l^* = F(-j)`;
//! * grid nodes are `λ_g = -π + 2πg/G`;
//! * a spectral characteristic `h(λ) = Σ_j h_j e^{ijλ}` produces the estimate
//!   `Σ_j h_j^T y_j` from observations `y_j`.

// `!(x > 0.0)` is used on purpose so that NaN inputs are rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod estimators;
pub mod factorization;
pub mod io;
pub mod lift;
pub mod linalg;
pub mod minimax;
pub mod oracle;
pub mod spectral;

pub use error::{Error, Result};
pub use estimators::{EstimateSolution, SolveDiagnostics, Truncation};
pub use factorization::Factorization;
pub use lift::{FunctionalWeights, Horizon, LiftConfig};
pub use spectral::{GridMatrixFunction, LagTable, SpectralDensity};

/// Complex scalar used for every matrix entry.
pub type C64 = num_complex::Complex64;
/// Dense complex matrix.
pub type CMat = nalgebra::DMatrix<C64>;
/// Dense complex column vector.
pub type CVec = nalgebra::DVector<C64>;
