//! Least-favorable densities and minimax-robust characteristics for the
//! uncertainty classes `Y`, `D_M^-`, `D_0^1` and `D_0^2 × D_ε`, with
//! saddle-point certification by sampling.

mod class_y;
mod d01;
mod dm;
mod filtering;
mod q_operator;
mod saddle;
mod samplers;

pub use class_y::least_favorable_class_y;
pub use d01::least_favorable_d01_extrapolation;
pub use dm::least_favorable_dm_interpolation;
pub use filtering::{
    filtering_relation_residuals, least_favorable_d0eps_filtering_scalar, FilterMinimaxOptions,
    RelationReport,
};
pub use q_operator::{build_q_operator, QOperator};
pub use saddle::{saddle_point_check, ClassConstraint, MarginReport};
pub use samplers::{sample_d01_class, sample_d0eps_class, sample_power_class};

use crate::estimators::EstimateSolution;
use crate::factorization::Factorization;
use crate::spectral::{GridMatrixFunction, SpectralDensity};
use crate::CVec;

/// Quantities that certify a least-favorable solution.
#[derive(Debug, Clone, PartialEq)]
pub enum Certificate {
    /// Top eigenpair of the weight operator.
    Eigenpair {
        nu2: f64,
        eigenvector: CVec,
        /// `‖Q̄ d - ν² d‖` for the scaled eigenvector.
        eigen_residual: f64,
        /// `‖Σ_u d(u) d(u)^* - P‖_F` when a matrix power is prescribed.
        matrix_constraint_residual: Option<f64>,
    },
    /// Autoregressive solution of the moment class.
    Moments {
        alpha: Vec<CVec>,
        /// Largest deviation of the inverse-density coefficients from `P(m)`.
        constraint_residual: f64,
        /// `‖B^0 α - a‖_max`.
        system_residual: f64,
        /// Constraint coefficients after any extension beyond `M`.
        constraints: Vec<crate::CMat>,
    },
    /// Lagrange data of the filtering relations.
    Lagrange {
        alpha2: f64,
        beta2: f64,
        phi: Vec<f64>,
        relations: RelationReport,
        iterations: usize,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct LeastFavorableResult {
    pub f0: SpectralDensity,
    pub f0_grid: GridMatrixFunction,
    pub g0: Option<SpectralDensity>,
    pub g0_grid: Option<GridMatrixFunction>,
    /// Moving-average factor of `f0` (classes `Y`, `D_0^1`) or of the
    /// constraint polynomial `f0^{-1}` (class `D_M^-`).
    pub factor: Option<Factorization>,
    pub certificate: Certificate,
    pub minimax_mse: f64,
    pub h0: EstimateSolution,
    /// False when an iterative construction stopped before its residuals met
    /// the tolerance.
    pub certified: bool,
}
