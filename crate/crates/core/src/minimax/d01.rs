use super::class_y::{check_extrapolation, degenerate, moving_average_result};
use super::q_operator::build_q_operator;
use super::Certificate;
use super::LeastFavorableResult;
use crate::error::{Error, Result};
use crate::lift::FunctionalWeights;
use crate::linalg;
use crate::{CMat, CVec, C64};

/// Least-favorable moving average for extrapolation in the class of densities
/// with `(1/2π)∫ f dλ = P`. The eigen system `Σ_p Σ_s ā_{r+p} a_{s+p}^T d(s) =
/// ν² d(r)` is solved by the top eigenvector of the conjugated weight
/// operator, scaled so `Σ ‖d(u)‖² = Tr P`. Only the trace of the matrix
/// power constraint can be met by this one-parameter family; the residual
/// `‖Σ d d^* - P‖_F` is reported in the certificate.
pub fn least_favorable_d01_extrapolation(
    weights: &FunctionalWeights,
    power: &CMat,
    n_blocks: Option<usize>,
    grid: usize,
) -> Result<LeastFavorableResult> {
    let k = weights.dim();
    if power.shape() != (k, k) {
        return Err(Error::DimensionMismatch(format!(
            "power matrix must be {k}x{k}"
        )));
    }
    if linalg::max_abs(&(power - power.adjoint())) > 1e-12 * linalg::max_abs(power).max(1.0) {
        return Err(Error::InvalidArgument(
            "power matrix is not Hermitian".into(),
        ));
    }
    if linalg::hermitian_eigenvalues(power)[0] < -1e-12 {
        return Err(Error::InvalidArgument(
            "power matrix is not positive semidefinite".into(),
        ));
    }
    let trace = power.trace().re;
    if !(trace > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "power matrix trace must be positive, got {trace}"
        )));
    }
    check_extrapolation(weights)?;
    if weights.is_zero() {
        return degenerate(weights, power, grid);
    }
    let q = build_q_operator(weights, n_blocks);
    let q_bar = linalg::conj(&q.matrix);
    let (nu2, x) = q.top_eigenpair();
    let d_flat: CVec = x.map(|z| z.conj()) * C64::new(trace.sqrt(), 0.0);
    let eigen_residual = (&q_bar * &d_flat - &d_flat * C64::new(nu2, 0.0)).norm();
    let d: Vec<CMat> = (0..q.n_blocks)
        .map(|p| CMat::from_fn(k, 1, |r, _| d_flat[p * k + r]))
        .collect();
    let mut gram = CMat::zeros(k, k);
    for c in &d {
        gram += c * c.adjoint();
    }
    let matrix_residual = (gram - power).norm();
    moving_average_result(
        weights,
        d,
        grid,
        Certificate::Eigenpair {
            nu2,
            eigenvector: d_flat.clone() / C64::new(trace.sqrt(), 0.0),
            eigen_residual,
            matrix_constraint_residual: Some(matrix_residual),
        },
        trace * nu2,
    )
}
