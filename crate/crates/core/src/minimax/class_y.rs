use super::q_operator::build_q_operator;
use super::{Certificate, LeastFavorableResult};
use crate::error::{Error, Result};
use crate::estimators::EstimateSolution;
use crate::factorization::{extrapolate_factorized, Factorization};
use crate::lift::{FunctionalWeights, Horizon};
use crate::linalg;
use crate::spectral::{GridMatrixFunction, SpectralDensity};
use crate::{CMat, CVec, C64};

/// Least-favorable one-sided moving average for extrapolation when only the
/// per-period power `P_ζ` is known: `ν²` is the top eigenvalue of the weight
/// operator, `d(p) = √P_ζ · conj(x_p)` for its unit eigenvector `x`, and the
/// minimax error is `P_ζ ν²`.
pub fn least_favorable_class_y(
    weights: &FunctionalWeights,
    p_zeta: f64,
    n_blocks: Option<usize>,
    grid: usize,
) -> Result<LeastFavorableResult> {
    if !(p_zeta > 0.0 && p_zeta.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "total power must be positive, got {p_zeta}"
        )));
    }
    check_extrapolation(weights)?;
    let k = weights.dim();
    if weights.is_zero() {
        return degenerate(
            weights,
            &(CMat::identity(k, k) * C64::new(p_zeta / k as f64, 0.0)),
            grid,
        );
    }
    let q = build_q_operator(weights, n_blocks);
    let (nu2, x) = q.top_eigenpair();
    let scale = p_zeta.sqrt();
    let d: Vec<CMat> = (0..q.n_blocks)
        .map(|p| CMat::from_fn(k, 1, |r, _| x[p * k + r].conj() * scale))
        .collect();
    let d_flat = CVec::from_iterator(d.len() * k, d.iter().flat_map(|c| c.iter().copied()));
    let eigen_residual = (linalg::conj(&q.matrix) * &d_flat - &d_flat * C64::new(nu2, 0.0)).norm();
    moving_average_result(
        weights,
        d,
        grid,
        Certificate::Eigenpair {
            nu2,
            eigenvector: x,
            eigen_residual,
            matrix_constraint_residual: None,
        },
        p_zeta * nu2,
    )
}

pub(super) fn check_extrapolation(weights: &FunctionalWeights) -> Result<()> {
    match weights.horizon() {
        Horizon::Extrapolation | Horizon::ExtrapolationFinite(_) => Ok(()),
        other => Err(Error::InvalidArgument(format!(
            "this class is solved for extrapolation weights, got {}",
            other.name()
        ))),
    }
}

pub(super) fn moving_average_result(
    weights: &FunctionalWeights,
    d: Vec<CMat>,
    grid: usize,
    certificate: Certificate,
    minimax_mse: f64,
) -> Result<LeastFavorableResult> {
    let factor = Factorization::from_coefficients(d, grid)?;
    let f0 = factor.density()?;
    let h0 = extrapolate_factorized(&factor, weights)?;
    Ok(LeastFavorableResult {
        f0_grid: f0.evaluate_on_grid(),
        f0,
        g0: None,
        g0_grid: None,
        factor: Some(factor),
        certificate,
        minimax_mse,
        h0,
        certified: true,
    })
}

/// Zero weights: every member is least favorable and the error is zero.
pub(super) fn degenerate(
    weights: &FunctionalWeights,
    power: &CMat,
    grid: usize,
) -> Result<LeastFavorableResult> {
    let k = weights.dim();
    let f0 = SpectralDensity::constant(power, grid)?;
    let h = GridMatrixFunction::constant(&CMat::zeros(k, 1), grid)?;
    let h0 = EstimateSolution::assemble(
        weights.horizon(),
        h,
        Vec::new(),
        0.0,
        crate::estimators::SolveDiagnostics {
            condition_estimate: 1.0,
            backward_residual: 0.0,
            truncation: None,
            truncation_converged: true,
            mse_quadrature: 0.0,
        },
    );
    Ok(LeastFavorableResult {
        f0_grid: f0.evaluate_on_grid(),
        f0,
        g0: None,
        g0_grid: None,
        factor: None,
        certificate: Certificate::Eigenpair {
            nu2: 0.0,
            eigenvector: CVec::zeros(k * weights.len()),
            eigen_residual: 0.0,
            matrix_constraint_residual: None,
        },
        minimax_mse: 0.0,
        h0,
        certified: true,
    })
}
