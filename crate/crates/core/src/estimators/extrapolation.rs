use super::interpolation::{solve_noiseless, solve_noisy};
use super::{
    check_dims, truncation_schedule, with_truncation, zero_solution, EstimateSolution, Operators,
    Truncation,
};
use crate::error::{Error, Result};
use crate::lift::{FunctionalWeights, Horizon};
use crate::spectral::SpectralDensity;

/// Optimal estimate of `Σ_{j>=0} ā_j^T ζ_j` from `ζ_j + θ_j`, `j <= -1`. The
/// infinite system is truncated to blocks `0…J`.
pub fn extrapolate(
    f: &SpectralDensity,
    g: &SpectralDensity,
    weights: &FunctionalWeights,
    truncation: Truncation,
) -> Result<EstimateSolution> {
    check_extrapolation(weights)?;
    check_dims(f, Some(g), weights)?;
    if weights.is_zero() {
        return Ok(zero_solution(weights.horizon(), f.dim(), f.grid_size()));
    }
    let ops = Operators::from_densities(f, Some(g))?;
    let schedule = truncation_schedule(weights, f.grid_size(), truncation)?;
    with_truncation(&schedule, |j| {
        let idx: Vec<i64> = (0..=j as i64).collect();
        solve_noisy(&ops, weights, &idx, weights.horizon()).map_err(|e| increase_hint(e, j))
    })
}

/// Optimal estimate of `Σ_{j>=0} ā_j^T ζ_j` from `ζ_j`, `j <= -1`, through
/// the Toeplitz system of `f^{-1}` coefficients.
pub fn extrapolate_noiseless(
    f: &SpectralDensity,
    weights: &FunctionalWeights,
    truncation: Truncation,
) -> Result<EstimateSolution> {
    check_extrapolation(weights)?;
    check_dims(f, None, weights)?;
    if weights.is_zero() {
        return Ok(zero_solution(weights.horizon(), f.dim(), f.grid_size()));
    }
    let ops = Operators::from_densities(f, None)?;
    let schedule = truncation_schedule(weights, f.grid_size(), truncation)?;
    with_truncation(&schedule, |j| {
        let idx: Vec<i64> = (0..=j as i64).collect();
        solve_noiseless(&ops, weights, &idx, weights.horizon()).map_err(|e| increase_hint(e, j))
    })
}

fn check_extrapolation(weights: &FunctionalWeights) -> Result<()> {
    match weights.horizon() {
        Horizon::Extrapolation | Horizon::ExtrapolationFinite(_) => Ok(()),
        other => Err(Error::InvalidArgument(format!(
            "extrapolation needs extrapolation weights, got {}",
            other.name()
        ))),
    }
}

fn increase_hint(err: Error, j: usize) -> Error {
    match err {
        Error::IllPosed(msg) => Error::IllPosed(format!(
            "{msg} (truncation J = {j}; try a different truncation)"
        )),
        other => other,
    }
}
