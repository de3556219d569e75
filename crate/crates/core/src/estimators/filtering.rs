use super::interpolation::{finish, ill_posed, stack_padded};
use super::{
    check_dims, quad, target_on_grid, truncation_schedule, unstack, with_truncation, zero_solution,
    BlockKind, EstimateSolution, Operators, Truncation,
};
use crate::error::{Error, Result};
use crate::lift::{FunctionalWeights, Horizon};
use crate::linalg::{self, DEFAULT_COND_LIMIT};
use crate::spectral::{self, GridMatrixFunction, SpectralDensity};
use crate::CMat;

/// Optimal estimate of `Σ_{j>=0} ā_j^T ζ_{-j}` from `ζ_j + θ_j`, `j <= 0`.
/// Solves `U d = V a` over blocks `1…J`.
pub fn filter(
    f: &SpectralDensity,
    g: &SpectralDensity,
    weights: &FunctionalWeights,
    truncation: Truncation,
) -> Result<EstimateSolution> {
    if weights.horizon() != Horizon::Filtering {
        return Err(Error::InvalidArgument(format!(
            "filtering needs filtering weights, got {}",
            weights.horizon().name()
        )));
    }
    check_dims(f, Some(g), weights)?;
    if weights.is_zero() {
        return Ok(zero_solution(Horizon::Filtering, f.dim(), f.grid_size()));
    }
    let ops = Operators::from_densities(f, Some(g))?;
    let schedule = truncation_schedule(weights, f.grid_size(), truncation)?;
    with_truncation(&schedule, |j| solve_filter(&ops, weights, j))
}

/// Filtering on densities already sampled on the grid (no validation).
pub(crate) fn filter_on_grid(
    f: &GridMatrixFunction,
    g: &GridMatrixFunction,
    weights: &FunctionalWeights,
    truncation: Truncation,
    cond: f64,
) -> Result<EstimateSolution> {
    if weights.is_zero() {
        return Ok(zero_solution(Horizon::Filtering, f.rows(), f.grid_size()));
    }
    let ops = Operators::from_grids(f.clone(), Some(g.clone()), cond)?;
    let schedule = truncation_schedule(weights, f.grid_size(), truncation)?;
    with_truncation(&schedule, |j| solve_filter(&ops, weights, j))
}

fn solve_filter(
    ops: &Operators,
    weights: &FunctionalWeights,
    j_max: usize,
) -> Result<EstimateSolution> {
    let k = ops.dim;
    let na = weights.len();
    let a = stack_padded(weights, na);
    let rows: Vec<i64> = (1..=j_max as i64).collect();
    let cols: Vec<i64> = (0..na as i64).collect();
    let u = ops.block_matrix(BlockKind::U, &rows, &rows)?;
    let v = ops.block_matrix(BlockKind::V, &rows, &cols)?;
    let w = ops.block_matrix(BlockKind::W, &cols, &cols)?;
    let (d, rep) =
        linalg::solve_hermitian(&u, &(&v * &a), DEFAULT_COND_LIMIT).map_err(ill_posed)?;
    let mse = quad(&a, &w, &a) + quad(&d, &u, &d);
    let d_blocks = unstack(&d, k);

    let g = ops.g.as_ref().expect("filtering operators carry g");
    let a_grid = target_on_grid(weights, ops.grid)?;
    let d_grid =
        spectral::evaluate_vector_poly(rows.iter().copied().zip(d_blocks.iter()), k, ops.grid)?;
    let h = GridMatrixFunction::from_fn(ops.grid, k, 1, |i, _| {
        let av: &CMat = a_grid.value(i);
        av - ops.s.value(i).transpose() * (g.value(i).transpose() * av + d_grid.value(i))
    })?;
    finish(ops, Horizon::Filtering, h, &a_grid, d_blocks, mse, &rep)
}
