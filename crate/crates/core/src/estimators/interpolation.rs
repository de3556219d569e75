use super::BlockKind;
use super::{
    check_dims, mse_on_grid, quad, stack, target_on_grid, unstack, zero_solution, EstimateSolution,
    Operators, SolveDiagnostics,
};
use crate::error::{Error, Result};
use crate::lift::{FunctionalWeights, Horizon};
use crate::linalg::{self, DEFAULT_COND_LIMIT};
use crate::spectral::{self, GridMatrixFunction, SpectralDensity};
use crate::CVec;

/// Optimal estimate of `Σ_{j=0}^{N} ā_j^T ζ_j` from `ζ_j + θ_j`, `j ∉ {0…N}`.
pub fn interpolate(
    f: &SpectralDensity,
    g: &SpectralDensity,
    weights: &FunctionalWeights,
) -> Result<EstimateSolution> {
    let n = interpolation_order(weights)?;
    check_dims(f, Some(g), weights)?;
    if weights.is_zero() {
        return Ok(zero_solution(weights.horizon(), f.dim(), f.grid_size()));
    }
    let ops = Operators::from_densities(f, Some(g))?;
    let idx: Vec<i64> = (0..=n as i64).collect();
    solve_noisy(&ops, weights, &idx, weights.horizon())
}

/// Optimal estimate of `Σ_{j=0}^{N} ā_j^T ζ_j` from `ζ_j`, `j ∉ {0…N}`.
pub fn interpolate_noiseless(
    f: &SpectralDensity,
    weights: &FunctionalWeights,
) -> Result<EstimateSolution> {
    let n = interpolation_order(weights)?;
    check_dims(f, None, weights)?;
    if weights.is_zero() {
        return Ok(zero_solution(weights.horizon(), f.dim(), f.grid_size()));
    }
    let ops = Operators::from_densities(f, None)?;
    let idx: Vec<i64> = (0..=n as i64).collect();
    solve_noiseless(&ops, weights, &idx, weights.horizon())
}

fn interpolation_order(weights: &FunctionalWeights) -> Result<usize> {
    match weights.horizon() {
        Horizon::Interpolation(n) => Ok(n),
        other => Err(Error::InvalidArgument(format!(
            "interpolation needs interpolation weights, got {}",
            other.name()
        ))),
    }
}

/// Solves `B c = D a` over the index set and returns the estimate with
/// `h = A - S^T (g^T A + C)` and `Δ = ⟨a, R a⟩ + ⟨c, B c⟩`.
pub(super) fn solve_noisy(
    ops: &Operators,
    weights: &FunctionalWeights,
    idx: &[i64],
    horizon: Horizon,
) -> Result<EstimateSolution> {
    let k = ops.dim;
    let a = stack_padded(weights, idx.len());
    let b = ops.block_matrix(BlockKind::B, idx, idx)?;
    let d = ops.block_matrix(BlockKind::D, idx, idx)?;
    let r = ops.block_matrix(BlockKind::R, idx, idx)?;
    let (c, rep) =
        linalg::solve_hermitian(&b, &(&d * &a), DEFAULT_COND_LIMIT).map_err(ill_posed)?;
    let mse = quad(&a, &r, &a) + quad(&c, &b, &c);
    let c_blocks = unstack(&c, k);

    let g = ops.g.as_ref().expect("noisy operators carry g");
    let a_grid = target_on_grid(weights, ops.grid)?;
    let c_grid =
        spectral::evaluate_vector_poly(idx.iter().copied().zip(c_blocks.iter()), k, ops.grid)?;
    let h = GridMatrixFunction::from_fn(ops.grid, k, 1, |i, _| {
        let av = a_grid.value(i);
        av - ops.s.value(i).transpose() * (g.value(i).transpose() * av + c_grid.value(i))
    })?;
    finish(ops, horizon, h, &a_grid, c_blocks, mse, &rep)
}

/// Solves `B c = a` with `B` built from `f^{-1}`; `h = A - (f^{-1})^T C`,
/// `Δ = ⟨c, a⟩`.
pub(super) fn solve_noiseless(
    ops: &Operators,
    weights: &FunctionalWeights,
    idx: &[i64],
    horizon: Horizon,
) -> Result<EstimateSolution> {
    let k = ops.dim;
    let a = stack_padded(weights, idx.len());
    let b = ops.block_matrix(BlockKind::B, idx, idx)?;
    let (c, rep) = linalg::solve_hermitian(&b, &a, DEFAULT_COND_LIMIT).map_err(ill_posed)?;
    let mse = (a.adjoint() * &c)[(0, 0)].re;
    let c_blocks = unstack(&c, k);

    let a_grid = target_on_grid(weights, ops.grid)?;
    let c_grid =
        spectral::evaluate_vector_poly(idx.iter().copied().zip(c_blocks.iter()), k, ops.grid)?;
    let h = GridMatrixFunction::from_fn(ops.grid, k, 1, |i, _| {
        a_grid.value(i) - ops.s.value(i).transpose() * c_grid.value(i)
    })?;
    finish(ops, horizon, h, &a_grid, c_blocks, mse, &rep)
}

pub(super) fn finish(
    ops: &Operators,
    horizon: Horizon,
    h: GridMatrixFunction,
    a_grid: &GridMatrixFunction,
    blocks: Vec<CVec>,
    mse: f64,
    rep: &linalg::SolveReport,
) -> Result<EstimateSolution> {
    let mut diagnostics = SolveDiagnostics::from_report(rep);
    diagnostics.mse_quadrature = mse_on_grid(&h, a_grid, &ops.f, ops.g.as_ref());
    Ok(EstimateSolution::assemble(
        horizon,
        h,
        blocks,
        mse.max(0.0),
        diagnostics,
    ))
}

pub(super) fn stack_padded(weights: &FunctionalWeights, n_blocks: usize) -> crate::CMat {
    let v = weights.stacked(n_blocks);
    stack(&[v])
}

pub(super) fn ill_posed(err: Error) -> Error {
    match err {
        Error::IllPosed(msg) => Error::IllPosed(format!(
            "coefficient system cannot be solved reliably: {msg}"
        )),
        other => other,
    }
}
