//! Spectral-domain optimal linear estimation under exactly known densities.
//!
//! Block matrices are assembled from Fourier coefficients of
//! `S = (f+g)^{-1}`, `fS` and `fSg`; block `(l, j)` is the transposed
//! coefficient at the kind's lag (see [`BlockKind::lag`]).

mod extrapolation;
mod filtering;
mod interpolation;

use std::collections::BTreeMap;

pub use extrapolation::{extrapolate, extrapolate_noiseless};
pub use filtering::filter;
pub(crate) use filtering::filter_on_grid;
pub use interpolation::{interpolate, interpolate_noiseless};

use crate::error::{Error, Result};
use crate::lift::{FunctionalWeights, Horizon};
use crate::linalg::{self, SolveReport};
use crate::spectral::{
    self, GridMatrixFunction, LagTable, SpectralDensity, DEFAULT_COND_THRESHOLD,
};
use crate::{CMat, CVec};

/// Smallest automatic truncation.
pub const MIN_AUTO_TRUNCATION: usize = 64;
/// Absolute mse change (relative to `max(1, mse)`) that stops truncation
/// doubling.
pub const TRUNCATION_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlockKind {
    B,
    D,
    R,
    U,
    V,
    W,
}

impl BlockKind {
    /// Lag of the Fourier coefficient used for block `(row, col)`.
    pub fn lag(&self, row: i64, col: i64) -> i64 {
        match self {
            BlockKind::B | BlockKind::D | BlockKind::R | BlockKind::U => row - col,
            BlockKind::V => row + col,
            BlockKind::W => col - row,
        }
    }
}

/// Flattened block matrix: block `(r, c)` occupies rows `r·K..(r+1)·K` and
/// columns `c·K..(c+1)·K` of `matrix`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockMatrix {
    pub kind: BlockKind,
    pub dim: usize,
    pub row_indices: Vec<i64>,
    pub col_indices: Vec<i64>,
    pub matrix: CMat,
}

impl BlockMatrix {
    pub fn block(&self, r: usize, c: usize) -> CMat {
        self.matrix
            .view((r * self.dim, c * self.dim), (self.dim, self.dim))
            .into_owned()
    }
}

/// How many blocks the infinite systems keep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Truncation {
    /// `max(64, 4 × last nonzero weight index)`, doubled until the mse
    /// settles, never beyond `G/4 - 1`.
    #[default]
    Auto,
    Fixed(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveDiagnostics {
    /// Condition estimate of the main system (1 when there is none).
    pub condition_estimate: f64,
    pub backward_residual: f64,
    /// Truncation index `J` actually used for infinite systems.
    pub truncation: Option<usize>,
    pub truncation_converged: bool,
    /// Grid quadrature of the error integral for the returned `h`.
    pub mse_quadrature: f64,
}

impl SolveDiagnostics {
    fn from_report(rep: &SolveReport) -> Self {
        Self {
            condition_estimate: rep.condition_estimate,
            backward_residual: rep.backward_residual,
            truncation: None,
            truncation_converged: true,
            mse_quadrature: f64::NAN,
        }
    }

    fn trivial() -> Self {
        Self {
            condition_estimate: 1.0,
            backward_residual: 0.0,
            truncation: None,
            truncation_converged: true,
            mse_quadrature: 0.0,
        }
    }
}

/// Spectral characteristic, solved coefficients and error of an estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimateSolution {
    pub horizon: Horizon,
    /// `h(λ_g)` as `K × 1` values.
    pub h_grid: GridMatrixFunction,
    /// Fourier coefficients `h_j` for `|j| <= G/4`.
    pub h_coeffs: BTreeMap<i64, CVec>,
    /// `c_j` (interpolation, extrapolation), `d_j` (filtering, `j >= 1`) or
    /// `(Ad)_l` (factorized extrapolation).
    pub solved_blocks: Vec<CVec>,
    pub mse: f64,
    pub diagnostics: SolveDiagnostics,
}

impl EstimateSolution {
    pub(crate) fn assemble(
        horizon: Horizon,
        h_grid: GridMatrixFunction,
        solved_blocks: Vec<CVec>,
        mse: f64,
        diagnostics: SolveDiagnostics,
    ) -> Self {
        let grid = h_grid.grid_size();
        let table = h_grid.lag_table();
        let quarter = (grid / 4) as i64;
        let h_coeffs = (-quarter..=quarter)
            .map(|j| {
                let c = table.get(j).expect("|j| <= G/4");
                (j, CVec::from_column_slice(c.as_slice()))
            })
            .collect();
        Self {
            horizon,
            h_grid,
            h_coeffs,
            solved_blocks,
            mse,
            diagnostics,
        }
    }

    pub fn dim(&self) -> usize {
        self.h_grid.rows()
    }

    /// Largest `‖h_j‖` over forbidden lags `|j| <= G/4`, relative to
    /// `max(1, max_j ‖h_j‖)`.
    pub fn forbidden_lag_residual(&self) -> f64 {
        let scale = self.h_coeffs.values().map(|v| v.norm()).fold(1.0, f64::max);
        self.h_coeffs
            .iter()
            .filter(|(&j, _)| self.horizon.is_forbidden_lag(j))
            .map(|(_, v)| v.norm())
            .fold(0.0, f64::max)
            / scale
    }
}

/// Grid values of `A(λ) = Σ_j ā_j e^{ijλ}`, or `A_-(λ) = Σ_j ā_j e^{-ijλ}`
/// for filtering.
pub fn target_on_grid(weights: &FunctionalWeights, grid: usize) -> Result<GridMatrixFunction> {
    let sign = if weights.horizon() == Horizon::Filtering {
        -1
    } else {
        1
    };
    spectral::evaluate_vector_poly(
        weights
            .blocks()
            .iter()
            .enumerate()
            .map(|(j, b)| (sign * j as i64, b)),
        weights.dim(),
        grid,
    )
}

/// `(1/2π)∫ [(A-h)^T f conj(A-h) + h^T g conj(h)] dλ` by grid quadrature
/// (`A_-` in place of `A` for filtering).
pub fn evaluate_mse(
    h: &GridMatrixFunction,
    f: &SpectralDensity,
    g: Option<&SpectralDensity>,
    weights: &FunctionalWeights,
) -> Result<f64> {
    check_dims(f, g, weights)?;
    if h.grid_size() != f.grid_size() || h.rows() != f.dim() || h.cols() != 1 {
        return Err(Error::DimensionMismatch(
            "h does not match the density grid".into(),
        ));
    }
    let a = target_on_grid(weights, f.grid_size())?;
    let g_grid = g.map(|g| g.evaluate_on_grid());
    Ok(mse_on_grid(h, &a, &f.evaluate_on_grid(), g_grid.as_ref()))
}

pub(crate) fn mse_on_grid(
    h: &GridMatrixFunction,
    a: &GridMatrixFunction,
    f: &GridMatrixFunction,
    g: Option<&GridMatrixFunction>,
) -> f64 {
    let grid = h.grid_size();
    let mut acc = 0.0;
    for i in 0..grid {
        let e = linalg::conj(&(a.value(i) - h.value(i)));
        acc += (e.adjoint() * f.value(i) * &e)[(0, 0)].re;
        if let Some(g) = g {
            let w = linalg::conj(h.value(i));
            acc += (w.adjoint() * g.value(i) * &w)[(0, 0)].re;
        }
    }
    acc / grid as f64
}

pub(crate) fn check_dims(
    f: &SpectralDensity,
    g: Option<&SpectralDensity>,
    weights: &FunctionalWeights,
) -> Result<()> {
    if weights.dim() != f.dim() {
        return Err(Error::DimensionMismatch(format!(
            "weights have K = {}, density has K = {}",
            weights.dim(),
            f.dim()
        )));
    }
    if let Some(g) = g {
        if g.dim() != f.dim() || g.grid_size() != f.grid_size() {
            return Err(Error::DimensionMismatch(
                "f and g differ in K or grid size".into(),
            ));
        }
    }
    if weights.len() >= f.grid_size() / 4 {
        return Err(Error::InvalidArgument(format!(
            "{} weight blocks need a grid larger than {}",
            weights.len(),
            f.grid_size()
        )));
    }
    Ok(())
}

fn validated(f: &SpectralDensity) -> Result<GridMatrixFunction> {
    let report = spectral::validate_density(f);
    if let Some(err) = report.to_error() {
        return Err(err);
    }
    Ok(f.evaluate_on_grid())
}

/// Pointwise operators shared by the solvers, with lazily used coefficient
/// tables of `S`, `fS` and `fSg`.
pub(crate) struct Operators {
    pub dim: usize,
    pub grid: usize,
    pub f: GridMatrixFunction,
    pub g: Option<GridMatrixFunction>,
    /// `(f+g)^{-1}`, or `f^{-1}` when noiseless.
    pub s: GridMatrixFunction,
    pub s_tab: LagTable,
    pub fs_tab: LagTable,
    pub fsg_tab: LagTable,
}

impl Operators {
    pub fn from_densities(f: &SpectralDensity, g: Option<&SpectralDensity>) -> Result<Self> {
        let f_grid = validated(f)?;
        let g_grid = g.map(validated).transpose()?;
        Self::from_grids(f_grid, g_grid, DEFAULT_COND_THRESHOLD)
    }

    pub fn from_grids(
        f: GridMatrixFunction,
        g: Option<GridMatrixFunction>,
        cond: f64,
    ) -> Result<Self> {
        let sum = match &g {
            Some(g) => f.add(g)?,
            None => f.clone(),
        };
        let report = spectral::minimality_of_grid(&sum, cond);
        if let Some(node) = report.worst_node {
            return Err(Error::Minimality(format!(
                "{} is singular or has condition number above {cond:.1e} at grid node {node} (lambda = {:.6})",
                if g.is_some() { "f + g" } else { "f" },
                sum.lambda(node)
            )));
        }
        let s = sum.inverse(cond)?;
        let fs = f.mul(&s)?;
        let fsg = match &g {
            Some(g) => fs.mul(g)?,
            None => fs.scale(0.0),
        };
        Ok(Self {
            dim: f.rows(),
            grid: f.grid_size(),
            s_tab: s.lag_table(),
            fs_tab: fs.lag_table(),
            fsg_tab: fsg.lag_table(),
            f,
            g,
            s,
        })
    }

    pub fn table(&self, kind: BlockKind) -> &LagTable {
        match kind {
            BlockKind::B | BlockKind::U => &self.s_tab,
            BlockKind::D | BlockKind::V => &self.fs_tab,
            BlockKind::R | BlockKind::W => &self.fsg_tab,
        }
    }

    pub fn block_matrix(&self, kind: BlockKind, rows: &[i64], cols: &[i64]) -> Result<CMat> {
        block_toeplitz(self.table(kind), self.dim, rows, cols, |r, c| {
            kind.lag(r, c)
        })
    }
}

pub(crate) fn block_toeplitz(
    table: &LagTable,
    dim: usize,
    rows: &[i64],
    cols: &[i64],
    lag: impl Fn(i64, i64) -> i64,
) -> Result<CMat> {
    let mut m = CMat::zeros(rows.len() * dim, cols.len() * dim);
    for (ri, &r) in rows.iter().enumerate() {
        for (ci, &c) in cols.iter().enumerate() {
            let block = table.get(lag(r, c))?.transpose();
            m.view_mut((ri * dim, ci * dim), (dim, dim))
                .copy_from(&block);
        }
    }
    Ok(m)
}

/// Block matrix of the given kind for densities `f` and `g` (`g` absent
/// means noiseless, with `S = f^{-1}`).
pub fn build_block_matrix(
    kind: BlockKind,
    f: &SpectralDensity,
    g: Option<&SpectralDensity>,
    rows: &[i64],
    cols: &[i64],
) -> Result<BlockMatrix> {
    let ops = Operators::from_densities(f, g)?;
    Ok(BlockMatrix {
        kind,
        dim: f.dim(),
        row_indices: rows.to_vec(),
        col_indices: cols.to_vec(),
        matrix: ops.block_matrix(kind, rows, cols)?,
    })
}

/// Stacks vectors into one column.
pub(crate) fn stack(blocks: &[CVec]) -> CMat {
    let k = blocks.first().map_or(0, |b| b.len());
    let mut out = CMat::zeros(blocks.len() * k, 1);
    for (j, b) in blocks.iter().enumerate() {
        out.view_mut((j * k, 0), (k, 1)).copy_from(b);
    }
    out
}

pub(crate) fn unstack(x: &CMat, k: usize) -> Vec<CVec> {
    (0..x.nrows() / k)
        .map(|j| CVec::from_column_slice(x.view((j * k, 0), (k, 1)).clone_owned().as_slice()))
        .collect()
}

/// `Re(x^H M y)` for column matrices.
pub(crate) fn quad(x: &CMat, m: &CMat, y: &CMat) -> f64 {
    (x.adjoint() * m * y)[(0, 0)].re
}

/// `J` candidates for automatic truncation.
pub(crate) fn truncation_schedule(
    weights: &FunctionalWeights,
    grid: usize,
    trunc: Truncation,
) -> Result<Vec<usize>> {
    let last = weights.len() - 1;
    let cap = grid / 4 - 1;
    match trunc {
        Truncation::Fixed(j) => {
            let needed = weights.last_nonzero().unwrap_or(0);
            if j < needed {
                return Err(Error::InvalidArgument(format!(
                    "truncation J = {j} is below the last nonzero weight block {needed}"
                )));
            }
            if j > cap {
                return Err(Error::InvalidArgument(format!(
                    "truncation J = {j} exceeds G/4 - 1 = {cap}; increase the grid"
                )));
            }
            Ok(vec![j])
        }
        Truncation::Auto => {
            let nz = weights.last_nonzero().unwrap_or(0);
            let mut j = MIN_AUTO_TRUNCATION.max(4 * nz).max(last).min(cap);
            let mut out = vec![j];
            while j < cap {
                j = (2 * j).min(cap);
                out.push(j);
            }
            Ok(out)
        }
    }
}

/// Runs `solve` over the truncation schedule until the mse settles.
pub(crate) fn with_truncation(
    schedule: &[usize],
    mut solve: impl FnMut(usize) -> Result<EstimateSolution>,
) -> Result<EstimateSolution> {
    let mut prev = solve(schedule[0])?;
    prev.diagnostics.truncation = Some(schedule[0]);
    prev.diagnostics.truncation_converged = schedule.len() == 1;
    for &j in &schedule[1..] {
        let mut next = solve(j)?;
        next.diagnostics.truncation = Some(j);
        let settled = (next.mse - prev.mse).abs() < TRUNCATION_TOLERANCE * next.mse.abs().max(1.0);
        next.diagnostics.truncation_converged = settled;
        prev = next;
        if settled {
            return Ok(prev);
        }
    }
    if !prev.diagnostics.truncation_converged {
        log::warn!(
            "truncation did not settle by J = {:?}; returning the largest system",
            prev.diagnostics.truncation
        );
    }
    Ok(prev)
}

/// Trivial solution for identically zero weights.
pub(crate) fn zero_solution(horizon: Horizon, dim: usize, grid: usize) -> EstimateSolution {
    let h = GridMatrixFunction::constant(&CMat::zeros(dim, 1), grid).expect("grid validated");
    EstimateSolution::assemble(horizon, h, Vec::new(), 0.0, SolveDiagnostics::trivial())
}

pub fn vec_to_mat(v: &CVec) -> CMat {
    CMat::from_column_slice(v.len(), 1, v.as_slice())
}
