//! Matrix spectral densities as trigonometric polynomials, grid evaluation,
//! Fourier coefficients and density diagnostics.

use std::cell::RefCell;
use std::collections::BTreeMap;
use std::f64::consts::PI;

use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::linalg;
use crate::{CMat, CVec, C64};

pub const DEFAULT_GRID: usize = 2048;
/// Eigenvalues above `-PSD_TOLERANCE` count as nonnegative.
pub const PSD_TOLERANCE: f64 = 1e-10;
pub const DEFAULT_COND_THRESHOLD: f64 = 1e12;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn fft_in_place(buf: &mut [C64], inverse: bool) {
    PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        let plan = if inverse {
            p.plan_fft_inverse(buf.len())
        } else {
            p.plan_fft_forward(buf.len())
        };
        plan.process(buf);
    });
}

fn check_grid(grid: usize) -> Result<()> {
    if grid < 8 || !grid.is_power_of_two() {
        return Err(Error::InvalidArgument(format!(
            "grid size must be a power of two >= 8, got {grid}"
        )));
    }
    Ok(())
}

/// Grid node `λ_g = -π + 2πg/G`.
pub fn grid_node(g: usize, grid: usize) -> f64 {
    -PI + 2.0 * PI * g as f64 / grid as f64
}

fn sign(m: i64) -> f64 {
    if m.rem_euclid(2) == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Evaluates `Σ_m C(m) e^{imλ_g}` on the grid for `rows × cols` coefficients.
pub fn evaluate_lagged<'a>(
    coeffs: impl IntoIterator<Item = (i64, &'a CMat)>,
    rows: usize,
    cols: usize,
    grid: usize,
) -> Result<GridMatrixFunction> {
    check_grid(grid)?;
    let mut bufs = vec![vec![C64::new(0.0, 0.0); grid]; rows * cols];
    for (m, c) in coeffs {
        if m.unsigned_abs() as usize >= grid / 2 {
            return Err(Error::Aliasing { lag: m, grid });
        }
        if c.nrows() != rows || c.ncols() != cols {
            return Err(Error::DimensionMismatch(format!(
                "coefficient at lag {m} is {}x{}, expected {rows}x{cols}",
                c.nrows(),
                c.ncols()
            )));
        }
        let idx = m.rem_euclid(grid as i64) as usize;
        let s = sign(m);
        for r in 0..rows {
            for q in 0..cols {
                bufs[r * cols + q][idx] += c[(r, q)] * s;
            }
        }
    }
    for b in bufs.iter_mut() {
        fft_in_place(b, true);
    }
    let values = (0..grid)
        .map(|g| CMat::from_fn(rows, cols, |r, q| bufs[r * cols + q][g]))
        .collect();
    Ok(GridMatrixFunction { rows, cols, values })
}

/// Evaluates a vector trigonometric polynomial `Σ_j v_j e^{i·lag(j)·λ}`.
pub fn evaluate_vector_poly<'a>(
    terms: impl IntoIterator<Item = (i64, &'a CVec)>,
    dim: usize,
    grid: usize,
) -> Result<GridMatrixFunction> {
    let mats: Vec<(i64, CMat)> = terms
        .into_iter()
        .map(|(m, v)| (m, CMat::from_column_slice(v.len(), 1, v.as_slice())))
        .collect();
    evaluate_lagged(mats.iter().map(|(m, c)| (*m, c)), dim, 1, grid)
}

/// A `rows × cols` complex matrix function sampled on the uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridMatrixFunction {
    rows: usize,
    cols: usize,
    values: Vec<CMat>,
}

impl GridMatrixFunction {
    pub fn new(values: Vec<CMat>) -> Result<Self> {
        let grid = values.len();
        check_grid(grid)?;
        let (rows, cols) = values[0].shape();
        if let Some(g) = values.iter().position(|v| v.shape() != (rows, cols)) {
            return Err(Error::DimensionMismatch(format!(
                "grid value {g} has a different shape"
            )));
        }
        if let Some(g) = values
            .iter()
            .position(|v| v.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()))
        {
            return Err(Error::InvalidInput(format!(
                "non-finite value at grid node {g}"
            )));
        }
        Ok(Self { rows, cols, values })
    }

    pub fn from_fn(
        grid: usize,
        rows: usize,
        cols: usize,
        mut f: impl FnMut(usize, f64) -> CMat,
    ) -> Result<Self> {
        check_grid(grid)?;
        let values = (0..grid)
            .map(|g| f(g, grid_node(g, grid)))
            .collect::<Vec<_>>();
        if let Some(g) = values.iter().position(|v| v.shape() != (rows, cols)) {
            return Err(Error::DimensionMismatch(format!(
                "grid value {g} has a different shape"
            )));
        }
        Ok(Self { rows, cols, values })
    }

    /// Scalar function on the grid (1×1 values).
    pub fn scalar(values: &[f64]) -> Result<Self> {
        Self::new(
            values
                .iter()
                .map(|&v| CMat::from_element(1, 1, C64::new(v, 0.0)))
                .collect(),
        )
    }

    pub fn constant(value: &CMat, grid: usize) -> Result<Self> {
        check_grid(grid)?;
        Ok(Self {
            rows: value.nrows(),
            cols: value.ncols(),
            values: vec![value.clone(); grid],
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Row count; the `K` of a square function.
    pub fn dim(&self) -> usize {
        self.rows
    }

    pub fn grid_size(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[CMat] {
        &self.values
    }

    pub fn value(&self, g: usize) -> &CMat {
        &self.values[g]
    }

    pub fn lambda(&self, g: usize) -> f64 {
        grid_node(g, self.grid_size())
    }

    /// `(1/2π)∫ M(λ) e^{-ijλ} dλ` by the grid rule.
    pub fn fourier_coefficient(&self, lag: i64) -> Result<CMat> {
        let grid = self.grid_size();
        if lag.unsigned_abs() as usize >= grid / 2 {
            return Err(Error::Aliasing { lag, grid });
        }
        let mut acc = CMat::zeros(self.rows, self.cols);
        for (g, v) in self.values.iter().enumerate() {
            acc += v * C64::from_polar(1.0, -(lag as f64) * grid_node(g, grid));
        }
        Ok(acc / C64::new(grid as f64, 0.0))
    }

    /// All Fourier coefficients at once (one FFT per entry).
    pub fn lag_table(&self) -> LagTable {
        let grid = self.grid_size();
        let mut data = vec![CMat::zeros(self.rows, self.cols); grid];
        let mut buf = vec![C64::new(0.0, 0.0); grid];
        for r in 0..self.rows {
            for q in 0..self.cols {
                for (g, v) in self.values.iter().enumerate() {
                    buf[g] = v[(r, q)];
                }
                fft_in_place(&mut buf, false);
                for (j, slot) in data.iter_mut().enumerate() {
                    slot[(r, q)] = buf[j] * (sign(j as i64) / grid as f64);
                }
            }
        }
        LagTable {
            rows: self.rows,
            cols: self.cols,
            data,
        }
    }

    pub fn map(&self, f: impl Fn(&CMat) -> CMat) -> Self {
        let values: Vec<CMat> = self.values.iter().map(f).collect();
        let (rows, cols) = values[0].shape();
        Self { rows, cols, values }
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(&CMat, &CMat) -> CMat) -> Result<Self> {
        if other.grid_size() != self.grid_size() {
            return Err(Error::DimensionMismatch(format!(
                "grid sizes {} and {} differ",
                self.grid_size(),
                other.grid_size()
            )));
        }
        let values: Vec<CMat> = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| f(a, b))
            .collect();
        let (rows, cols) = values[0].shape();
        Ok(Self { rows, cols, values })
    }

    /// Pointwise product `self(λ) · other(λ)`.
    pub fn mul(&self, other: &Self) -> Result<Self> {
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        self.zip_map(other, |a, b| a * b)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::DimensionMismatch(
                "cannot add functions of different shape".into(),
            ));
        }
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::DimensionMismatch(
                "cannot subtract functions of different shape".into(),
            ));
        }
        self.zip_map(other, |a, b| a - b)
    }

    pub fn scale(&self, s: f64) -> Self {
        self.map(|m| m * C64::new(s, 0.0))
    }

    pub fn transpose(&self) -> Self {
        self.map(|m| m.transpose())
    }

    pub fn adjoint(&self) -> Self {
        self.map(|m| m.adjoint())
    }

    pub fn conj(&self) -> Self {
        self.map(linalg::conj)
    }

    /// Pointwise inverse; fails at the first node that is singular or whose
    /// condition number exceeds `cond_limit`.
    pub fn inverse(&self, cond_limit: f64) -> Result<Self> {
        let mut values = Vec::with_capacity(self.grid_size());
        for (g, v) in self.values.iter().enumerate() {
            match linalg::inverse_checked(v, cond_limit) {
                Some(inv) => values.push(inv),
                None => {
                    return Err(Error::Minimality(format!(
                        "matrix is singular or ill-conditioned at grid node {g} (lambda = {:.6})",
                        self.lambda(g)
                    )))
                }
            }
        }
        Ok(Self {
            rows: self.rows,
            cols: self.cols,
            values,
        })
    }

    /// Grid mean `(1/G) Σ_g M(λ_g)`, i.e. `(1/2π)∫ M dλ`.
    pub fn mean(&self) -> CMat {
        let mut acc = CMat::zeros(self.rows, self.cols);
        for v in &self.values {
            acc += v;
        }
        acc / C64::new(self.grid_size() as f64, 0.0)
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| linalg::max_abs(&(a - b)))
            .fold(0.0, f64::max)
    }

    /// Column `c` of the matrix at each node, as a `rows × 1` function.
    pub fn column(&self, c: usize) -> Self {
        self.map(|m| m.columns(c, 1).into_owned())
    }
}

/// Fourier coefficients of a grid function, indexed by lag.
#[derive(Debug, Clone, PartialEq)]
pub struct LagTable {
    rows: usize,
    cols: usize,
    data: Vec<CMat>,
}

impl LagTable {
    pub fn grid_size(&self) -> usize {
        self.data.len()
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Largest admissible `|lag|`.
    pub fn max_lag(&self) -> i64 {
        (self.grid_size() / 2) as i64 - 1
    }

    pub fn get(&self, lag: i64) -> Result<&CMat> {
        let grid = self.grid_size();
        if lag.unsigned_abs() as usize >= grid / 2 {
            return Err(Error::Aliasing { lag, grid });
        }
        Ok(&self.data[lag.rem_euclid(grid as i64) as usize])
    }
}

/// `K × K` Hermitian spectral density `f(λ) = Σ_m F(m) e^{imλ}`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralDensity {
    dim: usize,
    coeffs: BTreeMap<i64, CMat>,
    grid_size: usize,
}

impl SpectralDensity {
    /// Stores the coefficients as given; Hermitian symmetry is checked by
    /// [`validate_density`], not enforced here.
    pub fn new(dim: usize, coeffs: BTreeMap<i64, CMat>, grid_size: usize) -> Result<Self> {
        check_grid(grid_size)?;
        if dim == 0 {
            return Err(Error::InvalidArgument("K must be >= 1".into()));
        }
        for (&m, c) in &coeffs {
            if c.shape() != (dim, dim) {
                return Err(Error::DimensionMismatch(format!(
                    "coefficient at lag {m} is {}x{}, expected {dim}x{dim}",
                    c.nrows(),
                    c.ncols()
                )));
            }
            if c.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                return Err(Error::InvalidInput(format!(
                    "coefficient at lag {m} is not finite"
                )));
            }
            if m.unsigned_abs() as usize >= grid_size / 2 {
                return Err(Error::Aliasing {
                    lag: m,
                    grid: grid_size,
                });
            }
        }
        Ok(Self {
            dim,
            coeffs,
            grid_size,
        })
    }

    /// Builds a Hermitian density from the coefficients at lags `m >= 0`;
    /// `F(-m)` is set to `F(m)^*`.
    pub fn from_nonnegative_lags(dim: usize, half: &[CMat], grid_size: usize) -> Result<Self> {
        let mut coeffs = BTreeMap::new();
        for (m, c) in half.iter().enumerate() {
            let m = m as i64;
            if m == 0 {
                coeffs.insert(0, linalg::hermitian_part(c));
            } else {
                coeffs.insert(m, c.clone());
                coeffs.insert(-m, c.adjoint());
            }
        }
        Self::new(dim, coeffs, grid_size)
    }

    /// Scalar density from real symmetric coefficients `c_0, c_1, …` meaning
    /// `c_0 + 2 Σ_m c_m cos(mλ)`.
    pub fn scalar_symmetric(half: &[f64], grid_size: usize) -> Result<Self> {
        let mats: Vec<CMat> = half
            .iter()
            .map(|&v| CMat::from_element(1, 1, C64::new(v, 0.0)))
            .collect();
        Self::from_nonnegative_lags(1, &mats, grid_size)
    }

    pub fn constant(value: &CMat, grid_size: usize) -> Result<Self> {
        let mut coeffs = BTreeMap::new();
        coeffs.insert(0, value.clone());
        Self::new(value.nrows(), coeffs, grid_size)
    }

    pub fn identity(dim: usize, grid_size: usize) -> Result<Self> {
        Self::constant(&CMat::identity(dim, dim), grid_size)
    }

    /// `f = P P^*` for the moving-average factor `P(λ) = Σ_u d(u) e^{-iuλ}`
    /// (each `d(u)` is `K × M`).
    pub fn from_moving_average(d: &[CMat], grid_size: usize) -> Result<Self> {
        let Some(first) = d.first() else {
            return Err(Error::InvalidArgument(
                "moving average needs at least one coefficient".into(),
            ));
        };
        let k = first.nrows();
        let mut coeffs = BTreeMap::new();
        let q = d.len() as i64;
        for m in -(q - 1)..q {
            let mut acc = CMat::zeros(k, k);
            for u in 0..q {
                let v = u + m;
                if (0..q).contains(&v) {
                    acc += &d[u as usize] * d[v as usize].adjoint();
                }
            }
            coeffs.insert(m, acc);
        }
        Self::new(k, coeffs, grid_size)
    }

    /// Density whose grid values are `values`, keeping lags `|m| <= max_lag`
    /// (default `G/2 - 1`), symmetrised, with trailing lags below
    /// `prune_rel · ‖F(0)‖_max` dropped.
    pub fn from_grid(
        values: &GridMatrixFunction,
        max_lag: Option<usize>,
        prune_rel: f64,
    ) -> Result<Self> {
        let grid = values.grid_size();
        if values.rows() != values.cols() {
            return Err(Error::DimensionMismatch(
                "density values must be square".into(),
            ));
        }
        let max_lag = max_lag.unwrap_or(grid / 2 - 1).min(grid / 2 - 1) as i64;
        let table = values.lag_table();
        let f0 = linalg::hermitian_part(table.get(0)?);
        let scale = linalg::max_abs(&f0).max(f64::MIN_POSITIVE);
        let mut keep = 0;
        let mut half = vec![f0];
        for m in 1..=max_lag {
            let c = (table.get(m)? + table.get(-m)?.adjoint()) * C64::new(0.5, 0.0);
            if linalg::max_abs(&c) > prune_rel * scale {
                keep = m as usize;
            }
            half.push(c);
        }
        half.truncate(keep + 1);
        Self::from_nonnegative_lags(values.rows(), &half, grid)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn grid_size(&self) -> usize {
        self.grid_size
    }

    pub fn coeffs(&self) -> &BTreeMap<i64, CMat> {
        &self.coeffs
    }

    /// `F(m)`, zero when not stored.
    pub fn coeff(&self, m: i64) -> CMat {
        self.coeffs
            .get(&m)
            .cloned()
            .unwrap_or_else(|| CMat::zeros(self.dim, self.dim))
    }

    pub fn max_lag(&self) -> usize {
        self.coeffs
            .keys()
            .map(|m| m.unsigned_abs() as usize)
            .max()
            .unwrap_or(0)
    }

    /// Same coefficients on a different grid.
    pub fn with_grid(&self, grid_size: usize) -> Result<Self> {
        Self::new(self.dim, self.coeffs.clone(), grid_size)
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            dim: self.dim,
            coeffs: self
                .coeffs
                .iter()
                .map(|(&m, c)| (m, c * C64::new(s, 0.0)))
                .collect(),
            grid_size: self.grid_size,
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.dim != other.dim || self.grid_size != other.grid_size {
            return Err(Error::DimensionMismatch(
                "densities differ in K or grid size".into(),
            ));
        }
        let mut coeffs = self.coeffs.clone();
        for (&m, c) in &other.coeffs {
            *coeffs
                .entry(m)
                .or_insert_with(|| CMat::zeros(self.dim, self.dim)) += c;
        }
        Self::new(self.dim, coeffs, self.grid_size)
    }

    /// Total power `(1/2π)∫ Tr f dλ = Re Tr F(0)`.
    pub fn power(&self) -> f64 {
        self.coeff(0).trace().re
    }

    /// Covariance `R(j) = E ζ_{l+j} ζ_l^* = F(-j)`.
    pub fn covariance(&self, j: i64) -> CMat {
        self.coeff(-j)
    }

    pub fn evaluate_on_grid(&self) -> GridMatrixFunction {
        evaluate_lagged(
            self.coeffs.iter().map(|(&m, c)| (m, c)),
            self.dim,
            self.dim,
            self.grid_size,
        )
        .expect("lags and shapes validated at construction")
    }
}

/// Evaluates `f` on the grid.
pub fn evaluate_on_grid(f: &SpectralDensity) -> GridMatrixFunction {
    f.evaluate_on_grid()
}

/// `(1/2π)∫ M(λ) e^{-ijλ} dλ` on the grid.
pub fn fourier_coefficient(m: &GridMatrixFunction, lag: i64) -> Result<CMat> {
    m.fourier_coefficient(lag)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MinimalityReport {
    /// `∫_{-π}^{π} Tr[(f+g)^{-1}] dλ` (infinite when a node fails).
    pub integral: f64,
    /// Largest grid condition number of `f + g`.
    pub max_condition: f64,
    /// First node that failed, if any.
    pub worst_node: Option<usize>,
    pub pass: bool,
}

/// Minimality diagnostics for `f + g` (or `f` alone when `g` is absent).
pub fn check_minimality(
    f: &SpectralDensity,
    g: Option<&SpectralDensity>,
    cond_threshold: f64,
) -> Result<MinimalityReport> {
    let sum = match g {
        Some(g) => {
            if g.dim() != f.dim() || g.grid_size() != f.grid_size() {
                return Err(Error::InvalidArgument(format!(
                    "f is {}x{} on {} nodes, g is {}x{} on {} nodes",
                    f.dim(),
                    f.dim(),
                    f.grid_size(),
                    g.dim(),
                    g.dim(),
                    g.grid_size()
                )));
            }
            f.add(g)?
        }
        None => f.clone(),
    };
    Ok(minimality_of_grid(&sum.evaluate_on_grid(), cond_threshold))
}

pub(crate) fn minimality_of_grid(
    values: &GridMatrixFunction,
    cond_threshold: f64,
) -> MinimalityReport {
    let grid = values.grid_size();
    let mut integral = 0.0;
    let mut max_condition: f64 = 1.0;
    let mut worst_node = None;
    for (g, v) in values.values().iter().enumerate() {
        let eig = linalg::hermitian_eigenvalues(v);
        let lo = eig[0];
        let hi = eig[eig.len() - 1];
        let cond = if lo > 0.0 { hi / lo } else { f64::INFINITY };
        if cond > max_condition {
            max_condition = cond;
        }
        if !(cond <= cond_threshold) {
            worst_node.get_or_insert(g);
            continue;
        }
        integral += eig.iter().map(|e| 1.0 / e).sum::<f64>();
    }
    let pass = worst_node.is_none();
    MinimalityReport {
        integral: if pass {
            integral * 2.0 * PI / grid as f64
        } else {
            f64::INFINITY
        },
        max_condition,
        worst_node,
        pass,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DensityReport {
    /// Lags whose coefficient is not the adjoint of the one at `-m`.
    pub hermitian_violations: Vec<i64>,
    pub hermitian: bool,
    /// Smallest eigenvalue of the Hermitian part over the grid.
    pub min_eigenvalue: f64,
    pub min_node: usize,
    pub min_lambda: f64,
    pub psd: bool,
}

impl DensityReport {
    pub fn valid(&self) -> bool {
        self.hermitian && self.psd
    }

    /// Error describing the first violation, if any.
    pub fn to_error(&self) -> Option<Error> {
        if !self.hermitian {
            Some(Error::InvalidInput(format!(
                "density coefficients are not Hermitian-symmetric at lags {:?}",
                self.hermitian_violations
            )))
        } else if !self.psd {
            Some(Error::NotPsd {
                node: self.min_node,
                lambda: self.min_lambda,
                min_eigenvalue: self.min_eigenvalue,
            })
        } else {
            None
        }
    }
}

/// Checks Hermitian symmetry of the coefficients and positive
/// semidefiniteness on the grid. Violations are reported, never raised.
pub fn validate_density(f: &SpectralDensity) -> DensityReport {
    let scale = f
        .coeffs()
        .values()
        .map(linalg::max_abs)
        .fold(0.0, f64::max)
        .max(1.0);
    let mut hermitian_violations = Vec::new();
    for (&m, c) in f.coeffs() {
        if m < 0 && f.coeffs().contains_key(&-m) {
            continue;
        }
        let partner = f.coeff(-m);
        if linalg::max_abs(&(c - partner.adjoint())) > 1e-12 * scale {
            hermitian_violations.push(m);
        }
    }
    let values = f.evaluate_on_grid();
    let mut min_eigenvalue = f64::INFINITY;
    let mut min_node = 0;
    for (g, v) in values.values().iter().enumerate() {
        let lo = linalg::hermitian_eigenvalues(v)[0];
        if lo < min_eigenvalue {
            min_eigenvalue = lo;
            min_node = g;
        }
    }
    DensityReport {
        hermitian: hermitian_violations.is_empty(),
        hermitian_violations,
        min_eigenvalue,
        min_node,
        min_lambda: grid_node(min_node, f.grid_size()),
        psd: min_eigenvalue >= -PSD_TOLERANCE,
    }
}
