//! Causal spectral factorization `f = P P^*`, `P(λ) = Σ_{u>=0} d(u) e^{-iuλ}`,
//! and the extrapolation formulas built on it.

use crate::error::{Error, Result};
use crate::estimators::{self, EstimateSolution, SolveDiagnostics};
use crate::lift::{FunctionalWeights, Horizon};
use crate::linalg;
use crate::spectral::{self, GridMatrixFunction, SpectralDensity, DEFAULT_COND_THRESHOLD};
use crate::{CMat, CVec, C64};

pub const DEFAULT_TOLERANCE: f64 = 1e-10;
pub const DEFAULT_MAX_ITER: usize = 100;
/// Largest acceptable `‖QP - I‖` per node.
pub const LEFT_INVERSE_TOLERANCE: f64 = 1e-10;

/// Moving-average coefficients of a causal factor.
#[derive(Debug, Clone, PartialEq)]
pub struct Factorization {
    d: Vec<CMat>,
    /// `max_g ‖P P^* - f‖_max` at the returned coefficients.
    pub residual: f64,
    pub iterations: usize,
    /// Largest coefficient of `P` at a positive lag before truncation.
    pub anticausal_leakage: f64,
    grid_size: usize,
}

impl Factorization {
    /// Factor given directly by its coefficients `d(0), d(1), …` (each
    /// `K × M`).
    pub fn from_coefficients(d: Vec<CMat>, grid_size: usize) -> Result<Self> {
        let Some(first) = d.first() else {
            return Err(Error::InvalidArgument(
                "factor needs at least one coefficient".into(),
            ));
        };
        let shape = first.shape();
        if d.iter().any(|c| c.shape() != shape) {
            return Err(Error::DimensionMismatch(
                "factor coefficients differ in shape".into(),
            ));
        }
        if d.len() >= grid_size / 2 {
            return Err(Error::Aliasing {
                lag: d.len() as i64,
                grid: grid_size,
            });
        }
        Ok(Self {
            d,
            residual: 0.0,
            iterations: 0,
            anticausal_leakage: 0.0,
            grid_size,
        })
    }

    pub fn coefficients(&self) -> &[CMat] {
        &self.d
    }

    /// `K`.
    pub fn dim(&self) -> usize {
        self.d[0].nrows()
    }

    /// `M`, the number of innovation components.
    pub fn multiplicity(&self) -> usize {
        self.d[0].ncols()
    }

    pub fn grid_size(&self) -> usize {
        self.grid_size
    }

    /// `d(u)`, zero beyond the stored coefficients.
    pub fn coefficient(&self, u: usize) -> CMat {
        self.d
            .get(u)
            .cloned()
            .unwrap_or_else(|| CMat::zeros(self.dim(), self.multiplicity()))
    }

    /// `P(λ_g)`.
    pub fn p_grid(&self) -> GridMatrixFunction {
        spectral::evaluate_lagged(
            self.d.iter().enumerate().map(|(u, c)| (-(u as i64), c)),
            self.dim(),
            self.multiplicity(),
            self.grid_size,
        )
        .expect("coefficient count checked against the grid")
    }

    /// `P P^*` as a density.
    pub fn density(&self) -> Result<SpectralDensity> {
        SpectralDensity::from_moving_average(&self.d, self.grid_size)
    }

    /// Total power `Σ_u ‖d(u)‖²`.
    pub fn power(&self) -> f64 {
        self.d.iter().map(|c| c.norm_squared()).sum()
    }
}

/// Wilson's Newton iteration for the causal factor of a full-rank density.
///
/// Starts from the lower Cholesky factor of `F(0)`. Each step forms
/// `M = P^{-1} f P^{-*}` and updates `P ← P (I + X)` with `X` the causal
/// half of `M - I` (half the diagonal at lag zero, strict lower part
/// otherwise), which keeps `d(0)` lower triangular with positive diagonal.
pub fn spectral_factorize(f: &SpectralDensity, tol: f64, max_iter: usize) -> Result<Factorization> {
    let k = f.dim();
    let grid = f.grid_size();
    let report = spectral::validate_density(f);
    if let Some(err) = report.to_error() {
        return Err(err);
    }
    let f_grid = f.evaluate_on_grid();
    for (g, v) in f_grid.values().iter().enumerate() {
        let eig = linalg::hermitian_eigenvalues(v);
        let hi = eig[k - 1];
        if !(eig[0] > hi / DEFAULT_COND_THRESHOLD) || hi <= 0.0 {
            return Err(Error::UnsupportedMultiplicity(format!(
                "density is rank deficient at grid node {g} (lambda = {:.6}); only full-rank factors are supported, input is possibly non-regular",
                f_grid.lambda(g)
            )));
        }
    }
    let l0 = linalg::cholesky_lower(&f.coeff(0)).ok_or_else(|| {
        Error::UnsupportedMultiplicity("zero-lag coefficient is not positive definite".into())
    })?;
    let mut p = GridMatrixFunction::constant(&l0, grid)?;
    let eye = CMat::identity(k, k);
    let mut residual = f64::INFINITY;
    let mut iterations = 0;
    while iterations <= max_iter {
        residual = p
            .values()
            .iter()
            .zip(f_grid.values())
            .map(|(pv, fv)| linalg::max_abs(&(pv * pv.adjoint() - fv)))
            .fold(0.0, f64::max);
        if residual < tol || iterations == max_iter {
            break;
        }
        iterations += 1;
        let pinv = p.inverse(f64::INFINITY).map_err(|_| Error::Convergence {
            iterations,
            residual,
        })?;
        let m = GridMatrixFunction::from_fn(grid, k, k, |i, _| {
            pinv.value(i) * f_grid.value(i) * pinv.value(i).adjoint()
        })?;
        let tab = m.lag_table();
        let c0 = tab.get(0)? - &eye;
        let mut x0 = CMat::zeros(k, k);
        for r in 0..k {
            for c in 0..r {
                x0[(r, c)] = c0[(r, c)];
            }
            x0[(r, r)] = C64::new(0.5 * c0[(r, r)].re, 0.0);
        }
        let half = (grid / 2) as i64;
        let mut terms: Vec<(i64, CMat)> = vec![(0, x0)];
        for j in 1..half {
            terms.push((-j, tab.get(-j)?.clone()));
        }
        let x = spectral::evaluate_lagged(terms.iter().map(|(j, c)| (*j, c)), k, k, grid)?;
        p = p.zip_map(&x, |pv, xv| pv * (&eye + xv))?;
    }
    if !(residual < tol) {
        return Err(Error::Convergence {
            iterations,
            residual,
        });
    }
    let tab = p.lag_table();
    let half = (grid / 2) as i64;
    let anticausal_leakage = (1..half)
        .map(|j| linalg::max_abs(tab.get(j).expect("in range")))
        .fold(0.0, f64::max);
    let mut d: Vec<CMat> = (0..half)
        .map(|u| tab.get(-u).expect("in range").clone())
        .collect();
    let scale = linalg::max_abs(&d[0]);
    let keep = d
        .iter()
        .rposition(|c| linalg::max_abs(c) > 1e-14 * scale)
        .unwrap_or(0);
    let trimmed: Vec<CMat> = d[..=keep].to_vec();
    let trimmed_fact = Factorization::from_coefficients(trimmed, grid)?;
    let trimmed_residual = trimmed_fact
        .p_grid()
        .values()
        .iter()
        .zip(f_grid.values())
        .map(|(pv, fv)| linalg::max_abs(&(pv * pv.adjoint() - fv)))
        .fold(0.0, f64::max);
    if trimmed_residual < tol {
        d = trimmed_fact.d;
        residual = trimmed_residual;
    } else {
        d.truncate(grid / 2 - 1);
    }
    log::debug!(
        "factorization converged in {iterations} iterations, residual {residual:.3e}, {} lags",
        d.len()
    );
    Ok(Factorization {
        d,
        residual,
        iterations,
        anticausal_leakage,
        grid_size: grid,
    })
}

/// `Q(λ) = P(λ)^{-1}` (or the left inverse `(P^*P)^{-1}P^*` when `M < K`).
pub fn left_inverse_q(p: &Factorization) -> Result<GridMatrixFunction> {
    let pg = p.p_grid();
    let m = p.multiplicity();
    let eye = CMat::identity(m, m);
    let mut values = Vec::with_capacity(pg.grid_size());
    for (g, pv) in pg.values().iter().enumerate() {
        let q = linalg::left_inverse(pv, DEFAULT_COND_THRESHOLD).ok_or_else(|| {
            Error::SingularFactor {
                node: g,
                detail: format!("factor is singular at lambda = {:.6}", pg.lambda(g)),
            }
        })?;
        let err = linalg::max_abs(&(&q * pv - &eye));
        if err > LEFT_INVERSE_TOLERANCE {
            return Err(Error::SingularFactor {
                node: g,
                detail: format!(
                    "left inverse residual {err:.3e} at lambda = {:.6}",
                    pg.lambda(g)
                ),
            });
        }
        values.push(q);
    }
    GridMatrixFunction::new(values)
}

/// Noiseless extrapolation through the factor: `(Ad)_l = Σ_{j>=l} d(j-l)^T ā_j`,
/// `Δ = Σ_l ‖(Ad)_l‖²`, `h = A - Q^T S` with `S(λ) = Σ_l (Ad)_l e^{ilλ}`.
/// Exact for finitely many stored weight blocks.
pub fn extrapolate_factorized(
    fact: &Factorization,
    weights: &FunctionalWeights,
) -> Result<EstimateSolution> {
    match weights.horizon() {
        Horizon::Extrapolation | Horizon::ExtrapolationFinite(_) => {}
        other => {
            return Err(Error::InvalidArgument(format!(
                "factorized extrapolation needs extrapolation weights, got {}",
                other.name()
            )))
        }
    }
    if weights.dim() != fact.dim() {
        return Err(Error::DimensionMismatch(format!(
            "weights have K = {}, factor has K = {}",
            weights.dim(),
            fact.dim()
        )));
    }
    let grid = fact.grid_size();
    if weights.len() >= grid / 4 {
        return Err(Error::InvalidArgument(
            "too many weight blocks for the grid".into(),
        ));
    }
    let n = weights.len();
    let ad: Vec<CVec> = (0..n)
        .map(|l| {
            let mut acc = CMat::zeros(fact.multiplicity(), 1);
            for j in l..n {
                acc += fact.coefficient(j - l).transpose()
                    * estimators::vec_to_mat(&weights.blocks()[j]);
            }
            CVec::from_column_slice(acc.as_slice())
        })
        .collect();
    let mse: f64 = ad.iter().map(|v| v.norm_squared()).sum();
    let q = left_inverse_q(fact)?;
    let a_grid = estimators::target_on_grid(weights, grid)?;
    let s_grid = spectral::evaluate_vector_poly(
        ad.iter().enumerate().map(|(l, v)| (l as i64, v)),
        fact.multiplicity(),
        grid,
    )?;
    let h = GridMatrixFunction::from_fn(grid, fact.dim(), 1, |i, _| {
        a_grid.value(i) - q.value(i).transpose() * s_grid.value(i)
    })?;
    let f_grid = spectral::evaluate_lagged(
        fact.density()?.coeffs().iter().map(|(&m, c)| (m, c)),
        fact.dim(),
        fact.dim(),
        grid,
    )?;
    let diagnostics = SolveDiagnostics {
        condition_estimate: 1.0,
        backward_residual: fact.residual,
        truncation: None,
        truncation_converged: true,
        mse_quadrature: estimators::mse_on_grid(&h, &a_grid, &f_grid, None),
    };
    Ok(EstimateSolution::assemble(
        weights.horizon(),
        h,
        ad,
        mse,
        diagnostics,
    ))
}

/// [`extrapolate_factorized`] for the finite horizon `0…N`.
pub fn extrapolate_factorized_finite(
    fact: &Factorization,
    weights: &FunctionalWeights,
) -> Result<EstimateSolution> {
    match weights.horizon() {
        Horizon::ExtrapolationFinite(_) => extrapolate_factorized(fact, weights),
        other => Err(Error::InvalidArgument(format!(
            "finite extrapolation needs extrapolation-finite weights, got {}",
            other.name()
        ))),
    }
}
