use super::{Certificate, LeastFavorableResult};
use crate::error::{Error, Result};
use crate::estimators::{self, EstimateSolution, SolveDiagnostics};
use crate::factorization::{self, spectral_factorize};
use crate::lift::{FunctionalWeights, Horizon};
use crate::linalg::{self, DEFAULT_COND_LIMIT};
use crate::spectral::{self, GridMatrixFunction, SpectralDensity};
use crate::{CMat, CVec};

/// Relative pruning level for the coefficients of `f0`.
const PRUNE: f64 = 1e-17;

/// Least-favorable autoregressive density for interpolation in the class of
/// densities whose inverse has the lag coefficients `P(0), …, P(M)`.
///
/// For `M >= N` the system `B^0 α = a` uses `B^0(l,j) = P(l-j)^T` directly.
/// For `M < N` (scalar only) the missing `P(M+1), …, P(N)` are chosen so that
/// the solution vanishes beyond `M`: the first `M+1` equations give `α`, the
/// rest give each new `P(l)` in turn. Then `f0 = (Σ P(m) e^{imλ})^{-1}`.
pub fn least_favorable_dm_interpolation(
    constraints: &[CMat],
    weights: &FunctionalWeights,
    grid: usize,
) -> Result<LeastFavorableResult> {
    let Horizon::Interpolation(n) = weights.horizon() else {
        return Err(Error::InvalidArgument(format!(
            "the moment class is solved for interpolation weights, got {}",
            weights.horizon().name()
        )));
    };
    let Some(p0) = constraints.first() else {
        return Err(Error::InvalidArgument("need at least P(0)".into()));
    };
    let k = p0.nrows();
    if weights.dim() != k || constraints.iter().any(|c| c.shape() != (k, k)) {
        return Err(Error::DimensionMismatch(format!(
            "constraints and weights must share K = {k}"
        )));
    }
    let m = constraints.len() - 1;
    check_definite(&SpectralDensity::from_nonnegative_lags(
        k,
        constraints,
        grid,
    )?)?;

    let mut p: Vec<CMat> = constraints.to_vec();
    let alpha: CMat;
    if m >= n {
        let b = lag_matrix(&p, n + 1);
        let a = weights.stacked(n + 1);
        let (x, _) = linalg::solve_hermitian(
            &b,
            &CMat::from_column_slice(a.len(), 1, a.as_slice()),
            DEFAULT_COND_LIMIT,
        )?;
        alpha = x;
    } else if k == 1 {
        let a = weights.stacked(n + 1);
        let head = lag_matrix(&p, m + 1);
        let rhs = CMat::from_column_slice(m + 1, 1, &a.as_slice()[..m + 1]);
        let (x, _) = linalg::solve_hermitian(&head, &rhs, DEFAULT_COND_LIMIT)?;
        if x[(0, 0)].norm() < 1e-14 {
            return Err(Error::InfeasibleClass(
                "leading autoregressive coefficient vanishes; constraints cannot be extended"
                    .into(),
            ));
        }
        for l in m + 1..=n {
            let mut acc = a[l];
            for j in 1..=m {
                acc -= lag(&p, l as i64 - j as i64)[(0, 0)] * x[(j, 0)];
            }
            p.push(CMat::from_element(1, 1, acc / x[(0, 0)]));
        }
        let mut full = CMat::zeros(n + 1, 1);
        full.view_mut((0, 0), (m + 1, 1)).copy_from(&x);
        alpha = full;
        check_definite(&SpectralDensity::from_nonnegative_lags(1, &p, grid)?)?;
    } else {
        return Err(Error::Unsupported(format!(
            "moment class with M = {m} < N = {n} is only supported for K = 1"
        )));
    }

    let a = weights.stacked(n + 1);
    let a_mat = CMat::from_column_slice(a.len(), 1, a.as_slice());
    let b_full = lag_matrix(&p, n + 1);
    let system_residual = linalg::max_abs(&(&b_full * &alpha - &a_mat));
    let minimax_mse = (a_mat.adjoint() * &alpha)[(0, 0)].re;

    let poly = SpectralDensity::from_nonnegative_lags(k, &p, grid)?;
    let poly_grid = poly.evaluate_on_grid();
    let f0_values = poly_grid.inverse(DEFAULT_COND_LIMIT)?;
    let f0 = SpectralDensity::from_grid(&f0_values, None, PRUNE)?;
    let f0_grid = f0.evaluate_on_grid();
    let inv_tab = f0_grid.inverse(DEFAULT_COND_LIMIT)?.lag_table();
    let mut constraint_residual: f64 = 0.0;
    for (mm, pm) in p.iter().enumerate().take(m + 1) {
        constraint_residual =
            constraint_residual.max(linalg::max_abs(&(inv_tab.get(mm as i64)? - pm)));
    }
    let factor = match spectral_factorize(
        &poly,
        factorization::DEFAULT_TOLERANCE,
        factorization::DEFAULT_MAX_ITER,
    ) {
        Ok(fac) => Some(fac),
        Err(err) => {
            log::warn!("autoregressive factor of the constraint polynomial unavailable: {err}");
            None
        }
    };

    let alpha_blocks = estimators_unstack(&alpha, k);
    let a_grid = estimators::target_on_grid(weights, grid)?;
    let c_grid = spectral::evaluate_vector_poly(
        alpha_blocks.iter().enumerate().map(|(j, v)| (j as i64, v)),
        k,
        grid,
    )?;
    let h = GridMatrixFunction::from_fn(grid, k, 1, |i, _| {
        a_grid.value(i) - poly_grid.value(i).transpose() * c_grid.value(i)
    })?;
    let diagnostics = SolveDiagnostics {
        condition_estimate: 1.0,
        backward_residual: system_residual,
        truncation: None,
        truncation_converged: true,
        mse_quadrature: estimators::mse_on_grid(&h, &a_grid, &f0_grid, None),
    };
    let h0 = EstimateSolution::assemble(
        weights.horizon(),
        h,
        alpha_blocks.clone(),
        minimax_mse,
        diagnostics,
    );
    Ok(LeastFavorableResult {
        f0,
        f0_grid,
        g0: None,
        g0_grid: None,
        factor,
        certificate: Certificate::Moments {
            alpha: alpha_blocks,
            constraint_residual,
            system_residual,
            constraints: p,
        },
        minimax_mse,
        h0,
        certified: true,
    })
}

fn lag(p: &[CMat], l: i64) -> CMat {
    if l >= 0 {
        p[l as usize].clone()
    } else {
        p[(-l) as usize].adjoint()
    }
}

/// Block matrix with blocks `P(l-j)^T`, `l, j < n`.
fn lag_matrix(p: &[CMat], n: usize) -> CMat {
    let k = p[0].nrows();
    let mut b = CMat::zeros(n * k, n * k);
    for l in 0..n {
        for j in 0..n {
            b.view_mut((l * k, j * k), (k, k))
                .copy_from(&lag(p, l as i64 - j as i64).transpose());
        }
    }
    b
}

fn check_definite(poly: &SpectralDensity) -> Result<()> {
    let values = poly.evaluate_on_grid();
    for (g, v) in values.values().iter().enumerate() {
        let eig = linalg::hermitian_eigenvalues(v);
        let hi = eig[eig.len() - 1].abs().max(f64::MIN_POSITIVE);
        if eig[0] <= 1e-12 * hi {
            return Err(Error::InfeasibleClass(format!(
                "constraint polynomial is not positive definite at grid node {g} (lambda = {:.6}, min eigenvalue {:.3e})",
                values.lambda(g),
                eig[0]
            )));
        }
    }
    Ok(())
}

fn estimators_unstack(x: &CMat, k: usize) -> Vec<CVec> {
    (0..x.nrows() / k)
        .map(|j| CVec::from_iterator(k, (0..k).map(|r| x[(j * k + r, 0)])))
        .collect()
}
