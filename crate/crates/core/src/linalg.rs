//! Dense complex linear algebra helpers on top of `nalgebra`.

use nalgebra::{Cholesky, SymmetricEigen};

use crate::error::{Error, Result};
use crate::{CMat, C64};

/// Relative condition number above which solves are refused.
pub const DEFAULT_COND_LIMIT: f64 = 1e12;

/// Diagnostics from [`solve_hermitian`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveReport {
    /// Estimate of the 1-norm condition number.
    pub condition_estimate: f64,
    /// `‖A x − b‖_max / (‖A‖_1 ‖x‖_max + ‖b‖_max)` after refinement.
    pub backward_residual: f64,
    pub refinement_steps: usize,
}

pub fn zeros(rows: usize, cols: usize) -> CMat {
    CMat::zeros(rows, cols)
}

pub fn identity(n: usize) -> CMat {
    CMat::identity(n, n)
}

/// Elementwise conjugate.
pub fn conj(m: &CMat) -> CMat {
    m.map(|z| z.conj())
}

pub fn hermitian_part(m: &CMat) -> CMat {
    (m + m.adjoint()).scale(0.5)
}

/// Largest absolute entry.
pub fn max_abs(m: &CMat) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

pub fn norm1(m: &CMat) -> f64 {
    (0..m.ncols())
        .map(|c| m.column(c).iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Eigen-decomposition of the Hermitian part of `m`, eigenvalues ascending.
pub fn hermitian_eigen(m: &CMat) -> (Vec<f64>, CMat) {
    let n = m.nrows();
    if n == 0 {
        return (Vec::new(), zeros(0, 0));
    }
    let eig = SymmetricEigen::new(hermitian_part(m));
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    (values, vectors)
}

pub fn hermitian_eigenvalues(m: &CMat) -> Vec<f64> {
    let n = m.nrows();
    if n == 1 {
        return vec![m[(0, 0)].re];
    }
    let mut v: Vec<f64> = SymmetricEigen::new(hermitian_part(m))
        .eigenvalues
        .iter()
        .copied()
        .collect();
    v.sort_by(f64::total_cmp);
    v
}

/// Applies `map` to the eigenvalues of a Hermitian matrix.
pub fn hermitian_function(m: &CMat, map: impl Fn(f64) -> f64) -> CMat {
    let (values, vectors) = hermitian_eigen(m);
    let n = values.len();
    let mut scaled = vectors.clone();
    for (c, &lam) in values.iter().enumerate() {
        let s = map(lam);
        for r in 0..n {
            scaled[(r, c)] *= s;
        }
    }
    scaled * vectors.adjoint()
}

/// Principal square root of a Hermitian PSD matrix (negative round-off
/// eigenvalues are clipped to zero).
pub fn sqrt_psd(m: &CMat) -> CMat {
    hermitian_function(m, |x| x.max(0.0).sqrt())
}

/// Lower Cholesky factor of a Hermitian positive definite matrix.
pub fn cholesky_lower(m: &CMat) -> Option<CMat> {
    Cholesky::new(hermitian_part(m)).map(|c| c.l())
}

/// Singular-value condition number of a square matrix (infinite if singular).
pub fn condition_number(m: &CMat) -> f64 {
    if m.nrows() == 1 {
        return if m[(0, 0)].norm() > 0.0 {
            1.0
        } else {
            f64::INFINITY
        };
    }
    let sv = m.clone().singular_values();
    let max = sv.iter().copied().fold(0.0, f64::max);
    let min = sv.iter().copied().fold(f64::INFINITY, f64::min);
    if min > 0.0 {
        max / min
    } else {
        f64::INFINITY
    }
}

/// Inverse of a small square matrix, refusing nodes whose condition number
/// exceeds `cond_limit`.
pub fn inverse_checked(m: &CMat, cond_limit: f64) -> Option<CMat> {
    if m.nrows() == 1 {
        let z = m[(0, 0)];
        let scale = z.norm();
        return if scale > 0.0 && scale.is_finite() {
            Some(CMat::from_element(1, 1, z.inv()))
        } else {
            None
        };
    }
    if condition_number(m) > cond_limit {
        return None;
    }
    m.clone().try_inverse()
}

/// Moore-Penrose left inverse `(P^* P)^{-1} P^*` of a full-column-rank matrix.
pub fn left_inverse(p: &CMat, cond_limit: f64) -> Option<CMat> {
    if p.nrows() == p.ncols() {
        return inverse_checked(p, cond_limit);
    }
    let gram = p.adjoint() * p;
    inverse_checked(&gram, cond_limit).map(|g| g * p.adjoint())
}

/// Solves `A X = B` for Hermitian `A` with partial-pivoting LU, up to three
/// steps of iterative refinement, and a Hager-Higham condition estimate.
/// Systems whose estimated condition number exceeds `cond_limit` are refused.
pub fn solve_hermitian(a: &CMat, b: &CMat, cond_limit: f64) -> Result<(CMat, SolveReport)> {
    let n = a.nrows();
    if a.ncols() != n || b.nrows() != n {
        return Err(Error::DimensionMismatch(format!(
            "system matrix {}x{} with right-hand side {}x{}",
            a.nrows(),
            a.ncols(),
            b.nrows(),
            b.ncols()
        )));
    }
    if n == 0 {
        return Ok((
            zeros(0, b.ncols()),
            SolveReport {
                condition_estimate: 1.0,
                backward_residual: 0.0,
                refinement_steps: 0,
            },
        ));
    }
    let anorm = norm1(a);
    if anorm == 0.0 || !anorm.is_finite() {
        return Err(Error::IllPosed(
            "system matrix is zero or non-finite".into(),
        ));
    }
    let lu = a.clone().lu();
    let solve = |rhs: &CMat| -> Option<CMat> { lu.solve(rhs) };

    let inv_norm = hager_inverse_norm1(n, &solve);
    let cond = match inv_norm {
        Some(v) => anorm * v,
        None => f64::INFINITY,
    };
    if !(cond <= cond_limit) {
        return Err(Error::IllPosed(format!(
            "system of order {n} has estimated condition number {cond:.3e} (limit {cond_limit:.1e})"
        )));
    }
    let mut x = solve(b).ok_or_else(|| Error::IllPosed("singular system matrix".into()))?;
    let bnorm = max_abs(b);
    let backward =
        |x: &CMat| max_abs(&(b - a * x)) / (anorm * max_abs(x) + bnorm).max(f64::MIN_POSITIVE);
    let mut residual = backward(&x);
    let mut steps = 0;
    while steps < 3 && residual > 1e-15 {
        let r = b - a * &x;
        let Some(dx) = solve(&r) else { break };
        let candidate = &x + dx;
        let next = backward(&candidate);
        steps += 1;
        if next >= residual {
            break;
        }
        x = candidate;
        residual = next;
    }
    Ok((
        x,
        SolveReport {
            condition_estimate: cond,
            backward_residual: residual,
            refinement_steps: steps,
        },
    ))
}

/// 1-norm estimate of `A^{-1}` for Hermitian `A`, given a solver.
fn hager_inverse_norm1(n: usize, solve: &impl Fn(&CMat) -> Option<CMat>) -> Option<f64> {
    let mut x = CMat::from_element(n, 1, C64::new(1.0 / n as f64, 0.0));
    let mut est = 0.0_f64;
    for iter in 0..5 {
        let y = solve(&x)?;
        let ynorm: f64 = y.iter().map(|z| z.norm()).sum();
        if !ynorm.is_finite() {
            return None;
        }
        if iter > 0 && ynorm <= est {
            break;
        }
        est = ynorm;
        let xi = y.map(|z| {
            if z.norm() > 0.0 {
                z / z.norm()
            } else {
                C64::new(1.0, 0.0)
            }
        });
        // A is Hermitian, so the adjoint solve is the same solve.
        let z = solve(&xi)?;
        let (jmax, zmax) = z
            .iter()
            .enumerate()
            .map(|(i, v)| (i, v.norm()))
            .fold((0, -1.0), |acc, v| if v.1 > acc.1 { v } else { acc });
        let ztx = (z.adjoint() * &x)[(0, 0)].re;
        if iter > 0 && zmax <= ztx {
            break;
        }
        x = zeros(n, 1);
        x[(jmax, 0)] = C64::new(1.0, 0.0);
    }
    let alt = CMat::from_fn(n, 1, |i, _| {
        let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
        let t = if n > 1 {
            i as f64 / (n - 1) as f64
        } else {
            0.0
        };
        C64::new(sign * (1.0 + t), 0.0)
    });
    let y = solve(&alt)?;
    let alt_est = 2.0 * y.iter().map(|z| z.norm()).sum::<f64>() / (3.0 * n as f64);
    Some(est.max(alt_est))
}
