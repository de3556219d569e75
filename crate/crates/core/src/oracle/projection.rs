use nalgebra::Cholesky;

use super::{covariances_from_density, CovarianceTable};
use crate::error::{Error, Result};
use crate::lift::{FunctionalWeights, Horizon};
use crate::linalg;
use crate::spectral::SpectralDensity;
use crate::{CMat, C64};

#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionResult {
    pub mse: f64,
    pub window: usize,
    pub observations: usize,
    /// Ratio of extreme Cholesky pivots squared; a cheap conditioning hint.
    pub pivot_ratio: f64,
    pub converged: bool,
}

/// Observation block indices for a window of `w` blocks on each open side.
fn observation_indices(horizon: Horizon, w: usize) -> Vec<i64> {
    let w = w as i64;
    match horizon {
        Horizon::Interpolation(n) => (-w..0).chain(n as i64 + 1..=n as i64 + w).collect(),
        Horizon::Extrapolation | Horizon::ExtrapolationFinite(_) => (-w..0).collect(),
        Horizon::Filtering => (-w..=0).collect(),
    }
}

fn target_index(horizon: Horizon, j: usize) -> i64 {
    if horizon == Horizon::Filtering {
        -(j as i64)
    } else {
        j as i64
    }
}

/// Best linear estimate of the functional from the task's observations in a
/// window of `w` blocks, by the normal equations `Γ w = b` with
/// `Γ[t,s] = R_y(s-t)^T` and `b[t] = Σ_j R_ζ(t_j - t)^T ā_j`.
pub fn time_domain_projection(
    f: &SpectralDensity,
    g: Option<&SpectralDensity>,
    weights: &FunctionalWeights,
    window: usize,
) -> Result<ProjectionResult> {
    let horizon = weights.horizon();
    let k = f.dim();
    if weights.dim() != k {
        return Err(Error::DimensionMismatch(
            "weights and density differ in K".into(),
        ));
    }
    let obs = observation_indices(horizon, window);
    let targets: Vec<(i64, &crate::CVec)> = weights
        .blocks()
        .iter()
        .enumerate()
        .map(|(j, a)| (target_index(horizon, j), a))
        .collect();
    let all = obs.iter().copied().chain(targets.iter().map(|t| t.0));
    let (lo, hi) = all.fold((i64::MAX, i64::MIN), |(lo, hi), t| (lo.min(t), hi.max(t)));
    let span = (hi - lo) as usize;
    let rz = covariances_from_density(f, span)?;
    let ry = match g {
        Some(g) => {
            let rg = covariances_from_density(g, span)?;
            CovarianceTable::new(
                (0..=span as i64)
                    .map(|j| Ok(rz.get(j)? + rg.get(j)?))
                    .collect::<Result<_>>()?,
            )?
        }
        None => rz.clone(),
    };

    let n = obs.len() * k;
    let mut gamma = CMat::zeros(n, n);
    for (ti, &t) in obs.iter().enumerate() {
        for (si, &s) in obs.iter().enumerate() {
            gamma
                .view_mut((ti * k, si * k), (k, k))
                .copy_from(&ry.get(s - t)?.transpose());
        }
    }
    let mut b = CMat::zeros(n, 1);
    for (ti, &t) in obs.iter().enumerate() {
        let mut acc = CMat::zeros(k, 1);
        for &(tj, a) in &targets {
            acc += rz.get(tj - t)?.transpose() * CMat::from_column_slice(k, 1, a.as_slice());
        }
        b.view_mut((ti * k, 0), (k, 1)).copy_from(&acc);
    }
    let mut var = 0.0;
    for &(tj, aj) in &targets {
        for &(tl, al) in &targets {
            let aj = CMat::from_column_slice(k, 1, aj.as_slice());
            let al = linalg::conj(&CMat::from_column_slice(k, 1, al.as_slice()));
            var += (aj.transpose() * rz.get(tj - tl)? * al)[(0, 0)].re;
        }
    }
    let chol = Cholesky::new(linalg::hermitian_part(&gamma)).ok_or_else(|| {
        Error::IllPosed("observation covariance is singular; regularization refused".into())
    })?;
    let diag: Vec<f64> = chol.l_dirty().diagonal().iter().map(|z| z.re).collect();
    let dmin = diag.iter().copied().fold(f64::INFINITY, f64::min);
    let dmax = diag.iter().copied().fold(0.0, f64::max);
    let pivot_ratio = (dmax / dmin).powi(2);
    if !(dmin > 0.0) || pivot_ratio > 1e14 {
        return Err(Error::IllPosed(format!(
            "observation covariance is numerically singular (pivot ratio {pivot_ratio:.3e}); regularization refused"
        )));
    }
    let w = chol.solve(&b);
    let explained: C64 = (w.transpose() * linalg::conj(&b))[(0, 0)];
    Ok(ProjectionResult {
        mse: (var - explained.re).max(0.0),
        window,
        observations: obs.len(),
        pivot_ratio,
        converged: true,
    })
}

/// Doubles the window from `start` until the mse changes by less than
/// `rel_tol` (relative), or the window reaches `max_window`.
pub fn converged_projection(
    f: &SpectralDensity,
    g: Option<&SpectralDensity>,
    weights: &FunctionalWeights,
    start: usize,
    max_window: usize,
    rel_tol: f64,
) -> Result<ProjectionResult> {
    let mut w = start.max(1);
    let mut prev = time_domain_projection(f, g, weights, w)?;
    while w < max_window {
        w = (2 * w).min(max_window);
        let mut next = time_domain_projection(f, g, weights, w)?;
        let settled =
            (next.mse - prev.mse).abs() <= rel_tol * next.mse.abs().max(f64::MIN_POSITIVE);
        next.converged = settled;
        prev = next;
        if settled {
            return Ok(prev);
        }
    }
    prev.converged = prev.mse == 0.0;
    Ok(prev)
}
