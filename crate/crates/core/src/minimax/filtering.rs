use super::{Certificate, LeastFavorableResult};
use crate::error::{Error, Result};
use crate::estimators::{self, filter_on_grid, EstimateSolution, Truncation};
use crate::lift::{FunctionalWeights, Horizon};
use crate::linalg;
use crate::spectral::{self, GridMatrixFunction, SpectralDensity, DEFAULT_COND_THRESHOLD};
use crate::C64;

/// Residuals of the Lagrange relations for least-favorable filtering
/// densities in `D_0^2 × D_ε`, in the units of the relations themselves.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelationReport {
    /// `max ‖(gĀ + D̄)(A^T g + D^T) - α²(f+g)²‖` over the support of `f`.
    pub residual_45: f64,
    /// `max ‖(fĀ - D̄)(A^T f - D^T) - (β² + φ)(f+g)²‖` over the grid.
    pub residual_46: f64,
    /// Largest positive part of the first relation's left side minus its
    /// right side off the support of `f` (a first-order optimality check).
    pub kkt_45: f64,
    /// `max φ`; must not be positive.
    pub phi_max: f64,
    /// `max |φ|` where `Tr g > Tr (1-ε) g_2`.
    pub slackness: f64,
    /// `|(1/2π)∫ Tr f - P_ζ|`.
    pub power_f: f64,
    /// `|(1/2π)∫ Tr g - P_θ|`.
    pub power_g: f64,
    /// Fraction of grid nodes in the support of `f`.
    pub support_fraction: f64,
}

impl RelationReport {
    /// Worst of all residuals (with `φ` counted only when positive).
    pub fn worst(&self) -> f64 {
        [
            self.residual_45,
            self.residual_46,
            self.kkt_45,
            self.phi_max.max(0.0),
            self.slackness,
            self.power_f,
            self.power_g,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }

    pub fn phi_admissible(&self) -> bool {
        self.phi_max <= 0.0
    }
}

/// Checks the relations for a candidate `(f, g)` with multipliers `α², β²`
/// and `φ` given on the grid (length `G`). `D` is taken from the optimal
/// filter at `(f, g)`.
#[allow(clippy::too_many_arguments)]
pub fn filtering_relation_residuals(
    f: &SpectralDensity,
    g: &SpectralDensity,
    weights: &FunctionalWeights,
    alpha2: f64,
    beta2: f64,
    phi: &[f64],
    eps: f64,
    g2: &SpectralDensity,
    p_zeta: f64,
    p_theta: f64,
) -> Result<RelationReport> {
    if f.dim() != g.dim() || f.dim() != g2.dim() || f.dim() != weights.dim() {
        return Err(Error::DimensionMismatch(
            "f, g, g2 and weights must share K".into(),
        ));
    }
    if f.grid_size() != g.grid_size()
        || f.grid_size() != g2.grid_size()
        || phi.len() != f.grid_size()
    {
        return Err(Error::DimensionMismatch(
            "f, g, g2 and phi must share the grid".into(),
        ));
    }
    let fg = f.evaluate_on_grid();
    let gg = g.evaluate_on_grid();
    let sol = filter_on_grid(
        &fg,
        &gg,
        weights,
        default_truncation(f.grid_size(), weights),
        DEFAULT_COND_THRESHOLD,
    )?;
    let base = g2.scaled(1.0 - eps).evaluate_on_grid();
    relations_on_grid(
        &fg, &gg, &base, weights, &sol, alpha2, beta2, phi, p_zeta, p_theta,
    )
}

#[allow(clippy::too_many_arguments)]
fn relations_on_grid(
    f: &GridMatrixFunction,
    g: &GridMatrixFunction,
    base: &GridMatrixFunction,
    weights: &FunctionalWeights,
    sol: &EstimateSolution,
    alpha2: f64,
    beta2: f64,
    phi: &[f64],
    p_zeta: f64,
    p_theta: f64,
) -> Result<RelationReport> {
    let grid = f.grid_size();
    let k = f.rows();
    let a = estimators::target_on_grid(weights, grid)?;
    let d = spectral::evaluate_vector_poly(
        sol.solved_blocks
            .iter()
            .enumerate()
            .map(|(j, v)| (j as i64 + 1, v)),
        k,
        grid,
    )?;
    let fmax = f.values().iter().map(|v| v.trace().re).fold(0.0, f64::max);
    let gscale = g
        .values()
        .iter()
        .map(|v| v.trace().re.abs())
        .fold(0.0, f64::max)
        .max(1.0);
    let mut rep = RelationReport {
        residual_45: 0.0,
        residual_46: 0.0,
        kkt_45: 0.0,
        phi_max: f64::NEG_INFINITY,
        slackness: 0.0,
        power_f: (f.mean().trace().re - p_zeta).abs(),
        power_g: (g.mean().trace().re - p_theta).abs(),
        support_fraction: 0.0,
    };
    let mut support = 0usize;
    for (i, &phi_i) in phi.iter().enumerate().take(grid) {
        let fv = f.value(i);
        let gv = g.value(i);
        let av = a.value(i);
        let dv = d.value(i);
        let sum = fv + gv;
        let sum2 = &sum * &sum;
        let v45 = gv.transpose() * av + dv;
        let lhs45 = linalg::conj(&v45) * v45.transpose();
        let diff45 = &lhs45 - &sum2 * C64::new(alpha2, 0.0);
        let in_support = fv.trace().re > 1e-12 * fmax;
        if in_support {
            support += 1;
            rep.residual_45 = rep.residual_45.max(linalg::max_abs(&diff45));
        } else {
            let top = linalg::hermitian_eigenvalues(&diff45);
            rep.kkt_45 = rep.kkt_45.max(top[top.len() - 1].max(0.0));
        }
        let v46 = fv.transpose() * av - dv;
        let lhs46 = linalg::conj(&v46) * v46.transpose();
        let diff46 = &lhs46 - &sum2 * C64::new(beta2 + phi_i, 0.0);
        rep.residual_46 = rep.residual_46.max(linalg::max_abs(&diff46));
        rep.phi_max = rep.phi_max.max(phi_i);
        let excess = gv.trace().re - base.value(i).trace().re;
        if excess > 1e-12 * gscale {
            rep.slackness = rep.slackness.max(phi_i.abs());
        }
    }
    rep.support_fraction = support as f64 / grid as f64;
    Ok(rep)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterMinimaxOptions {
    pub max_iter: usize,
    /// Largest relation residual accepted as certified.
    pub tolerance: f64,
    /// Residual at which the iteration stops early.
    pub target: f64,
    /// Truncation of the filtering system; `None` uses `min(G/4 - 1, 127)`.
    pub truncation: Option<usize>,
    pub initial_step: f64,
}

impl Default for FilterMinimaxOptions {
    fn default() -> Self {
        Self {
            max_iter: 500,
            tolerance: 1e-6,
            target: 1e-12,
            truncation: None,
            initial_step: 1.0,
        }
    }
}

fn default_truncation(grid: usize, weights: &FunctionalWeights) -> Truncation {
    Truncation::Fixed((grid / 4 - 1).min(127).max(weights.len()))
}

/// Solves the first relation for the signal (or the second for the free
/// noise part): `v = max(t·(f+g)·√w - shift, 0)` with `t` fixed by
/// `mean(v) = mean`.
fn fixed_point(sum: &[f64], w: &[f64], shift: &[f64], mean: f64) -> Vec<f64> {
    let s: Vec<f64> = sum.iter().zip(w).map(|(s, w)| s * w.sqrt()).collect();
    let at = |t: f64| -> Vec<f64> {
        s.iter()
            .zip(shift)
            .map(|(s, c)| (t * s - c).max(0.0))
            .collect()
    };
    let avg = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    if mean <= 0.0 || s.iter().all(|&x| x <= 0.0) {
        return vec![0.0; s.len()];
    }
    let mut hi = 1.0;
    while avg(&at(hi)) < mean {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if avg(&at(mid)) < mean {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= f64::EPSILON * hi {
            break;
        }
    }
    let v = at(hi);
    let scale = mean / avg(&v);
    v.into_iter().map(|x| x * scale).collect()
}

/// Euclidean projection of `v` onto `{x >= 0, mean(x) = mean}`.
fn project_mean(v: &[f64], mean: f64) -> Vec<f64> {
    let n = v.len();
    if mean <= 0.0 {
        return vec![0.0; n];
    }
    let total = mean * n as f64;
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut tau = 0.0;
    for i in 0..n {
        cum += u[i];
        let t = (cum - total) / (i + 1) as f64;
        if i + 1 == n || u[i + 1] <= t {
            tau = t;
            break;
        }
    }
    v.iter().map(|x| (x - tau).max(0.0)).collect()
}

struct Iterate {
    f: Vec<f64>,
    x: Vec<f64>,
    sol: EstimateSolution,
    mse: f64,
}

/// Least-favorable scalar densities for filtering in `D_0^2 × D_ε`.
///
/// The optimal error `Δ(f, g)` is concave in `(f, g)` with gradients
/// `|A_- - h|²` (in `f`) and `|h|²` (in `g`), so the maximum over the class
/// is found by projected gradient ascent on the grid values of `f` and of
/// the free part `g - (1-ε) g_2`, each projected onto its power constraint.
/// The result is certified only when every relation residual is at most
/// `options.tolerance`; otherwise the best iterate is returned with
/// `certified = false`.
pub fn least_favorable_d0eps_filtering_scalar(
    weights: &FunctionalWeights,
    p_zeta: f64,
    p_theta: f64,
    eps: f64,
    g2: &SpectralDensity,
    options: &FilterMinimaxOptions,
) -> Result<LeastFavorableResult> {
    if weights.dim() != 1 || g2.dim() != 1 {
        return Err(Error::Unsupported(
            "the filtering least-favorable solver handles K = 1 only".into(),
        ));
    }
    if weights.horizon() != Horizon::Filtering {
        return Err(Error::InvalidArgument("filtering weights required".into()));
    }
    if !(0.0..=1.0).contains(&eps) {
        return Err(Error::InvalidArgument(format!(
            "epsilon must lie in [0, 1], got {eps}"
        )));
    }
    if !(p_zeta > 0.0) || !(p_theta >= 0.0) {
        return Err(Error::InvalidArgument("powers must be positive".into()));
    }
    if let Some(err) = spectral::validate_density(g2).to_error() {
        return Err(err);
    }
    let grid = g2.grid_size();
    let base_grid = g2.scaled(1.0 - eps).evaluate_on_grid();
    let base: Vec<f64> = base_grid.values().iter().map(|v| v[(0, 0)].re).collect();
    let fixed_power = base.iter().sum::<f64>() / grid as f64;
    let excess = p_theta - fixed_power;
    let slack = 1e-10 * p_theta.max(1.0);
    if excess < -slack || (eps == 0.0 && excess.abs() > slack) {
        return Err(Error::InfeasibleClass(format!(
            "noise power {p_theta} is incompatible with the fixed part of power {fixed_power} (epsilon = {eps})"
        )));
    }
    let excess = if eps > 0.0 { excess.max(0.0) } else { 0.0 };
    let truncation = match options.truncation {
        Some(j) => Truncation::Fixed(j),
        None => default_truncation(grid, weights),
    };
    let a = estimators::target_on_grid(weights, grid)?;

    let evaluate = |f: Vec<f64>, x: Vec<f64>| -> Result<Iterate> {
        let fg = GridMatrixFunction::scalar(&f)?;
        let g: Vec<f64> = base.iter().zip(&x).map(|(b, e)| b + e).collect();
        let gg = GridMatrixFunction::scalar(&g)?;
        let sol = filter_on_grid(&fg, &gg, weights, truncation, DEFAULT_COND_THRESHOLD)?;
        let mse = sol.mse;
        Ok(Iterate { f, x, sol, mse })
    };
    let multipliers = |it: &Iterate| -> (f64, f64, Vec<f64>) {
        let wf: Vec<f64> = (0..grid)
            .map(|i| (a.value(i)[(0, 0)] - it.sol.h_grid.value(i)[(0, 0)]).norm_sqr())
            .collect();
        let wg: Vec<f64> = (0..grid)
            .map(|i| it.sol.h_grid.value(i)[(0, 0)].norm_sqr())
            .collect();
        let fsum: f64 = it.f.iter().sum();
        let alpha2 = if fsum > 0.0 {
            it.f.iter().zip(&wf).map(|(f, w)| f * w).sum::<f64>() / fsum
        } else {
            0.0
        };
        let xmax = it.x.iter().copied().fold(0.0, f64::max);
        let xsum: f64 = it.x.iter().sum();
        let beta2 = if xsum > 0.0 {
            it.x.iter().zip(&wg).map(|(x, w)| x * w).sum::<f64>() / xsum
        } else {
            wg.iter().copied().fold(0.0, f64::max)
        };
        let phi = (0..grid)
            .map(|i| {
                if xmax > 0.0 && it.x[i] > 1e-12 * xmax {
                    0.0
                } else {
                    wg[i] - beta2
                }
            })
            .collect();
        (alpha2, beta2, phi)
    };
    let report = |it: &Iterate, alpha2: f64, beta2: f64, phi: &[f64]| -> Result<RelationReport> {
        let fg = GridMatrixFunction::scalar(&it.f)?;
        let g: Vec<f64> = base.iter().zip(&it.x).map(|(b, e)| b + e).collect();
        let gg = GridMatrixFunction::scalar(&g)?;
        relations_on_grid(
            &fg, &gg, &base_grid, weights, &it.sol, alpha2, beta2, phi, p_zeta, p_theta,
        )
    };

    let mut cur = evaluate(vec![p_zeta; grid], vec![excess; grid])?;
    let (mut alpha2, mut beta2, mut phi) = multipliers(&cur);
    let mut rel = report(&cur, alpha2, beta2, &phi)?;
    let mut step = options.initial_step;
    let mut iterations = 0;
    while iterations < options.max_iter && rel.worst() > options.target && !weights.is_zero() {
        iterations += 1;
        let wf: Vec<f64> = (0..grid)
            .map(|i| (a.value(i)[(0, 0)] - cur.sol.h_grid.value(i)[(0, 0)]).norm_sqr())
            .collect();
        let wg: Vec<f64> = (0..grid)
            .map(|i| cur.sol.h_grid.value(i)[(0, 0)].norm_sqr())
            .collect();
        let mut accepted = None;
        let sum: Vec<f64> = cur
            .f
            .iter()
            .zip(&base)
            .zip(&cur.x)
            .map(|((f, b), x)| f + b + x)
            .collect();
        let g_cur: Vec<f64> = base.iter().zip(&cur.x).map(|(b, x)| b + x).collect();
        let f_fix = fixed_point(&sum, &wf, &g_cur, p_zeta);
        let x_fix = if eps > 0.0 {
            let shift: Vec<f64> = cur.f.iter().zip(&base).map(|(f, b)| f + b).collect();
            fixed_point(&sum, &wg, &shift, excess)
        } else {
            cur.x.clone()
        };
        if let Ok(next) = evaluate(f_fix, x_fix) {
            if next.mse >= cur.mse - 1e-14 * cur.mse.abs().max(1.0) {
                accepted = Some(next);
            }
        }
        for _ in 0..40 {
            if accepted.is_some() {
                break;
            }
            let f_new = project_mean(
                &cur.f
                    .iter()
                    .zip(&wf)
                    .map(|(f, w)| f + step * w)
                    .collect::<Vec<_>>(),
                p_zeta,
            );
            let x_new = if eps > 0.0 {
                project_mean(
                    &cur.x
                        .iter()
                        .zip(&wg)
                        .map(|(x, w)| x + step * w)
                        .collect::<Vec<_>>(),
                    excess,
                )
            } else {
                cur.x.clone()
            };
            match evaluate(f_new, x_new) {
                Ok(next) if next.mse >= cur.mse - 1e-14 * cur.mse.abs().max(1.0) => {
                    accepted = Some(next);
                    break;
                }
                _ => step *= 0.5,
            }
        }
        let Some(next) = accepted else {
            log::debug!("projected ascent stalled after {iterations} iterations");
            break;
        };
        cur = next;
        step = (step * 1.5).min(1e6);
        (alpha2, beta2, phi) = multipliers(&cur);
        rel = report(&cur, alpha2, beta2, &phi)?;
        if iterations % 100 == 0 {
            log::debug!(
                "iteration {iterations}: mse {:.15}, worst residual {:.3e}",
                cur.mse,
                rel.worst()
            );
        }
    }
    let certified = rel.worst() <= options.tolerance;
    if !certified {
        log::warn!(
            "least-favorable filtering densities not certified after {iterations} iterations (worst residual {:.3e})",
            rel.worst()
        );
    }
    let f0_grid = GridMatrixFunction::scalar(&cur.f)?;
    let g_vals: Vec<f64> = base.iter().zip(&cur.x).map(|(b, e)| b + e).collect();
    let g0_grid = GridMatrixFunction::scalar(&g_vals)?;
    let f0 = SpectralDensity::from_grid(&f0_grid, None, 0.0)?;
    let g0 = SpectralDensity::from_grid(&g0_grid, None, 0.0)?;
    let minimax_mse = cur.mse;
    Ok(LeastFavorableResult {
        f0,
        f0_grid,
        g0: Some(g0),
        g0_grid: Some(g0_grid),
        factor: None,
        certificate: Certificate::Lagrange {
            alpha2,
            beta2,
            phi,
            relations: rel,
            iterations,
        },
        minimax_mse,
        h0: cur.sol,
        certified,
    })
}

#[cfg(test)]
mod tests {
    use super::project_mean;

    #[test]
    fn projection_onto_mean_simplex() {
        let p = project_mean(&[3.0, 1.0, 0.0, -1.0], 1.0);
        assert!((p.iter().sum::<f64>() - 4.0).abs() < 1e-14);
        assert!(p.iter().all(|&x| x >= 0.0));
        assert_eq!(project_mean(&[1.0, 1.0], 1.0), vec![1.0, 1.0]);
    }
}
