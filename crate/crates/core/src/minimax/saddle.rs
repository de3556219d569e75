use crate::error::{Error, Result};
use crate::estimators::{self, EstimateSolution};
use crate::lift::FunctionalWeights;
use crate::linalg;
use crate::spectral::{self, GridMatrixFunction, SpectralDensity};
use crate::CMat;

/// Tolerance for class membership of samples.
pub const MEMBERSHIP_TOLERANCE: f64 = 1e-8;

/// Defining constraints of a class, used to validate samples.
#[derive(Debug, Clone, PartialEq)]
pub enum ClassConstraint {
    /// `(1/2π)∫ Tr f dλ = P`.
    Power { p_zeta: f64 },
    /// `(1/2π)∫ f dλ = P` (matrix).
    MatrixPower { power: CMat },
    /// `(1/2π)∫ f^{-1} e^{-imλ} dλ = P(m)` for `m = 0…M`.
    InverseMoments { constraints: Vec<CMat> },
    /// `f` with power `P_ζ`, `g = ε g_1 + (1-ε) g_2` with power `P_θ`.
    PowerEps {
        p_zeta: f64,
        p_theta: f64,
        eps: f64,
        g2: SpectralDensity,
    },
}

impl ClassConstraint {
    fn validate(&self, f: &SpectralDensity, g: Option<&SpectralDensity>) -> Result<()> {
        let report = spectral::validate_density(f);
        if let Some(err) = report.to_error() {
            return Err(Error::SampleRejected(format!("f is not a density: {err}")));
        }
        let tol = |x: f64| MEMBERSHIP_TOLERANCE * x.abs().max(1.0);
        match self {
            ClassConstraint::Power { p_zeta } => {
                let dev = (f.power() - p_zeta).abs();
                if dev > tol(*p_zeta) {
                    return Err(Error::SampleRejected(format!(
                        "power differs from {p_zeta} by {dev:.3e}"
                    )));
                }
            }
            ClassConstraint::MatrixPower { power } => {
                let dev = linalg::max_abs(&(f.coeff(0) - power));
                if dev > tol(linalg::max_abs(power)) {
                    return Err(Error::SampleRejected(format!(
                        "power matrix differs by {dev:.3e}"
                    )));
                }
            }
            ClassConstraint::InverseMoments { constraints } => {
                let inv = f
                    .evaluate_on_grid()
                    .inverse(spectral::DEFAULT_COND_THRESHOLD)?
                    .lag_table();
                for (m, p) in constraints.iter().enumerate() {
                    let dev = linalg::max_abs(&(inv.get(m as i64)? - p));
                    if dev > tol(linalg::max_abs(p)) {
                        return Err(Error::SampleRejected(format!(
                            "inverse moment {m} differs by {dev:.3e}"
                        )));
                    }
                }
            }
            ClassConstraint::PowerEps {
                p_zeta,
                p_theta,
                eps,
                g2,
            } => {
                let Some(g) = g else {
                    return Err(Error::SampleRejected("class needs a noise density".into()));
                };
                let dev_f = (f.power() - p_zeta).abs();
                let dev_g = (g.power() - p_theta).abs();
                if dev_f > tol(*p_zeta) || dev_g > tol(*p_theta) {
                    return Err(Error::SampleRejected(format!(
                        "powers differ by {dev_f:.3e} (signal) and {dev_g:.3e} (noise)"
                    )));
                }
                let gg = g.evaluate_on_grid();
                let base = g2.scaled(1.0 - eps).evaluate_on_grid();
                for i in 0..gg.grid_size() {
                    let excess = gg.value(i).trace().re - base.value(i).trace().re;
                    if excess < -MEMBERSHIP_TOLERANCE {
                        return Err(Error::SampleRejected(format!(
                            "noise falls below the fixed part at grid node {i}"
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MarginReport {
    /// `Δ(h0; f0, g0)`.
    pub baseline: f64,
    /// `Δ(h0; f0, g0) - Δ(h0; f, g)` per sample.
    pub margins: Vec<f64>,
    pub min_margin: f64,
}

/// Evaluates the error of the fixed characteristic `h0` at every sample of
/// the class and reports the margins against `(f0, g0)`.
pub fn saddle_point_check(
    h0: &EstimateSolution,
    f0: &GridMatrixFunction,
    g0: Option<&GridMatrixFunction>,
    weights: &FunctionalWeights,
    samples: &[(SpectralDensity, Option<SpectralDensity>)],
    class: &ClassConstraint,
) -> Result<MarginReport> {
    let grid = f0.grid_size();
    let a = estimators::target_on_grid(weights, grid)?;
    let baseline = estimators::mse_on_grid(&h0.h_grid, &a, f0, g0);
    let mut margins = Vec::with_capacity(samples.len());
    for (i, (f, g)) in samples.iter().enumerate() {
        class
            .validate(f, g.as_ref())
            .map_err(|e| Error::SampleRejected(format!("sample {i}: {e}")))?;
        if f.grid_size() != grid {
            return Err(Error::DimensionMismatch(format!(
                "sample {i} uses a different grid"
            )));
        }
        let fg = f.evaluate_on_grid();
        let gg = g.as_ref().map(|g| g.evaluate_on_grid());
        margins.push(baseline - estimators::mse_on_grid(&h0.h_grid, &a, &fg, gg.as_ref()));
    }
    let min_margin = margins.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(MarginReport {
        baseline,
        margins,
        min_margin,
    })
}
