//! Independent time-domain checks: normal equations built from covariances,
//! Monte-Carlo simulation of the lifted sequence, and comparison reports.

mod projection;
mod simulate;
pub mod suite;

pub use projection::{converged_projection, time_domain_projection, ProjectionResult};
pub use simulate::{empirical_mse, replication_rng, simulate_sequence, MonteCarloReport};

use crate::error::{Error, Result};
use crate::estimators::EstimateSolution;
use crate::factorization::Factorization;
use crate::spectral::SpectralDensity;
use crate::CMat;

/// Covariances `R(j) = E ζ_{l+j} ζ_l^*` for `0 <= j <= L`; negative lags are
/// adjoints.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceTable {
    lags: Vec<CMat>,
}

impl CovarianceTable {
    pub fn new(lags: Vec<CMat>) -> Result<Self> {
        if lags.is_empty() {
            return Err(Error::InvalidArgument(
                "covariance table needs lag 0".into(),
            ));
        }
        Ok(Self { lags })
    }

    pub fn max_lag(&self) -> usize {
        self.lags.len() - 1
    }

    pub fn dim(&self) -> usize {
        self.lags[0].nrows()
    }

    pub fn get(&self, j: i64) -> Result<CMat> {
        let idx = j.unsigned_abs() as usize;
        let r = self.lags.get(idx).ok_or_else(|| {
            Error::InvalidArgument(format!(
                "lag {j} beyond covariance table of length {}",
                self.max_lag()
            ))
        })?;
        Ok(if j >= 0 { r.clone() } else { r.adjoint() })
    }
}

/// `R(j) = (1/2π)∫ e^{ijλ} f(λ) dλ` for `0 <= j <= L`, by grid quadrature.
pub fn covariances_from_density(f: &SpectralDensity, max_lag: usize) -> Result<CovarianceTable> {
    let grid = f.grid_size();
    if max_lag >= grid / 2 {
        return Err(Error::Aliasing {
            lag: max_lag as i64,
            grid,
        });
    }
    let table = f.evaluate_on_grid().lag_table();
    CovarianceTable::new(
        (0..=max_lag as i64)
            .map(|j| table.get(-j).cloned())
            .collect::<Result<_>>()?,
    )
}

/// `R(j) = Σ_u d(u+j) d(u)^*` for a moving-average factor.
pub fn covariances_from_factor(fact: &Factorization, max_lag: usize) -> CovarianceTable {
    let d = fact.coefficients();
    let k = fact.dim();
    let lags = (0..=max_lag)
        .map(|j| {
            let mut acc = CMat::zeros(k, k);
            for u in 0..d.len() {
                if let Some(dj) = d.get(u + j) {
                    acc += dj * d[u].adjoint();
                }
            }
            acc
        })
        .collect();
    CovarianceTable { lags }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompareReport {
    pub spectral_mse: f64,
    pub oracle_mse: f64,
    pub abs_diff: f64,
    /// `|spectral - oracle| / |spectral|` (absolute difference when the
    /// spectral value is zero).
    pub rel_diff: f64,
    pub tolerance: f64,
    pub pass: bool,
}

pub fn compare_values(spectral_mse: f64, oracle_mse: f64, tolerance: f64) -> CompareReport {
    let abs_diff = (spectral_mse - oracle_mse).abs();
    let rel_diff = if spectral_mse != 0.0 {
        abs_diff / spectral_mse.abs()
    } else {
        abs_diff
    };
    CompareReport {
        spectral_mse,
        oracle_mse,
        abs_diff,
        rel_diff,
        tolerance,
        pass: rel_diff <= tolerance,
    }
}

pub fn compare_report(
    spectral: &EstimateSolution,
    oracle_mse: f64,
    tolerance: f64,
) -> CompareReport {
    compare_values(spectral.mse, oracle_mse, tolerance)
}
