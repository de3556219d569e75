//! Benchmark problems shared by the oracle comparison and its tests.

use rand::Rng;

use super::projection::converged_projection;
use super::simulate::replication_rng;
use crate::error::Result;
use crate::estimators::{self, Truncation};
use crate::lift::{FunctionalWeights, Horizon};
use crate::spectral::SpectralDensity;
use crate::{CMat, CVec, C64};

/// Signal densities of the suite.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SuiteDensity {
    White,
    MovingAverage,
    Autoregressive,
    /// Moving average whose components are coupled (needs `K >= 2`).
    CoupledMovingAverage,
}

impl SuiteDensity {
    pub const ALL: [SuiteDensity; 4] = [
        SuiteDensity::White,
        SuiteDensity::MovingAverage,
        SuiteDensity::Autoregressive,
        SuiteDensity::CoupledMovingAverage,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            SuiteDensity::White => "white",
            SuiteDensity::MovingAverage => "ma1",
            SuiteDensity::Autoregressive => "ar1",
            SuiteDensity::CoupledMovingAverage => "coupled-ma1",
        }
    }

    /// `None` when the density does not exist for `k`.
    pub fn build(&self, k: usize, grid: usize) -> Result<Option<SpectralDensity>> {
        let eye = CMat::identity(k, k);
        let r = |x: f64| C64::new(x, 0.0);
        Ok(Some(match self {
            SuiteDensity::White => SpectralDensity::identity(k, grid)?,
            SuiteDensity::MovingAverage => {
                SpectralDensity::from_moving_average(&[eye.clone(), &eye * r(0.5)], grid)?
            }
            SuiteDensity::Autoregressive => {
                let phi = 0.5;
                let poly = SpectralDensity::from_nonnegative_lags(
                    k,
                    &[&eye * r(1.0 + phi * phi), &eye * r(-phi)],
                    grid,
                )?;
                let inv = poly.evaluate_on_grid().inverse(1e12)?;
                SpectralDensity::from_grid(&inv, None, 1e-17)?
            }
            SuiteDensity::CoupledMovingAverage => {
                if k < 2 {
                    return Ok(None);
                }
                let d0 = CMat::from_fn(k, k, |i, j| match i as i64 - j as i64 {
                    0 => r(1.0),
                    1 => r(0.3),
                    _ => r(0.0),
                });
                let d1 = CMat::from_fn(k, k, |i, j| match j as i64 - i as i64 {
                    0 => r(0.5),
                    1 => C64::new(0.2, 0.1),
                    _ => r(0.0),
                });
                SpectralDensity::from_moving_average(&[d0, d1], grid)?
            }
        }))
    }
}

/// Estimation tasks of the suite.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SuiteTask {
    Interpolation { n: usize, noisy: bool },
    Extrapolation { noisy: bool },
    Filtering,
}

impl SuiteTask {
    pub const ALL: [SuiteTask; 7] = [
        SuiteTask::Interpolation { n: 0, noisy: false },
        SuiteTask::Interpolation { n: 2, noisy: false },
        SuiteTask::Interpolation { n: 0, noisy: true },
        SuiteTask::Interpolation { n: 2, noisy: true },
        SuiteTask::Extrapolation { noisy: false },
        SuiteTask::Extrapolation { noisy: true },
        SuiteTask::Filtering,
    ];

    pub fn name(&self) -> String {
        match self {
            SuiteTask::Interpolation { n, noisy } => {
                format!("interpolate-n{n}{}", if *noisy { "-noisy" } else { "" })
            }
            SuiteTask::Extrapolation { noisy } => {
                format!("extrapolate{}", if *noisy { "-noisy" } else { "" })
            }
            SuiteTask::Filtering => "filter".into(),
        }
    }

    pub fn noisy(&self) -> bool {
        match self {
            SuiteTask::Interpolation { noisy, .. } | SuiteTask::Extrapolation { noisy } => *noisy,
            SuiteTask::Filtering => true,
        }
    }

    pub fn horizon(&self) -> Horizon {
        match self {
            SuiteTask::Interpolation { n, .. } => Horizon::Interpolation(*n),
            SuiteTask::Extrapolation { .. } => Horizon::Extrapolation,
            SuiteTask::Filtering => Horizon::Filtering,
        }
    }

    /// Seeded complex weights: `N + 1` blocks for interpolation, 3 otherwise.
    pub fn weights(&self, k: usize, seed: u64) -> Result<FunctionalWeights> {
        let blocks = match self {
            SuiteTask::Interpolation { n, .. } => n + 1,
            _ => 3,
        };
        let mut rng = replication_rng(seed, k as u64);
        let a = (0..blocks)
            .map(|_| {
                CVec::from_fn(k, |_, _| {
                    C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
                })
            })
            .collect();
        FunctionalWeights::new(a, self.horizon())
    }

    /// Spectral-domain solution of the task.
    pub fn solve(
        &self,
        f: &SpectralDensity,
        g: &SpectralDensity,
        weights: &FunctionalWeights,
    ) -> Result<estimators::EstimateSolution> {
        match (self, self.noisy()) {
            (SuiteTask::Interpolation { .. }, false) => {
                estimators::interpolate_noiseless(f, weights)
            }
            (SuiteTask::Interpolation { .. }, true) => estimators::interpolate(f, g, weights),
            (SuiteTask::Extrapolation { .. }, false) => {
                estimators::extrapolate_noiseless(f, weights, Truncation::Auto)
            }
            (SuiteTask::Extrapolation { .. }, true) => {
                estimators::extrapolate(f, g, weights, Truncation::Auto)
            }
            (SuiteTask::Filtering, _) => estimators::filter(f, g, weights, Truncation::Auto),
        }
    }
}

/// One row of the comparison table.
#[derive(Debug, Clone, PartialEq)]
pub struct SuiteRow {
    pub k: usize,
    pub task: String,
    pub density: &'static str,
    pub spectral_mse: f64,
    pub oracle_mse: f64,
    pub rel_diff: f64,
    pub window: usize,
    pub pass: bool,
}

/// Noise density used by the noisy tasks: `0.5 I`.
pub fn suite_noise(k: usize, grid: usize) -> Result<SpectralDensity> {
    SpectralDensity::constant(&(CMat::identity(k, k) * C64::new(0.5, 0.0)), grid)
}

/// Runs every (K, task, density) combination against the converged
/// time-domain projection.
pub fn run_suite(ks: &[usize], grid: usize, seed: u64, rel_tol: f64) -> Result<Vec<SuiteRow>> {
    let mut rows = Vec::new();
    for &k in ks {
        let g = suite_noise(k, grid)?;
        for task in SuiteTask::ALL {
            let weights = task.weights(k, seed)?;
            for density in SuiteDensity::ALL {
                let Some(f) = density.build(k, grid)? else {
                    continue;
                };
                let spectral = task.solve(&f, &g, &weights)?;
                let noise = task.noisy().then_some(&g);
                let oracle = converged_projection(&f, noise, &weights, 8, 128, 1e-10)?;
                let rel_diff = (spectral.mse - oracle.mse).abs() / oracle.mse.abs().max(1e-300);
                rows.push(SuiteRow {
                    k,
                    task: task.name(),
                    density: density.name(),
                    spectral_mse: spectral.mse,
                    oracle_mse: oracle.mse,
                    rel_diff,
                    window: oracle.window,
                    pass: rel_diff <= rel_tol,
                });
            }
        }
    }
    Ok(rows)
}
