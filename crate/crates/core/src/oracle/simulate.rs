use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::estimators::EstimateSolution;
use crate::factorization::Factorization;
use crate::lift::{FunctionalWeights, Horizon};
use crate::{CMat, CVec, C64};

/// ChaCha20 generator for replication `rep` of a run seeded with `seed`:
/// the 64-bit seed fixes the key and `rep` selects the stream.
pub fn replication_rng(seed: u64, rep: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(rep);
    rng
}

/// Sample path `ζ_j = Σ_u d(u) ε_{j-u}`, `j = 0…n-1`, driven by independent
/// real standard normal innovations from [`replication_rng`]`(seed, 0)`.
/// `U_max` warm-up innovations are drawn first and only feed the head.
pub fn simulate_sequence(fact: &Factorization, n_blocks: usize, seed: u64) -> Vec<CVec> {
    simulate_with(fact, n_blocks, &mut replication_rng(seed, 0))
}

pub(crate) fn simulate_with(
    fact: &Factorization,
    n_blocks: usize,
    rng: &mut ChaCha20Rng,
) -> Vec<CVec> {
    let d = fact.coefficients();
    let m = fact.multiplicity();
    let k = fact.dim();
    let burn = d.len() - 1;
    let eps: Vec<CMat> = (0..n_blocks + burn)
        .map(|_| {
            CMat::from_fn(m, 1, |_, _| {
                let x: f64 = StandardNormal.sample(rng);
                C64::new(x, 0.0)
            })
        })
        .collect();
    (0..n_blocks)
        .map(|j| {
            let mut acc = CMat::zeros(k, 1);
            for (u, du) in d.iter().enumerate() {
                acc += du * &eps[j + burn - u];
            }
            CVec::from_column_slice(acc.as_slice())
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonteCarloReport {
    pub empirical: f64,
    pub theoretical: f64,
    pub samples: usize,
    /// Half-width of the 99% band `2.576 Δ √(2/n)`, valid for independent
    /// real Gaussian errors.
    pub band: f64,
    pub within_band: bool,
}

/// Plugs the time-domain coefficients of a noiseless extrapolation `h` into
/// a simulated path and averages the squared error over `n_blocks` origins.
pub fn empirical_mse(
    fact: &Factorization,
    solution: &EstimateSolution,
    weights: &FunctionalWeights,
    n_blocks: usize,
    seed: u64,
) -> Result<MonteCarloReport> {
    if !matches!(
        weights.horizon(),
        Horizon::Extrapolation | Horizon::ExtrapolationFinite(_)
    ) {
        return Err(Error::Unsupported(
            "empirical mse is implemented for extrapolation".into(),
        ));
    }
    let scale = solution
        .h_coeffs
        .values()
        .map(|v| v.norm())
        .fold(0.0, f64::max);
    let taps: Vec<(usize, &CVec)> = solution
        .h_coeffs
        .iter()
        .filter(|(&j, v)| j < 0 && v.norm() > 1e-15 * scale)
        .map(|(&j, v)| (j.unsigned_abs() as usize, v))
        .collect();
    let past = taps.iter().map(|t| t.0).max().unwrap_or(0);
    let ahead = weights.len() - 1;
    let path = simulate_sequence(fact, n_blocks + past + ahead, seed);
    let mut acc = 0.0;
    for t in past..past + n_blocks {
        let mut err = C64::new(0.0, 0.0);
        for (j, a) in weights.blocks().iter().enumerate() {
            err += a
                .iter()
                .zip(path[t + j].iter())
                .map(|(x, y)| x * y)
                .sum::<C64>();
        }
        for &(lag, h) in &taps {
            err -= h
                .iter()
                .zip(path[t - lag].iter())
                .map(|(x, y)| x * y)
                .sum::<C64>();
        }
        acc += err.norm_sqr();
    }
    let empirical = acc / n_blocks as f64;
    let theoretical = solution.mse;
    let band = 2.576 * theoretical * (2.0 / n_blocks as f64).sqrt();
    Ok(MonteCarloReport {
        empirical,
        theoretical,
        samples: n_blocks,
        band,
        within_band: (empirical - theoretical).abs() <= band,
    })
}
