//! Harmonic lifting of a periodically correlated description to `K`-vector
//! blocks, and the functional weights that live on those blocks.
//!
//! The basis on `[0, T)` is `ẽ_k(u) = T^{-1/2} e^{2πi ν(k) u / T}` with
//! `ν(k) = (-1)^k ⌊k/2⌋`, so `ν = 0, 1, -1, 2, -2, …` for `k = 1, 2, 3, …`.
//! Storage order is always the natural `k = 1..=K`.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::{CVec, C64};

/// Frequency of the `k`-th basis element, `(-1)^k ⌊k/2⌋`.
pub fn frequency_index(k: i64) -> Result<i64> {
    if k < 1 {
        return Err(Error::InvalidArgument(format!(
            "harmonic index must be >= 1, got {k}"
        )));
    }
    let half = k / 2;
    Ok(if k % 2 == 0 { half } else { -half })
}

/// The index `σ(k)` whose basis element is the complex conjugate of `ẽ_k`:
/// `σ(1) = 1`, `σ(2l) = 2l + 1`, `σ(2l + 1) = 2l`.
pub fn conjugate_pair_permutation(k: i64) -> Result<i64> {
    if k < 1 {
        return Err(Error::InvalidArgument(format!(
            "harmonic index must be >= 1, got {k}"
        )));
    }
    Ok(match k {
        1 => 1,
        k if k % 2 == 0 => k + 1,
        k => k - 1,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LiftConfig {
    pub period: f64,
    pub harmonics: usize,
    pub quadrature_points: usize,
}

impl LiftConfig {
    pub fn new(period: f64, harmonics: usize, quadrature_points: usize) -> Result<Self> {
        if !(period > 0.0 && period.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "period must be positive, got {period}"
            )));
        }
        if harmonics < 1 {
            return Err(Error::InvalidArgument("K must be >= 1".into()));
        }
        if quadrature_points < 4 * harmonics {
            return Err(Error::InvalidArgument(format!(
                "quadrature_points = {quadrature_points} must be at least 4K = {}",
                4 * harmonics
            )));
        }
        Ok(Self {
            period,
            harmonics,
            quadrature_points,
        })
    }

    /// Quadrature nodes `u_i = iT/Q` on one period.
    pub fn nodes(&self) -> Vec<f64> {
        let q = self.quadrature_points;
        (0..q).map(|i| self.period * i as f64 / q as f64).collect()
    }

    fn frequencies(&self) -> Vec<i64> {
        (1..=self.harmonics as i64)
            .map(|k| frequency_index(k).expect("k >= 1"))
            .collect()
    }
}

/// Which estimation problem a set of weights belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Horizon {
    /// Missing blocks `0..=n`, observed everywhere else.
    Interpolation(usize),
    /// Future blocks `0, 1, …` from observations at `-1, -2, …`.
    Extrapolation,
    /// Future blocks `0..=n` from observations at `-1, -2, …`.
    ExtrapolationFinite(usize),
    /// Blocks `0, -1, -2, …` from observations at `0, -1, …`.
    Filtering,
}

impl Horizon {
    pub fn name(&self) -> &'static str {
        match self {
            Horizon::Interpolation(_) => "interpolation",
            Horizon::Extrapolation => "extrapolation",
            Horizon::ExtrapolationFinite(_) => "extrapolation-finite",
            Horizon::Filtering => "filtering",
        }
    }

    /// Whether the coefficient of `h` at `lag` must vanish.
    pub fn is_forbidden_lag(&self, lag: i64) -> bool {
        match *self {
            Horizon::Interpolation(n) => (0..=n as i64).contains(&lag),
            Horizon::Extrapolation | Horizon::ExtrapolationFinite(_) => lag >= 0,
            Horizon::Filtering => lag >= 1,
        }
    }
}

/// Lifted weight vectors `ā_0 … ā_J` of a linear functional `Σ_j ā_j^T ζ_j`
/// (for filtering, `Σ_j ā_j^T ζ_{-j}`).
#[derive(Debug, Clone, PartialEq)]
pub struct FunctionalWeights {
    blocks: Vec<CVec>,
    horizon: Horizon,
}

impl FunctionalWeights {
    pub fn new(blocks: Vec<CVec>, horizon: Horizon) -> Result<Self> {
        let Some(first) = blocks.first() else {
            return Err(Error::InvalidArgument(
                "weights need at least one block".into(),
            ));
        };
        let k = first.len();
        if k == 0 {
            return Err(Error::InvalidArgument(
                "weight blocks must have K >= 1 entries".into(),
            ));
        }
        if let Some(j) = blocks.iter().position(|b| b.len() != k) {
            return Err(Error::DimensionMismatch(format!(
                "weight block {j} has {} entries, block 0 has {k}",
                blocks[j].len()
            )));
        }
        if blocks
            .iter()
            .flat_map(|b| b.iter())
            .any(|z| !z.re.is_finite() || !z.im.is_finite())
        {
            return Err(Error::InvalidInput(
                "weights contain non-finite values".into(),
            ));
        }
        match horizon {
            Horizon::Interpolation(n) | Horizon::ExtrapolationFinite(n)
                if blocks.len() != n + 1 =>
            {
                Err(Error::InvalidArgument(format!(
                    "{} horizon N = {n} needs exactly {} blocks, got {}",
                    horizon.name(),
                    n + 1,
                    blocks.len()
                )))
            }
            _ => Ok(Self { blocks, horizon }),
        }
    }

    /// Real scalar (`K = 1`) weights.
    pub fn scalar(values: &[f64], horizon: Horizon) -> Result<Self> {
        Self::new(
            values
                .iter()
                .map(|&v| CVec::from_element(1, C64::new(v, 0.0)))
                .collect(),
            horizon,
        )
    }

    pub fn blocks(&self) -> &[CVec] {
        &self.blocks
    }

    pub fn horizon(&self) -> Horizon {
        self.horizon
    }

    pub fn with_horizon(&self, horizon: Horizon) -> Result<Self> {
        Self::new(self.blocks.clone(), horizon)
    }

    pub fn dim(&self) -> usize {
        self.blocks[0].len()
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    /// Index of the last block with a nonzero entry.
    pub fn last_nonzero(&self) -> Option<usize> {
        self.blocks
            .iter()
            .rposition(|b| b.iter().any(|z| z.norm() > 0.0))
    }

    pub fn is_zero(&self) -> bool {
        self.last_nonzero().is_none()
    }

    /// Blocks stacked into one column vector of length `n_blocks · K`,
    /// zero-padded (or truncated) to `n_blocks`.
    pub fn stacked(&self, n_blocks: usize) -> CVec {
        let k = self.dim();
        let mut out = CVec::zeros(n_blocks * k);
        for (j, b) in self.blocks.iter().enumerate().take(n_blocks) {
            out.rows_mut(j * k, k).copy_from(b);
        }
        out
    }

    /// Same weights scaled by a complex factor.
    pub fn scaled(&self, s: C64) -> Self {
        Self {
            blocks: self.blocks.iter().map(|b| b * s).collect(),
            horizon: self.horizon,
        }
    }
}

/// Trapezoid weights for `samples_per_block` points per period.
enum Rule {
    /// `Q` samples per block; each block is closed periodically.
    Periodic,
    /// `Q` samples per block plus the right endpoint of the last block.
    Closed,
}

/// Lifts a sampled weight function into [`FunctionalWeights`].
///
/// `samples[i] = a(iT/Q)` for `i` in `0..(J+1)Q` (periodic trapezoid per
/// block) or `0..=(J+1)Q` (closed trapezoid; block `j` uses sample `(j+1)Q` as
/// its right endpoint). Entry `k` of block `j` is the coefficient that
/// multiplies `ζ_kj`, i.e. the projection of `a(· + jT)` on `ẽ_{σ(k)}`.
pub fn compute_weights(
    samples: &[C64],
    cfg: &LiftConfig,
    j_max: usize,
    horizon: Horizon,
) -> Result<FunctionalWeights> {
    let q = cfg.quadrature_points;
    let n = (j_max + 1) * q;
    let rule = if samples.len() == n {
        Rule::Periodic
    } else if samples.len() == n + 1 {
        Rule::Closed
    } else {
        return Err(Error::InvalidArgument(format!(
            "expected {n} or {} samples for J = {j_max} and Q = {q}, got {}",
            n + 1,
            samples.len()
        )));
    };
    if samples
        .iter()
        .any(|z| !z.re.is_finite() || !z.im.is_finite())
    {
        return Err(Error::InvalidInput(
            "weight function samples are not finite".into(),
        ));
    }
    let freqs = cfg.frequencies();
    let du = cfg.period / q as f64;
    let norm = 1.0 / cfg.period.sqrt();
    let blocks = (0..=j_max)
        .map(|j| {
            let block = &samples[j * q..];
            CVec::from_iterator(
                freqs.len(),
                freqs.iter().map(|&nu| {
                    // conj(ẽ_k) = ẽ_{σ(k)}: the kernel is e^{+2πiν(k)u/T}.
                    let kernel = |i: usize| {
                        let u = i as f64 * du;
                        C64::from_polar(1.0, 2.0 * PI * nu as f64 * u / cfg.period)
                    };
                    let mut acc: C64 = (0..q).map(|i| block[i] * kernel(i)).sum();
                    if let Rule::Closed = rule {
                        acc += (block[q] * kernel(q) - block[0] * kernel(0)) * 0.5;
                    }
                    acc * du * norm
                }),
            )
        })
        .collect();
    FunctionalWeights::new(blocks, horizon)
}

/// Convenience wrapper of [`compute_weights`] that samples `a` on the closed
/// grid over `[0, (J+1)T]`.
pub fn compute_weights_fn(
    a: impl Fn(f64) -> C64,
    cfg: &LiftConfig,
    j_max: usize,
    horizon: Horizon,
) -> Result<FunctionalWeights> {
    let q = cfg.quadrature_points;
    let samples: Vec<C64> = (0..=(j_max + 1) * q)
        .map(|i| a(i as f64 * cfg.period / q as f64))
        .collect();
    compute_weights(&samples, cfg, j_max, horizon)
}

/// Plain harmonic coefficients `ζ_kj = ⟨ζ(· + jT), ẽ_k⟩` of a path sampled
/// periodically (`Q` samples per block); inverse of [`reconstruct_pc`] on the
/// retained band.
pub fn lift_samples(samples: &[C64], cfg: &LiftConfig) -> Result<Vec<CVec>> {
    let q = cfg.quadrature_points;
    if samples.is_empty() || !samples.len().is_multiple_of(q) {
        return Err(Error::InvalidArgument(format!(
            "sample count {} is not a positive multiple of Q = {q}",
            samples.len()
        )));
    }
    let freqs = cfg.frequencies();
    let du = cfg.period / q as f64;
    let norm = 1.0 / cfg.period.sqrt();
    Ok(samples
        .chunks(q)
        .map(|block| {
            CVec::from_iterator(
                freqs.len(),
                freqs.iter().map(|&nu| {
                    let acc: C64 = block
                        .iter()
                        .enumerate()
                        .map(|(i, &z)| {
                            z * C64::from_polar(
                                1.0,
                                -2.0 * PI * nu as f64 * i as f64 * du / cfg.period,
                            )
                        })
                        .sum();
                    acc * du * norm
                }),
            )
        })
        .collect())
}

/// Evaluates `ζ(u + jT) = Σ_k ζ_kj ẽ_k(u)` for every block of the window and
/// every `u` in `u_grid`. Output is indexed `[block][u]`.
pub fn reconstruct_pc(blocks: &[CVec], cfg: &LiftConfig, u_grid: &[f64]) -> Result<Vec<Vec<C64>>> {
    if blocks.is_empty() {
        return Err(Error::InvalidArgument("empty coefficient window".into()));
    }
    if let Some(j) = blocks.iter().position(|b| b.len() != cfg.harmonics) {
        return Err(Error::DimensionMismatch(format!(
            "block {j} has {} entries, expected K = {}",
            blocks[j].len(),
            cfg.harmonics
        )));
    }
    let freqs = cfg.frequencies();
    let norm = 1.0 / cfg.period.sqrt();
    Ok(blocks
        .iter()
        .map(|b| {
            u_grid
                .iter()
                .map(|&u| {
                    b.iter()
                        .zip(&freqs)
                        .map(|(&z, &nu)| {
                            z * C64::from_polar(norm, 2.0 * PI * nu as f64 * u / cfg.period)
                        })
                        .sum()
                })
                .collect()
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummabilityReport {
    /// `Σ_j ‖ā_j‖`.
    pub norm_sum: f64,
    /// `Σ_j (j+1) ‖ā_j‖²`.
    pub weighted_square_sum: f64,
    /// Share of `Σ‖ā_j‖` carried by the last tenth of the stored blocks.
    pub norm_tail_share: f64,
    /// Share of `Σ(j+1)‖ā_j‖²` carried by the last tenth of the stored blocks.
    pub weighted_tail_share: f64,
    pub finite: bool,
    pub tail_decaying: bool,
    pub pass: bool,
    pub message: Option<String>,
}

/// Fraction of the stored tail above which an infinite-horizon weight
/// sequence is flagged.
pub const TAIL_SHARE_LIMIT: f64 = 0.01;

/// Summability diagnostics for the weights.
///
/// Finite horizons always pass. For infinite horizons with at least 20
/// stored blocks whose last block is nonzero, the weights fail if the last
/// tenth of the indices contributes more than 1% of either partial sum;
/// shorter or zero-terminated sequences are finite-support and pass.
pub fn check_weight_summability(weights: &FunctionalWeights) -> SummabilityReport {
    let norms: Vec<f64> = weights.blocks().iter().map(|b| b.norm()).collect();
    let n = norms.len();
    let norm_sum: f64 = norms.iter().sum();
    let weighted: Vec<f64> = norms
        .iter()
        .enumerate()
        .map(|(j, v)| (j + 1) as f64 * v * v)
        .collect();
    let weighted_square_sum: f64 = weighted.iter().sum();
    let finite = norm_sum.is_finite() && weighted_square_sum.is_finite();

    let tail_start = n - n / 10;
    let share = |xs: &[f64], total: f64| {
        if total > 0.0 {
            xs[tail_start..].iter().sum::<f64>() / total
        } else {
            0.0
        }
    };
    let norm_tail_share = share(&norms, norm_sum);
    let weighted_tail_share = share(&weighted, weighted_square_sum);

    let infinite = matches!(
        weights.horizon(),
        Horizon::Extrapolation | Horizon::Filtering
    );
    let judged = infinite && n >= 20 && norms[n - 1] > 0.0;
    let tail_decaying =
        !judged || (norm_tail_share <= TAIL_SHARE_LIMIT && weighted_tail_share <= TAIL_SHARE_LIMIT);
    let pass = finite && tail_decaying;
    let message = if !finite {
        Some("weight sums are not finite".to_string())
    } else if !tail_decaying {
        Some(format!(
            "tail not decaying; summability condition suspect (last tenth carries {:.2}% of the weighted sum)",
            100.0 * weighted_tail_share.max(norm_tail_share)
        ))
    } else {
        None
    };
    SummabilityReport {
        norm_sum,
        weighted_square_sum,
        norm_tail_share,
        weighted_tail_share,
        finite,
        tail_decaying,
        pass,
        message,
    }
}
