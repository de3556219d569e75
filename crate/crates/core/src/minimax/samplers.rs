//! Random members of the uncertainty classes, for saddle-point sampling.
//! Every sampler draws from the caller's generator only.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg;
use crate::spectral::SpectralDensity;
use crate::{CMat, C64};

fn gaussian(rng: &mut impl Rng, complex: bool) -> C64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = if complex {
        StandardNormal.sample(rng)
    } else {
        0.0
    };
    C64::new(re, im)
}

fn random_ma(rng: &mut impl Rng, k: usize, degree: usize) -> Vec<CMat> {
    let complex = k > 1;
    (0..=degree)
        .map(|_| CMat::from_fn(k, k, |_, _| gaussian(rng, complex)))
        .collect()
}

/// Random moving average of the given degree with `Σ_u ‖d(u)‖² = power`,
/// i.e. `(1/2π)∫ Tr f dλ = power`. Real coefficients when `K = 1`.
pub fn sample_power_class(
    rng: &mut impl Rng,
    k: usize,
    degree: usize,
    power: f64,
    grid: usize,
) -> Result<SpectralDensity> {
    if !(power >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "power must be nonnegative, got {power}"
        )));
    }
    let mut d = random_ma(rng, k, degree);
    let total: f64 = d.iter().map(|c| c.norm_squared()).sum();
    let s = C64::new((power / total).sqrt(), 0.0);
    for c in d.iter_mut() {
        *c *= s;
    }
    SpectralDensity::from_moving_average(&d, grid)
}

/// Random moving average with `Σ_u d(u) d(u)^* = P` exactly, obtained by
/// mapping a random factor through `P^{1/2} C^{-1/2}`.
pub fn sample_d01_class(
    rng: &mut impl Rng,
    power: &CMat,
    degree: usize,
    grid: usize,
) -> Result<SpectralDensity> {
    let k = power.nrows();
    let d = random_ma(rng, k, degree);
    let mut gram = CMat::zeros(k, k);
    for c in &d {
        gram += c * c.adjoint();
    }
    let inv_sqrt =
        linalg::hermitian_function(&gram, |x| if x > 0.0 { 1.0 / x.sqrt() } else { 0.0 });
    let t = linalg::sqrt_psd(power) * inv_sqrt;
    let mapped: Vec<CMat> = d.iter().map(|c| &t * c).collect();
    SpectralDensity::from_moving_average(&mapped, grid)
}

/// Random pair `(f, g)` with `(1/2π)∫ f = P_ζ`, `g = ε g_1 + (1-ε) g_2`,
/// `g_1 >= 0` and `(1/2π)∫ g = P_θ` (scalar).
pub fn sample_d0eps_class(
    rng: &mut impl Rng,
    p_zeta: f64,
    p_theta: f64,
    eps: f64,
    g2: &SpectralDensity,
    degree: usize,
) -> Result<(SpectralDensity, SpectralDensity)> {
    let grid = g2.grid_size();
    let f = sample_power_class(rng, 1, degree, p_zeta, grid)?;
    let base = g2.scaled(1.0 - eps);
    let excess = p_theta - base.power();
    if excess < -1e-12 {
        return Err(Error::InfeasibleClass(format!(
            "noise power {p_theta} is below the fixed part {}",
            base.power()
        )));
    }
    let g = if eps > 0.0 {
        base.add(&sample_power_class(rng, 1, degree, excess.max(0.0), grid)?)?
    } else {
        base
    };
    Ok((f, g))
}
