//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any
//! failure. Run with `cargo test -p pcwk-cli --test acceptance`.

use std::path::Path;
use std::process::Command;
use std::time::Instant;

use pcwk::estimators::{
    extrapolate, extrapolate_noiseless, filter, interpolate_noiseless, Truncation,
};
use pcwk::factorization::{extrapolate_factorized, spectral_factorize};
use pcwk::minimax::{
    least_favorable_class_y, least_favorable_d01_extrapolation,
    least_favorable_d0eps_filtering_scalar, least_favorable_dm_interpolation, saddle_point_check,
    sample_d0eps_class, sample_power_class, Certificate, ClassConstraint, FilterMinimaxOptions,
};
use pcwk::oracle::replication_rng;
use pcwk::oracle::suite::{run_suite, suite_noise, SuiteDensity, SuiteTask};
use pcwk::spectral::{SpectralDensity, DEFAULT_GRID};
use pcwk::{CMat, CVec, FunctionalWeights, Horizon, C64};
use rand::Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

const G: usize = DEFAULT_GRID;
const SEED: u64 = 20;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn scalar(half: &[f64]) -> Result<SpectralDensity, String> {
    SpectralDensity::scalar_symmetric(half, G).map_err(err)
}

fn cmat(rows: usize, cols: usize, v: &[f64]) -> CMat {
    CMat::from_row_iterator(rows, cols, v.iter().map(|&x| C64::new(x, 0.0)))
}

fn oracle_suite() -> Outcome {
    let start = Instant::now();
    let rows = run_suite(&[1, 2, 4], G, SEED, 1e-5).map_err(err)?;
    let secs = start.elapsed().as_secs_f64();
    let worst = rows
        .iter()
        .max_by(|a, b| a.rel_diff.total_cmp(&b.rel_diff))
        .ok_or("empty suite")?;
    let failed: Vec<_> = rows.iter().filter(|r| !r.pass).collect();
    ensure(failed.is_empty(), || {
        format!(
            "{} of {} rows exceed 1e-5: {:?}",
            failed.len(),
            rows.len(),
            failed[0]
        )
    })?;
    ensure(secs < 60.0, || format!("runtime {secs:.1} s exceeds 60 s"))?;
    Ok(format!(
        "{} problems, worst relative difference {:.1e} ({} {} K={}), {secs:.1} s",
        rows.len(),
        worst.rel_diff,
        worst.task,
        worst.density,
        worst.k
    ))
}

fn closed_forms() -> Outcome {
    let phi: f64 = 0.5;
    let inv = scalar(&[1.0 + phi * phi, -phi])?
        .evaluate_on_grid()
        .inverse(1e12)
        .map_err(err)?;
    let ar1 = SpectralDensity::from_grid(&inv, None, 1e-18).map_err(err)?;
    let w = FunctionalWeights::scalar(&[1.0], Horizon::Interpolation(0)).map_err(err)?;
    let gap = interpolate_noiseless(&ar1, &w).map_err(err)?.mse;
    let expected = 1.0 / (1.0 + phi * phi);
    ensure((gap - expected).abs() <= 1e-6, || {
        format!("single gap mse {gap}, expected {expected}")
    })?;

    let w = FunctionalWeights::scalar(&[1.0], Horizon::Filtering).map_err(err)?;
    let wiener = filter(&scalar(&[2.0])?, &scalar(&[1.0])?, &w, Truncation::Auto)
        .map_err(err)?
        .mse;
    ensure((wiener - 2.0 / 3.0).abs() <= 1e-6, || {
        format!("filtering mse {wiener}, expected 2/3")
    })?;

    let ma = scalar(&[1.25, 0.5])?;
    let fact = spectral_factorize(&ma, 1e-12, 100).map_err(err)?;
    let w = FunctionalWeights::scalar(&[1.0, 1.0], Horizon::Extrapolation).map_err(err)?;
    let fx = extrapolate_factorized(&fact, &w).map_err(err)?.mse;
    ensure((fx - 3.25).abs() <= 1e-8, || {
        format!("factorized extrapolation mse {fx}, expected 3.25")
    })?;
    Ok(format!("{gap:.12}, {wiener:.12}, {fx:.12}"))
}

/// Minimum-phase moving average with a dominant lag-0 diagonal.
fn random_factor(rng: &mut impl Rng, k: usize, degree: usize) -> Vec<CMat> {
    (0..=degree)
        .map(|u| {
            CMat::from_fn(k, k, |i, j| {
                let base = if u == 0 && i == j { 4.0 } else { 0.0 };
                C64::new(
                    base + rng.random_range(-0.17..0.17),
                    rng.random_range(-0.17..0.17),
                )
            })
        })
        .collect()
}

fn factorization() -> Outcome {
    let mut rng = replication_rng(SEED, 3);
    let (mut worst_res, mut worst_rel) = (0.0f64, 0.0f64);
    for case in 0..10 {
        let k = 1 + rng.random_range(0..3);
        let degree = rng.random_range(0..=4);
        let f = SpectralDensity::from_moving_average(&random_factor(&mut rng, k, degree), G)
            .map_err(err)?;
        let fact = spectral_factorize(&f, 1e-12, 100).map_err(err)?;
        let (p, fg) = (fact.p_grid(), f.evaluate_on_grid());
        let residual = (0..G)
            .map(|g| pcwk::linalg::max_abs(&(p.value(g) * p.value(g).adjoint() - fg.value(g))))
            .fold(0.0, f64::max);
        ensure(residual <= 1e-9, || {
            format!("case {case} (K={k}, degree {degree}): residual {residual:e}")
        })?;

        let blocks: Vec<CVec> = (0..3)
            .map(|_| {
                CVec::from_fn(k, |_, _| {
                    C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
                })
            })
            .collect();
        let w = FunctionalWeights::new(blocks, Horizon::Extrapolation).map_err(err)?;
        let toeplitz = extrapolate_noiseless(&f, &w, Truncation::Auto)
            .map_err(err)?
            .mse;
        let factored = extrapolate_factorized(&fact, &w).map_err(err)?.mse;
        let rel = (toeplitz - factored).abs() / factored;
        ensure(rel <= 1e-5, || {
            format!("case {case}: routes {toeplitz} vs {factored}")
        })?;
        worst_res = worst_res.max(residual);
        worst_rel = worst_rel.max(rel);
    }
    Ok(format!(
        "10 densities, worst residual {worst_res:.1e}, worst route gap {worst_rel:.1e}"
    ))
}

fn subspace_invariants() -> Outcome {
    let mut worst = 0.0f64;
    let mut count = 0;
    for k in [1, 2, 4] {
        let g = suite_noise(k, G).map_err(err)?;
        for task in SuiteTask::ALL {
            let w = task.weights(k, SEED).map_err(err)?;
            for density in SuiteDensity::ALL {
                let Some(f) = density.build(k, G).map_err(err)? else {
                    continue;
                };
                let r = task
                    .solve(&f, &g, &w)
                    .map_err(err)?
                    .forbidden_lag_residual();
                ensure(r <= 1e-8, || {
                    format!("{} {} K={k}: residual {r:e}", task.name(), density.name())
                })?;
                worst = worst.max(r);
                count += 1;
            }
            if matches!(task, SuiteTask::Extrapolation { noisy: false }) {
                for density in SuiteDensity::ALL {
                    let Some(f) = density.build(k, G).map_err(err)? else {
                        continue;
                    };
                    let fact = spectral_factorize(&f, 1e-12, 100).map_err(err)?;
                    let r = extrapolate_factorized(&fact, &w)
                        .map_err(err)?
                        .forbidden_lag_residual();
                    ensure(r <= 1e-8, || {
                        format!("factorized {} K={k}: residual {r:e}", density.name())
                    })?;
                    worst = worst.max(r);
                    count += 1;
                }
            }
        }
    }
    Ok(format!(
        "{count} characteristics, worst forbidden-lag coefficient {worst:.1e}"
    ))
}

fn class_y() -> Outcome {
    let w = FunctionalWeights::scalar(&[1.0, 1.0], Horizon::Extrapolation).map_err(err)?;
    let res = least_favorable_class_y(&w, 1.0, None, G).map_err(err)?;
    let golden = (3.0 + 5f64.sqrt()) / 2.0;
    ensure((res.minimax_mse - golden).abs() <= 1e-10, || {
        format!("minimax mse {}", res.minimax_mse)
    })?;
    let mut rng = replication_rng(SEED, 5);
    let samples = (0..100)
        .map(|_| sample_power_class(&mut rng, 1, 1, 1.0, G).map(|f| (f, None)))
        .collect::<pcwk::Result<Vec<_>>>()
        .map_err(err)?;
    let margins = saddle_point_check(
        &res.h0,
        &res.f0_grid,
        None,
        &w,
        &samples,
        &ClassConstraint::Power { p_zeta: 1.0 },
    )
    .map_err(err)?;
    ensure(margins.margins.len() == 100, || "sample count".into())?;
    ensure(margins.min_margin >= -1e-8, || {
        format!("min margin {:e}", margins.min_margin)
    })?;
    Ok(format!(
        "mse {:.12}, min margin over 100 samples {:.2e}",
        res.minimax_mse, margins.min_margin
    ))
}

fn class_dm() -> Outcome {
    let a0 = CVec::from_vec(vec![C64::new(1.0, 0.0), C64::new(0.0, 0.0)]);
    let cases = [
        (
            FunctionalWeights::scalar(&[1.0], Horizon::Interpolation(0)).map_err(err)?,
            vec![cmat(1, 1, &[2.0])],
        ),
        (
            FunctionalWeights::scalar(&[1.0, 0.5], Horizon::Interpolation(1)).map_err(err)?,
            vec![cmat(1, 1, &[2.0]), cmat(1, 1, &[0.5])],
        ),
        (
            FunctionalWeights::scalar(&[1.0, -0.3], Horizon::Interpolation(1)).map_err(err)?,
            vec![cmat(1, 1, &[3.0]), cmat(1, 1, &[1.0]), cmat(1, 1, &[0.2])],
        ),
        (
            FunctionalWeights::new(vec![a0], Horizon::Interpolation(0)).map_err(err)?,
            vec![
                cmat(2, 2, &[2.0, 0.3, 0.3, 1.5]),
                cmat(2, 2, &[0.4, 0.1, 0.0, 0.2]),
            ],
        ),
    ];
    let (mut worst_c, mut worst_m) = (0.0f64, 0.0f64);
    for (i, (w, constraints)) in cases.iter().enumerate() {
        let res = least_favorable_dm_interpolation(constraints, w, G).map_err(err)?;
        let Certificate::Moments {
            constraint_residual,
            ..
        } = res.certificate
        else {
            return Err(format!("case {i}: moment certificate expected"));
        };
        ensure(constraint_residual <= 1e-8, || {
            format!("case {i}: constraint residual {constraint_residual:e}")
        })?;
        let direct = interpolate_noiseless(&res.f0, w).map_err(err)?.mse;
        let gap = (direct - res.minimax_mse).abs();
        ensure(gap <= 1e-10, || {
            format!(
                "case {i}: interpolation mse {direct} vs minimax {}",
                res.minimax_mse
            )
        })?;
        worst_c = worst_c.max(constraint_residual);
        worst_m = worst_m.max(gap);
    }
    Ok(format!(
        "{} instances, worst constraint residual {worst_c:.1e}, worst mse gap {worst_m:.1e}",
        cases.len()
    ))
}

fn class_d01() -> Outcome {
    let mut worst = 0.0f64;
    let a0 = CVec::from_vec(vec![C64::new(1.0, 0.0), C64::new(0.5, 0.0)]);
    let a1 = CVec::from_vec(vec![C64::new(0.0, 0.0), C64::new(1.0, 0.0)]);
    let cases = [
        (
            FunctionalWeights::scalar(&[1.0, 1.0], Horizon::Extrapolation).map_err(err)?,
            cmat(1, 1, &[1.0]),
        ),
        (
            FunctionalWeights::scalar(&[1.0, -0.5, 0.25], Horizon::Extrapolation).map_err(err)?,
            cmat(1, 1, &[2.5]),
        ),
        (
            FunctionalWeights::new(vec![a0, a1], Horizon::Extrapolation).map_err(err)?,
            cmat(2, 2, &[2.0, 0.5, 0.5, 1.0]),
        ),
    ];
    for (i, (w, p)) in cases.iter().enumerate() {
        let res = least_favorable_d01_extrapolation(w, p, None, G).map_err(err)?;
        let Certificate::Eigenpair { eigen_residual, .. } = res.certificate else {
            return Err(format!("case {i}: eigenpair certificate expected"));
        };
        ensure(eigen_residual <= 1e-8, || {
            format!("case {i}: eigen residual {eigen_residual:e}")
        })?;
        let trace_gap = (res.f0.coeff(0).trace().re - p.trace().re).abs();
        ensure(trace_gap <= 1e-8, || {
            format!("case {i}: trace gap {trace_gap:e}")
        })?;
        let y = least_favorable_class_y(w, p.trace().re, None, G).map_err(err)?;
        let agree = (y.minimax_mse - res.minimax_mse).abs();
        ensure(agree <= 1e-8, || {
            format!("case {i}: class Y {} vs {}", y.minimax_mse, res.minimax_mse)
        })?;
        worst = worst.max(eigen_residual).max(trace_gap).max(agree);
    }
    Ok(format!(
        "{} instances, worst residual {worst:.1e}",
        cases.len()
    ))
}

fn class_d0eps() -> Outcome {
    let g_white = scalar(&[1.0])?;
    let g_col = scalar(&[1.0, 0.25])?;
    // (eps, g2, weights, expected to converge)
    let cases: [(f64, &SpectralDensity, &[f64], bool); 3] = [
        (1.0, &g_white, &[1.0], true),
        (0.0, &g_col, &[1.0, 0.5], true),
        (0.5, &g_col, &[1.0, 0.5], false),
    ];
    let opts = FilterMinimaxOptions::default();
    let mut notes = Vec::new();
    for (eps, g2, a, converges) in cases {
        let w = FunctionalWeights::scalar(a, Horizon::Filtering).map_err(err)?;
        let res =
            least_favorable_d0eps_filtering_scalar(&w, 1.0, 1.0, eps, g2, &opts).map_err(err)?;
        let Certificate::Lagrange { relations, .. } = &res.certificate else {
            return Err("lagrange certificate expected".into());
        };
        let worst = relations.worst();
        ensure(res.certified == (worst <= opts.tolerance), || {
            format!("eps={eps}: certification flag inconsistent")
        })?;
        if !res.certified {
            // Non-convergence must be reported and is then not a success.
            ensure(!converges, || {
                format!("eps={eps}: not certified, worst relation residual {worst:e}")
            })?;
            notes.push(format!("eps={eps} reported uncertified ({worst:.1e})"));
            continue;
        }
        ensure(worst <= 1e-6, || {
            format!("eps={eps}: relation residual {worst:e}")
        })?;
        let mut rng = replication_rng(SEED, 8);
        let pairs = (0..50)
            .map(|_| sample_d0eps_class(&mut rng, 1.0, 1.0, eps, g2, 2).map(|(f, g)| (f, Some(g))))
            .collect::<pcwk::Result<Vec<_>>>()
            .map_err(err)?;
        let class = ClassConstraint::PowerEps {
            p_zeta: 1.0,
            p_theta: 1.0,
            eps,
            g2: (*g2).clone(),
        };
        let margins = saddle_point_check(
            &res.h0,
            &res.f0_grid,
            res.g0_grid.as_ref(),
            &w,
            &pairs,
            &class,
        )
        .map_err(err)?;
        ensure(margins.min_margin >= -1e-8, || {
            format!("eps={eps}: min margin {:e}", margins.min_margin)
        })?;
        notes.push(format!(
            "eps={eps} residual {worst:.1e} margin {:.1e}",
            margins.min_margin
        ));
    }
    Ok(notes.join("; "))
}

fn noise_vanishing() -> Outcome {
    let task = SuiteTask::Extrapolation { noisy: false };
    let mut worst = 0.0f64;
    let mut count = 0;
    for k in [1, 2, 4] {
        let w = task.weights(k, SEED).map_err(err)?;
        for density in SuiteDensity::ALL {
            let Some(f) = density.build(k, G).map_err(err)? else {
                continue;
            };
            let exact =
                extrapolate_factorized(&spectral_factorize(&f, 1e-12, 100).map_err(err)?, &w)
                    .map_err(err)?
                    .mse;
            let mut prev = f64::INFINITY;
            let mut last = prev;
            for eps in [1.0, 1e-1, 1e-2, 1e-3, 1e-4] {
                let noise =
                    SpectralDensity::constant(&(CMat::identity(k, k) * C64::new(eps, 0.0)), G)
                        .map_err(err)?;
                let mse = extrapolate(&f, &noise, &w, Truncation::Auto)
                    .map_err(err)?
                    .mse;
                ensure(mse <= prev * (1.0 + 1e-12), || {
                    format!(
                        "{} K={k}: mse rises from {prev} to {mse} at eps={eps}",
                        density.name()
                    )
                })?;
                prev = mse;
                last = mse;
            }
            let rel = (last - exact).abs() / exact;
            ensure(rel <= 1e-2, || {
                format!("{} K={k}: {last} vs noiseless {exact}", density.name())
            })?;
            worst = worst.max(rel);
            count += 1;
        }
    }
    Ok(format!(
        "{count} densities, worst relative gap at eps=1e-4 {worst:.1e}"
    ))
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(err)?;
    let spec = dir.path().join("suite.json");
    std::fs::write(
        &spec,
        format!(r#"{{"task": "oracle-check", "lift": {{"harmonics": 1}}, "numerics": {{"seed": {SEED}}}}}"#),
    )
    .map_err(err)?;
    let outs = [dir.path().join("a"), dir.path().join("b")];
    let children = outs
        .iter()
        .map(|out| {
            Command::new(env!("CARGO_BIN_EXE_pcwk"))
                .arg("--spec")
                .arg(&spec)
                .arg("--out")
                .arg(out)
                .output()
        })
        .collect::<Result<Vec<_>, _>>()
        .map_err(err)?;
    for c in &children {
        ensure(c.status.success(), || {
            format!("run failed: {}", String::from_utf8_lossy(&c.stderr))
        })?;
    }
    let mut compared = Vec::new();
    for name in ["comparison.csv", "summary.csv"] {
        let read = |d: &Path| std::fs::read(d.join(name)).map_err(err);
        let (a, b) = (read(&outs[0])?, read(&outs[1])?);
        ensure(!a.is_empty() && a == b, || {
            format!("{name} differs between runs")
        })?;
        compared.push(format!("{name} ({} bytes)", a.len()));
    }
    Ok(format!("identical {}", compared.join(", ")))
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("oracle equivalence suite", oracle_suite),
        ("closed-form checks", closed_forms),
        ("spectral factorization", factorization),
        ("subspace invariants", subspace_invariants),
        ("minimax class Y", class_y),
        ("minimax inverse-moment class", class_dm),
        ("minimax matrix-power class", class_d01),
        ("minimax filtering under contaminated noise", class_d0eps),
        ("noise-vanishing consistency", noise_vanishing),
        ("determinism of CLI reports", determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = check();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!(
                "criterion {:>2} PASS  {name}: {detail} [{secs:.1} s]",
                i + 1
            ),
            Err(detail) => {
                failed += 1;
                println!(
                    "criterion {:>2} FAIL  {name}: {detail} [{secs:.1} s]",
                    i + 1
                );
            }
        }
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
