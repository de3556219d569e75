//! Dispatch of a validated specification to the solvers, and report files.

use std::fmt;
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use pcwk::estimators::{self, EstimateSolution};
use pcwk::factorization::{self, spectral_factorize};
use pcwk::io::{self, fmt_f64, WeightTable};
use pcwk::lift::check_weight_summability;
use pcwk::minimax::{
    self, Certificate, ClassConstraint, FilterMinimaxOptions, LeastFavorableResult,
};
use pcwk::oracle::{self, replication_rng, suite};
use pcwk::spectral::SpectralDensity;
use pcwk::{CVec, FunctionalWeights, LiftConfig};

use crate::spec::{ProblemSpec, Task, WeightSource};

/// Failure of a run, with its exit status.
#[derive(Debug)]
pub enum RunError {
    /// Bad input that validation could not catch (unreadable files, weight
    /// shapes and the like).
    Usage(String),
    /// A numerical condition failed (minimality, conditioning, PSD, ...).
    Numerical(String),
    /// Results were written but are not certified (non-converged
    /// least-favorable search, oracle mismatch).
    NotCertified(String),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Usage(_) => 1,
            RunError::Numerical(_) | RunError::NotCertified(_) => 2,
        }
    }
}

impl fmt::Display for RunError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RunError::Usage(m) => write!(f, "usage error: {m}"),
            RunError::Numerical(m) => write!(f, "numerical failure: {m}"),
            RunError::NotCertified(m) => write!(f, "not certified: {m}"),
        }
    }
}

impl std::error::Error for RunError {}

impl From<pcwk::Error> for RunError {
    fn from(e: pcwk::Error) -> Self {
        if e.is_numerical() {
            RunError::Numerical(e.to_string())
        } else {
            RunError::Usage(e.to_string())
        }
    }
}

impl From<std::io::Error> for RunError {
    fn from(e: std::io::Error) -> Self {
        RunError::Usage(e.to_string())
    }
}

/// Ordered `key,value` summary of a run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Summary {
    pub records: Vec<(String, String)>,
}

impl Summary {
    fn text(&mut self, key: &str, value: impl Into<String>) {
        self.records.push((key.to_string(), value.into()));
    }

    fn num(&mut self, key: &str, value: f64) {
        self.text(key, fmt_f64(value));
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.records
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }
}

/// Files written by a run and its summary.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub files: Vec<PathBuf>,
    pub summary: Summary,
}

struct Ctx<'a> {
    spec: &'a ProblemSpec,
    out: &'a Path,
    files: Vec<PathBuf>,
    summary: Summary,
}

impl Ctx<'_> {
    fn create(&mut self, name: &str) -> Result<BufWriter<File>, RunError> {
        let path = self.out.join(name);
        let file = File::create(&path)
            .map_err(|e| RunError::Usage(format!("cannot write `{}`: {e}", path.display())))?;
        self.files.push(path);
        Ok(BufWriter::new(file))
    }

    fn grid(&self) -> usize {
        self.spec.numerics.grid
    }

    fn density(&self, path: &Path) -> Result<SpectralDensity, RunError> {
        let f = io::read_density(path, self.grid())
            .map_err(|e| RunError::Usage(format!("reading `{}`: {e}", path.display())))?;
        let k = self.spec.lift.harmonics;
        if f.dim() != k {
            return Err(RunError::Usage(format!(
                "density `{}` is {}x{}, but K = {k}",
                path.display(),
                f.dim(),
                f.dim()
            )));
        }
        Ok(f)
    }

    fn f(&self) -> Result<SpectralDensity, RunError> {
        self.density(self.spec.f.as_deref().expect("validated"))
    }

    fn g(&self) -> Result<Option<SpectralDensity>, RunError> {
        self.spec.g.as_deref().map(|p| self.density(p)).transpose()
    }

    fn weights(&mut self) -> Result<FunctionalWeights, RunError> {
        let ws = self.spec.weights.as_ref().expect("validated");
        let weights = match &ws.source {
            WeightSource::Inline(blocks) => {
                let blocks: Vec<CVec> = blocks.iter().map(|b| CVec::from_column_slice(b)).collect();
                let last = blocks.len() - 1;
                FunctionalWeights::new(blocks, ws.horizon.horizon(last))?
            }
            WeightSource::Csv { path, last_block } => {
                let table = WeightTable::read(path)
                    .map_err(|e| RunError::Usage(format!("reading `{}`: {e}", path.display())))?;
                let lift = &self.spec.lift;
                let cfg = LiftConfig::new(lift.period, lift.harmonics, lift.quadrature_points)?;
                let last = last_block.unwrap_or_else(|| table.last_block(lift.period));
                table.weights(&cfg, ws.horizon.horizon(last), Some(last))?
            }
        };
        let report = check_weight_summability(&weights);
        if let Some(msg) = &report.message {
            log::warn!("{msg}");
        }
        self.summary
            .text("weight_blocks", weights.len().to_string());
        self.summary
            .text("summability", if report.pass { "pass" } else { "suspect" });
        Ok(weights)
    }

    fn solution_files(&mut self, sol: &EstimateSolution) -> Result<(), RunError> {
        io::write_h_grid(self.create("h.csv")?, &sol.h_grid)?;
        io::write_h_coefficients(self.create("h_coefficients.csv")?, sol)?;
        let d = &sol.diagnostics;
        self.summary.num("mse", sol.mse);
        self.summary.num("mse_quadrature", d.mse_quadrature);
        self.summary.num("condition_estimate", d.condition_estimate);
        self.summary.num("backward_residual", d.backward_residual);
        self.summary.text(
            "truncation",
            d.truncation
                .map(|j| j.to_string())
                .unwrap_or_else(|| "none".into()),
        );
        self.summary
            .text("truncation_converged", d.truncation_converged.to_string());
        self.summary
            .num("forbidden_lag_residual", sol.forbidden_lag_residual());
        Ok(())
    }
}

/// Runs a validated specification, writing reports into `out`.
pub fn run(spec: &ProblemSpec, out: &Path) -> Result<Outcome, RunError> {
    std::fs::create_dir_all(out).map_err(|e| {
        RunError::Usage(format!(
            "cannot create output directory `{}`: {e}",
            out.display()
        ))
    })?;
    let mut ctx = Ctx {
        spec,
        out,
        files: Vec::new(),
        summary: Summary::default(),
    };
    ctx.summary.text("task", spec.task.name());
    ctx.summary.text("version", env!("CARGO_PKG_VERSION"));
    ctx.summary.text("seed", spec.numerics.seed.to_string());
    ctx.summary.text("grid", spec.numerics.grid.to_string());
    ctx.summary.text("K", spec.lift.harmonics.to_string());

    let result = dispatch(&mut ctx);
    if result.is_ok() || matches!(result, Err(RunError::NotCertified(_))) {
        let summary = ctx.summary.clone();
        io::write_key_values(ctx.create("summary.csv")?, &summary.records)?;
    }
    result?;
    Ok(Outcome {
        files: ctx.files,
        summary: ctx.summary,
    })
}

fn dispatch(ctx: &mut Ctx) -> Result<(), RunError> {
    let spec = ctx.spec;
    let trunc = spec.numerics.truncation;
    match spec.task {
        Task::Interpolate => {
            let (f, g, w) = (ctx.f()?, ctx.g()?, ctx.weights()?);
            let sol = match &g {
                Some(g) => estimators::interpolate(&f, g, &w)?,
                None => estimators::interpolate_noiseless(&f, &w)?,
            };
            ctx.summary.text("noisy", g.is_some().to_string());
            ctx.solution_files(&sol)
        }
        Task::Extrapolate => {
            let (f, g, w) = (ctx.f()?, ctx.g()?, ctx.weights()?);
            let sol = match &g {
                Some(g) => estimators::extrapolate(&f, g, &w, trunc)?,
                None => estimators::extrapolate_noiseless(&f, &w, trunc)?,
            };
            ctx.summary.text("noisy", g.is_some().to_string());
            ctx.solution_files(&sol)
        }
        Task::ExtrapolateFinite => {
            let (f, w) = (ctx.f()?, ctx.weights()?);
            let fact = factorize(ctx, &f)?;
            let sol = factorization::extrapolate_factorized_finite(&fact, &w)?;
            ctx.solution_files(&sol)
        }
        Task::Filter => {
            let (f, w) = (ctx.f()?, ctx.weights()?);
            let g = ctx.g()?.expect("validated");
            let sol = estimators::filter(&f, &g, &w, trunc)?;
            ctx.solution_files(&sol)
        }
        Task::Factorize => {
            let f = ctx.f()?;
            let fact = factorize(ctx, &f)?;
            io::write_factor(ctx.create("factor.csv")?, &fact)?;
            Ok(())
        }
        Task::MinimaxY => {
            let w = ctx.weights()?;
            let p_zeta = spec.class.p_zeta.expect("validated");
            let res = minimax::least_favorable_class_y(&w, p_zeta, None, ctx.grid())?;
            let mut rng = replication_rng(spec.numerics.seed, 0);
            let samples = (0..spec.class.samples)
                .map(|_| {
                    minimax::sample_power_class(
                        &mut rng,
                        w.dim(),
                        spec.class.sample_degree,
                        p_zeta,
                        ctx.grid(),
                    )
                    .map(|f| (f, None))
                })
                .collect::<pcwk::Result<Vec<_>>>()?;
            minimax_files(ctx, &w, &res, &samples, &ClassConstraint::Power { p_zeta })
        }
        Task::MinimaxExtrapD01 => {
            let w = ctx.weights()?;
            let power = spec.class.power.clone().expect("validated");
            let res = minimax::least_favorable_d01_extrapolation(&w, &power, None, ctx.grid())?;
            let mut rng = replication_rng(spec.numerics.seed, 0);
            let samples = (0..spec.class.samples)
                .map(|_| {
                    minimax::sample_d01_class(
                        &mut rng,
                        &power,
                        spec.class.sample_degree,
                        ctx.grid(),
                    )
                    .map(|f| (f, None))
                })
                .collect::<pcwk::Result<Vec<_>>>()?;
            minimax_files(
                ctx,
                &w,
                &res,
                &samples,
                &ClassConstraint::MatrixPower { power },
            )
        }
        Task::MinimaxInterpDm => {
            let w = ctx.weights()?;
            let res =
                minimax::least_favorable_dm_interpolation(&spec.class.constraints, &w, ctx.grid())?;
            let check = estimators::interpolate_noiseless(&res.f0, &w)?;
            ctx.summary.num("interpolation_mse_at_f0", check.mse);
            minimax_files(
                ctx,
                &w,
                &res,
                &[],
                &ClassConstraint::InverseMoments {
                    constraints: spec.class.constraints.clone(),
                },
            )
        }
        Task::MinimaxFilterD0eps => {
            let w = ctx.weights()?;
            let g2_path = spec.class.g2.as_deref().expect("validated");
            let g2 = ctx.density(g2_path)?;
            let (p_zeta, p_theta, eps) = (
                spec.class.p_zeta.expect("validated"),
                spec.class.p_theta.expect("validated"),
                spec.class.epsilon.expect("validated"),
            );
            let mut opts = FilterMinimaxOptions::default();
            if let Some(it) = spec.numerics.max_iter {
                opts.max_iter = it;
            }
            if let Some(tol) = spec.numerics.tolerance {
                opts.tolerance = tol;
            }
            if let pcwk::Truncation::Fixed(j) = trunc {
                opts.truncation = Some(j);
            }
            let res = minimax::least_favorable_d0eps_filtering_scalar(
                &w, p_zeta, p_theta, eps, &g2, &opts,
            )?;
            let mut rng = replication_rng(spec.numerics.seed, 0);
            let samples = (0..spec.class.samples)
                .map(|_| {
                    minimax::sample_d0eps_class(
                        &mut rng,
                        p_zeta,
                        p_theta,
                        eps,
                        &g2,
                        spec.class.sample_degree,
                    )
                    .map(|(f, g)| (f, Some(g)))
                })
                .collect::<pcwk::Result<Vec<_>>>()?;
            let class = ClassConstraint::PowerEps {
                p_zeta,
                p_theta,
                eps,
                g2,
            };
            minimax_files(ctx, &w, &res, &samples, &class)
        }
        Task::OracleCheck => oracle_check(ctx),
        Task::Simulate => {
            let f = ctx.f()?;
            let fact = factorize(ctx, &f)?;
            let n = spec.class.blocks;
            let path = oracle::simulate_sequence(&fact, n, spec.numerics.seed);
            let mut wtr = csv_writer(ctx.create("path.csv")?);
            wtr.write_record(["j", "component", "re", "im"])
                .map_err(csv_err)?;
            for (j, v) in path.iter().enumerate() {
                for (k, z) in v.iter().enumerate() {
                    wtr.write_record([j.to_string(), k.to_string(), fmt_f64(z.re), fmt_f64(z.im)])
                        .map_err(csv_err)?;
                }
            }
            wtr.flush()?;
            ctx.summary.text("blocks", n.to_string());
            if spec.weights.is_some() {
                let w = ctx.weights()?;
                let sol = factorization::extrapolate_factorized(&fact, &w)?;
                let mc = oracle::empirical_mse(&fact, &sol, &w, n, spec.numerics.seed)?;
                ctx.summary.num("theoretical_mse", mc.theoretical);
                ctx.summary.num("empirical_mse", mc.empirical);
                ctx.summary.num("band_99", mc.band);
                ctx.summary.text("within_band", mc.within_band.to_string());
            }
            Ok(())
        }
    }
}

fn csv_writer<W: std::io::Write>(w: W) -> csv::Writer<W> {
    csv::Writer::from_writer(w)
}

fn csv_err(e: csv::Error) -> RunError {
    RunError::Usage(e.to_string())
}

fn factorize(ctx: &mut Ctx, f: &SpectralDensity) -> Result<pcwk::Factorization, RunError> {
    let tol = ctx
        .spec
        .numerics
        .tolerance
        .unwrap_or(factorization::DEFAULT_TOLERANCE);
    let max_iter = ctx
        .spec
        .numerics
        .max_iter
        .unwrap_or(factorization::DEFAULT_MAX_ITER);
    let fact = spectral_factorize(f, tol, max_iter)?;
    ctx.summary.num("factor_residual", fact.residual);
    ctx.summary
        .text("factor_iterations", fact.iterations.to_string());
    ctx.summary
        .text("factor_lags", fact.coefficients().len().to_string());
    ctx.summary
        .num("anticausal_leakage", fact.anticausal_leakage);
    Ok(fact)
}

fn minimax_files(
    ctx: &mut Ctx,
    w: &FunctionalWeights,
    res: &LeastFavorableResult,
    samples: &[(SpectralDensity, Option<SpectralDensity>)],
    class: &ClassConstraint,
) -> Result<(), RunError> {
    io::write_density(ctx.create("f0.csv")?, &res.f0)?;
    if let Some(g0) = &res.g0 {
        io::write_density(ctx.create("g0.csv")?, g0)?;
    }
    ctx.solution_files(&res.h0)?;
    ctx.summary.num("minimax_mse", res.minimax_mse);
    match &res.certificate {
        Certificate::Eigenpair {
            nu2,
            eigen_residual,
            matrix_constraint_residual,
            ..
        } => {
            ctx.summary.num("nu2", *nu2);
            ctx.summary.num("eigen_residual", *eigen_residual);
            if let Some(r) = matrix_constraint_residual {
                ctx.summary.num("matrix_constraint_residual", *r);
            }
        }
        Certificate::Moments {
            constraint_residual,
            system_residual,
            ..
        } => {
            ctx.summary.num("constraint_residual", *constraint_residual);
            ctx.summary.num("system_residual", *system_residual);
        }
        Certificate::Lagrange {
            alpha2,
            beta2,
            relations,
            iterations,
            ..
        } => {
            ctx.summary.num("alpha2", *alpha2);
            ctx.summary.num("beta2", *beta2);
            ctx.summary.text("iterations", iterations.to_string());
            ctx.summary
                .num("relation_residual_signal", relations.residual_45);
            ctx.summary
                .num("relation_residual_noise", relations.residual_46);
            ctx.summary.num("kkt_violation", relations.kkt_45);
            ctx.summary.num("phi_max", relations.phi_max);
            ctx.summary.num("slackness_violation", relations.slackness);
            ctx.summary.num("power_residual_signal", relations.power_f);
            ctx.summary.num("power_residual_noise", relations.power_g);
            ctx.summary
                .num("worst_relation_residual", relations.worst());
        }
    }
    ctx.summary.text("samples", samples.len().to_string());
    if samples.is_empty() {
        ctx.summary.text("min_saddle_margin", "n/a");
    } else {
        let margins = minimax::saddle_point_check(
            &res.h0,
            &res.f0_grid,
            res.g0_grid.as_ref(),
            w,
            samples,
            class,
        )?;
        ctx.summary.num("min_saddle_margin", margins.min_margin);
    }
    ctx.summary.text("certified", res.certified.to_string());
    if !res.certified {
        return Err(RunError::NotCertified(
            "the least-favorable search stopped before its residuals met the tolerance; results written for inspection"
                .into(),
        ));
    }
    Ok(())
}

fn oracle_check(ctx: &mut Ctx) -> Result<(), RunError> {
    let spec = ctx.spec;
    let cls = &spec.class;
    let rows = if spec.f.is_some() {
        let (f, g, w) = (ctx.f()?, ctx.g()?, ctx.weights()?);
        let sol = match (w.horizon(), &g) {
            (pcwk::Horizon::Interpolation(_), Some(g)) => estimators::interpolate(&f, g, &w)?,
            (pcwk::Horizon::Interpolation(_), None) => estimators::interpolate_noiseless(&f, &w)?,
            (pcwk::Horizon::Extrapolation, Some(g)) => {
                estimators::extrapolate(&f, g, &w, spec.numerics.truncation)?
            }
            (pcwk::Horizon::Extrapolation, None) => {
                estimators::extrapolate_noiseless(&f, &w, spec.numerics.truncation)?
            }
            (pcwk::Horizon::ExtrapolationFinite(_), None) => {
                factorization::extrapolate_factorized_finite(&factorize(ctx, &f)?, &w)?
            }
            (pcwk::Horizon::Filtering, Some(g)) => {
                estimators::filter(&f, g, &w, spec.numerics.truncation)?
            }
            (h, _) => {
                return Err(RunError::Usage(format!(
                    "oracle-check does not support {} {} noise",
                    h.name(),
                    if g.is_some() { "with" } else { "without" }
                )))
            }
        };
        let oracle = oracle::converged_projection(
            &f,
            g.as_ref(),
            &w,
            cls.window_start,
            cls.window_max,
            1e-12,
        )?;
        let cmp = oracle::compare_report(&sol, oracle.mse, cls.rel_tolerance);
        vec![suite::SuiteRow {
            k: f.dim(),
            task: w.horizon().name().to_string(),
            density: "input",
            spectral_mse: cmp.spectral_mse,
            oracle_mse: cmp.oracle_mse,
            rel_diff: cmp.rel_diff,
            window: oracle.window,
            pass: cmp.pass,
        }]
    } else {
        suite::run_suite(
            &cls.suite_k,
            ctx.grid(),
            spec.numerics.seed,
            cls.rel_tolerance,
        )?
    };
    let mut wtr = csv_writer(ctx.create("comparison.csv")?);
    wtr.write_record([
        "task",
        "k",
        "density",
        "spectral_mse",
        "oracle_mse",
        "rel_diff",
        "window",
        "pass",
    ])
    .map_err(csv_err)?;
    for r in &rows {
        wtr.write_record([
            r.task.clone(),
            r.k.to_string(),
            r.density.to_string(),
            fmt_f64(r.spectral_mse),
            fmt_f64(r.oracle_mse),
            fmt_f64(r.rel_diff),
            r.window.to_string(),
            r.pass.to_string(),
        ])
        .map_err(csv_err)?;
    }
    wtr.flush()?;
    let failed = rows.iter().filter(|r| !r.pass).count();
    let worst = rows.iter().map(|r| r.rel_diff).fold(0.0, f64::max);
    ctx.summary.text("comparisons", rows.len().to_string());
    ctx.summary.text("failed", failed.to_string());
    ctx.summary.num("worst_rel_diff", worst);
    if failed > 0 {
        return Err(RunError::NotCertified(format!(
            "{failed} of {} comparisons exceed relative tolerance {:e}",
            rows.len(),
            cls.rel_tolerance
        )));
    }
    Ok(())
}
