use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use pcwk_cli::{parse_spec, run};

/// Spectral-domain estimation of linear functionals of periodically
/// correlated sequences.
#[derive(Debug, Parser)]
#[command(name = "pcwk", version)]
struct Args {
    /// Problem specification (JSON).
    #[arg(long)]
    spec: PathBuf,
    /// Output directory for the CSV reports.
    #[arg(long, default_value = "./out")]
    out: PathBuf,
    /// Validate the specification and print the resolved numerics only.
    #[arg(long)]
    dry_run: bool,
    /// Seed override.
    #[arg(long)]
    seed: Option<u64>,
    /// Grid size override.
    #[arg(long)]
    grid: Option<usize>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("PCWK_LOG", "warn")).init();
    let args = Args::parse();
    let mut spec = match parse_spec(&args.spec) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("{e}");
            return ExitCode::from(1);
        }
    };
    if let Some(seed) = args.seed {
        spec.numerics.seed = seed;
    }
    if let Some(grid) = args.grid {
        if grid < 16 || !grid.is_multiple_of(2) {
            eprintln!("usage error: --grid must be an even number >= 16");
            return ExitCode::from(1);
        }
        spec.numerics.grid = grid;
    }
    if args.dry_run {
        let n = &spec.numerics;
        eprintln!("task: {}", spec.task.name());
        eprintln!("K: {}", spec.lift.harmonics);
        eprintln!("period: {}", spec.lift.period);
        eprintln!("quadrature_points: {}", spec.lift.quadrature_points);
        eprintln!("grid: {}", n.grid);
        eprintln!("truncation: {:?}", n.truncation);
        eprintln!(
            "tolerance: {}",
            n.tolerance
                .map(|t| t.to_string())
                .unwrap_or_else(|| "task default".into())
        );
        eprintln!(
            "max_iter: {}",
            n.max_iter
                .map(|t| t.to_string())
                .unwrap_or_else(|| "task default".into())
        );
        eprintln!("cond_threshold: {:e}", n.cond_threshold);
        eprintln!("seed: {}", n.seed);
        return ExitCode::SUCCESS;
    }
    match run(&spec, &args.out) {
        Ok(outcome) => {
            eprintln!("== pcwk {} ==", spec.task.name());
            for (k, v) in &outcome.summary.records {
                eprintln!("{k:>28}: {v}");
            }
            for f in &outcome.files {
                eprintln!("wrote {}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
