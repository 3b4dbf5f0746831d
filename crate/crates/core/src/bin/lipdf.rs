//! Command-line front end for the experiment harness.
//!
//! On failure prints one line `error kind=<kind> msg="<message>"` to stderr
//! and exits nonzero.

use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

use lipdf::harness::{emit_csv, run, Experiment, ExperimentConfig, FilterKind, Sweep};
use lipdf::Error;

#[derive(Parser)]
#[command(name = "lipdf", version, about = "Particle filter benchmarks with fitted likelihoods")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Growth-model RMSE benchmark.
    Bench1d(Common),
    /// Robot localization benchmark.
    Mcl(Common),
    /// Least-squares fits of the quadratic observation map.
    FitDemo(Common),
}

#[derive(Args)]
struct Common {
    /// TOML experiment config; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// sir, gpf, lipdf or lipdf-batch.
    #[arg(long)]
    filter: Option<String>,
    #[arg(long)]
    particles: Option<usize>,
    /// Fulcrums per partitioned dimension.
    #[arg(long)]
    fulcrums: Option<usize>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    steps: Option<usize>,
    /// Scan lines (mcl).
    #[arg(long)]
    rays: Option<usize>,
    /// Primary CSV path; other tables go to suffixed siblings.
    #[arg(long)]
    out: Option<PathBuf>,
    /// e.g. `particles=10:500:10`.
    #[arg(long)]
    sweep: Option<String>,
}

fn build_config(experiment: Experiment, args: Common) -> lipdf::Result<ExperimentConfig> {
    let mut cfg = match &args.config {
        Some(path) => {
            let cfg = ExperimentConfig::load(path)?;
            if cfg.experiment != experiment {
                return Err(Error::Config {
                    field: "experiment".into(),
                    reason: format!(
                        "{} describes `{}`, not `{}`",
                        path.display(),
                        cfg.experiment.name(),
                        experiment.name()
                    ),
                });
            }
            cfg
        }
        None => ExperimentConfig::new(experiment),
    };
    if let Some(f) = args.filter {
        cfg.filter = f.parse::<FilterKind>()?;
    }
    if let Some(n) = args.particles {
        cfg.particles = n;
    }
    if let Some(p) = args.fulcrums {
        cfg.lipdf.fulcrums = Some(p);
        cfg.lipdf.fulcrum_counts = None;
        cfg.lipdf.auto_count = Some(false);
    }
    if let Some(k) = args.trials {
        cfg.trials = k;
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(t) = args.steps {
        cfg.steps = Some(t);
    }
    if let Some(r) = args.rays {
        cfg.mcl.rays = r;
    }
    if let Some(o) = args.out {
        cfg.out = Some(o);
    }
    if let Some(s) = args.sweep {
        cfg.sweep = Some(Sweep::parse(&s)?);
    }
    cfg.validate()?;
    Ok(cfg)
}

fn execute(cli: Cli) -> lipdf::Result<()> {
    let (experiment, args) = match cli.command {
        Command::Bench1d(a) => (Experiment::Bench1d, a),
        Command::Mcl(a) => (Experiment::Mcl, a),
        Command::FitDemo(a) => (Experiment::FitDemo, a),
    };
    let cfg = build_config(experiment, args)?;
    let report = run(&cfg)?;
    let mut lines = report.summary.clone();
    if let Some(out) = &cfg.out {
        lines.extend(emit_csv(&report, out)?.iter().map(|p| format!("wrote {}", p.display())));
    }
    // a closed stdout (e.g. piped into `head`) is not a failure of the run
    let mut stdout = io::stdout().lock();
    for line in lines {
        if writeln!(stdout, "{line}").is_err() {
            break;
        }
    }
    Ok(())
}

fn fail(kind: &str, message: &str) -> ExitCode {
    eprintln!("error kind={kind} msg={message:?}");
    ExitCode::from(if kind == "usage" || kind == "config" || kind == "parse" { 2 } else { 1 })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => e.exit(),
        Err(e) => {
            let msg = e.to_string();
            return fail("usage", msg.lines().next().unwrap_or_default().trim_start_matches("error: "));
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(e.kind(), &e.to_string()),
    }
}
