use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use oho_core::harness::{
    run, sweep_random, PerturbTarget, PerturbationSchedule, RunConfig, RunTrace, SweepSpec,
};
use oho_core::Error;

const EXIT_CONFIG: u8 = 1;
const EXIT_HALT: u8 = 2;
const EXIT_IO: u8 = 3;

#[derive(Parser)]
#[command(
    name = "oho",
    version,
    about = "Online hyperparameter optimization for SGD-trained classifiers"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train once and write the per-step trace CSV.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the config seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Random search over initial hyperparameters; writes a per-trial summary CSV.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        trials: usize,
        /// Worker threads (default: number of CPUs).
        #[arg(long, env = "OHO_NUM_WORKERS")]
        workers: Option<usize>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_parser = parse_range, default_value = "0.0001,0.2")]
        alpha_range: (f64, f64),
        #[arg(long, value_parser = parse_range, default_value = "0,0.0001")]
        lambda_range: (f64, f64),
        /// Validation loss defining the hit step.
        #[arg(long)]
        target_loss: Option<f64>,
        /// Seeds the hyperparameter draws.
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Train with forced hyperparameter overwrites; also writes a frozen-hyperparameter
    /// companion run next to `--out` with extension `.frozen.csv`.
    Perturb {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum)]
        target: Target,
        #[arg(long)]
        value: f64,
        /// Comma-separated epochs (0-based) at whose start the overwrite happens;
        /// empty for none.
        #[arg(long, value_parser = parse_epochs, default_value = "")]
        at: Epochs,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Target {
    Alpha,
    Lambda,
}

fn parse_range(s: &str) -> Result<(f64, f64), String> {
    let (lo, hi) = s
        .split_once(',')
        .ok_or_else(|| format!("expected LO,HI, got `{s}`"))?;
    let p = |x: &str| x.trim().parse::<f64>().map_err(|e| format!("`{x}`: {e}"));
    Ok((p(lo)?, p(hi)?))
}

#[derive(Clone)]
struct Epochs(Vec<usize>);

fn parse_epochs(s: &str) -> Result<Epochs, String> {
    s.split(',')
        .map(str::trim)
        .filter(|x| !x.is_empty())
        .map(|x| x.parse::<usize>().map_err(|e| format!("`{x}`: {e}")))
        .collect::<Result<_, _>>()
        .map(Epochs)
}

struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::Config(_) | Error::Dimension { .. } => EXIT_CONFIG,
            Error::NonFinite { .. } | Error::Instability { .. } => EXIT_HALT,
            Error::Io { .. } | Error::Idx(_) | Error::Csv(_) => EXIT_IO,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn load_config(path: &Path, seed: Option<u64>) -> Result<RunConfig, Failure> {
    let mut cfg = RunConfig::from_path(path).map_err(|e| {
        let mut f = Failure::from(e);
        f.message = format!("{}: {}", path.display(), f.message);
        f
    })?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

/// Writes the trace and turns a halted run into exit code 2.
fn finish(trace: &RunTrace, out: &Path) -> Result<(), Failure> {
    trace.write_csv_file(out)?;
    if let Some(h) = &trace.halt {
        return Err(Failure {
            code: EXIT_HALT,
            message: format!(
                "numerical halt at step {} (epoch {}): {}; partial trace written to {}",
                h.step,
                h.epoch,
                h.message,
                out.display()
            ),
        });
    }
    Ok(())
}

fn summarize(trace: &RunTrace, out: &Path) {
    let val = trace
        .final_val_loss()
        .map_or("n/a".to_string(), |v| format!("{v:.6}"));
    eprintln!(
        "{} steps, final val loss {val}, {:.2}s -> {}",
        trace.records.len(),
        trace.wallclock_secs,
        out.display()
    );
}

fn execute(cmd: Command) -> Result<(), Failure> {
    match cmd {
        Command::Train { config, out, seed } => {
            let cfg = load_config(&config, seed)?;
            let trace = run(&cfg)?;
            summarize(&trace, &out);
            finish(&trace, &out)
        }
        Command::Sweep {
            config,
            trials,
            workers,
            out,
            alpha_range,
            lambda_range,
            target_loss,
            seed,
        } => {
            let cfg = load_config(&config, None)?;
            let workers = workers
                .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
            let spec = SweepSpec {
                n_trials: trials,
                alpha_range,
                lambda_range,
                target_loss,
                seed,
                workers,
            };
            let report = sweep_random(&cfg, &spec)?;
            report.write_files(&out)?;
            eprintln!(
                "{} trials on {workers} workers -> {}",
                report.trials.len(),
                out.display()
            );
            Ok(())
        }
        Command::Perturb {
            config,
            target,
            value,
            at,
            out,
            seed,
        } => {
            let mut cfg = load_config(&config, seed)?;
            let target = match target {
                Target::Alpha => PerturbTarget::Alpha,
                Target::Lambda => PerturbTarget::Lambda,
            };
            cfg.perturbation = Some(PerturbationSchedule {
                target,
                value,
                epochs: at.0,
                freeze: false,
            });
            cfg.validate()?;
            let mut frozen_cfg = cfg.clone();
            if let Some(p) = frozen_cfg.perturbation.as_mut() {
                p.freeze = true;
            }
            let trace = run(&cfg)?;
            let frozen = run(&frozen_cfg)?;
            let frozen_out = out.with_extension("frozen.csv");
            summarize(&trace, &out);
            summarize(&frozen, &frozen_out);
            frozen.write_csv_file(&frozen_out)?;
            finish(&trace, &out)?;
            finish(&frozen, &frozen_out)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
