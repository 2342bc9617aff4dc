use std::io::Write;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::config::{Method, RunConfig};
use super::run::run_with_split;
use super::trace::fmt_f64;
use crate::error::{Error, Result};

/// Random search over the initial learning rate and decay.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub n_trials: usize,
    /// Inclusive-exclusive uniform range for the initial learning rate.
    pub alpha_range: (f64, f64),
    pub lambda_range: (f64, f64),
    /// Validation loss a trial must reach to count as a hit; `None` leaves `hit_step` empty.
    pub target_loss: Option<f64>,
    /// Seeds the draws of initial hyperparameters.
    pub seed: u64,
    /// Number of worker threads; results do not depend on it.
    pub workers: usize,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.workers == 0 {
            return Err(Error::config("workers: must be >= 1"));
        }
        for (name, (lo, hi)) in [
            ("alpha_range", self.alpha_range),
            ("lambda_range", self.lambda_range),
        ] {
            if !(lo.is_finite() && hi.is_finite() && lo >= 0.0 && lo <= hi) {
                return Err(Error::config(format!(
                    "{name}: need finite 0 <= lo <= hi, got ({lo}, {hi})"
                )));
            }
        }
        if self.target_loss.is_some_and(f64::is_nan) {
            return Err(Error::config("target_loss: must not be NaN"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialResult {
    pub trial: usize,
    pub seed: u64,
    pub alpha0: f64,
    pub lambda0: f64,
    pub final_val_loss: Option<f64>,
    pub final_test_loss: Option<f64>,
    pub hit_step: Option<usize>,
    pub steps: usize,
    pub halted: bool,
    pub wallclock_secs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepReport {
    pub trials: Vec<TrialResult>,
}

impl SweepReport {
    /// Per-trial summary; excludes timing so the output is reproducible.
    pub fn write_summary_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "trial",
            "seed",
            "alpha0",
            "lambda0",
            "final_val_loss",
            "final_test_loss",
            "hit_step",
            "steps",
            "halted",
        ])?;
        for t in &self.trials {
            w.write_record([
                t.trial.to_string(),
                t.seed.to_string(),
                fmt_f64(t.alpha0),
                fmt_f64(t.lambda0),
                t.final_val_loss.map(fmt_f64).unwrap_or_default(),
                t.final_test_loss.map(fmt_f64).unwrap_or_default(),
                t.hit_step.map(|s| s.to_string()).unwrap_or_default(),
                t.steps.to_string(),
                t.halted.to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::Csv(e.into()))?;
        Ok(())
    }

    pub fn write_timing_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["trial", "wallclock_secs"])?;
        for t in &self.trials {
            w.write_record([t.trial.to_string(), t.wallclock_secs.to_string()])?;
        }
        w.flush().map_err(|e| Error::Csv(e.into()))?;
        Ok(())
    }

    pub fn summary_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_summary_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv output is utf-8")
    }

    /// Writes `path` and a `.timing.csv` sidecar next to it.
    pub fn write_files(&self, path: &Path) -> Result<()> {
        let create = |p: &Path| {
            std::fs::File::create(p).map_err(|source| Error::Io {
                path: p.to_path_buf(),
                source,
            })
        };
        self.write_summary_csv(create(path)?)?;
        self.write_timing_csv(create(&path.with_extension("timing.csv"))?)
    }

    /// Fraction of trials that reached the target.
    pub fn hit_rate(&self) -> f64 {
        if self.trials.is_empty() {
            return 0.0;
        }
        self.trials.iter().filter(|t| t.hit_step.is_some()).count() as f64
            / self.trials.len() as f64
    }
}

/// Runs `spec.n_trials` independent trainings from `template`, each with its own
/// initial hyperparameters and seed (`template.seed + trial`).
pub fn sweep_random(template: &RunConfig, spec: &SweepSpec) -> Result<SweepReport> {
    template.validate()?;
    spec.validate()?;
    let split = template.dataset.load()?;

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let draw = |rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)| lo + (hi - lo) * rng.random::<f64>();
    let configs: Vec<RunConfig> = (0..spec.n_trials)
        .map(|i| {
            let mut c = template.clone();
            c.alpha0 = draw(&mut rng, spec.alpha_range);
            c.lambda0 = draw(&mut rng, spec.lambda_range);
            c.seed = template.seed.wrapping_add(i as u64);
            if let Method::Scheduler(s) = c.method {
                c.method = Method::Scheduler(s.with_base_lr(c.alpha0));
            }
            c
        })
        .collect();

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(spec.workers)
        .build()
        .map_err(|e| Error::config(format!("workers: {e}")))?;
    let trials = pool.install(|| {
        configs
            .par_iter()
            .enumerate()
            .map(|(i, c)| {
                let trace = run_with_split(c, &split)?;
                Ok(TrialResult {
                    trial: i,
                    seed: c.seed,
                    alpha0: c.alpha0,
                    lambda0: c.lambda0,
                    final_val_loss: trace.final_val_loss(),
                    final_test_loss: trace.final_test_loss(),
                    hit_step: spec.target_loss.and_then(|t| trace.hit_step(t)),
                    steps: trace.records.len(),
                    halted: trace.is_halted(),
                    wallclock_secs: trace.wallclock_secs,
                })
            })
            .collect::<Result<Vec<_>>>()
    })?;
    Ok(SweepReport { trials })
}
