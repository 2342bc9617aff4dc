use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};

/// One row of the per-step trace.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepRecord {
    pub step: usize,
    pub epoch: usize,
    /// Training minibatch loss at the parameters before the step.
    pub train_loss: f64,
    /// Outer minibatch loss after the step (hyperparameter-optimized runs only).
    pub val_loss: Option<f64>,
    /// Full validation loss; filled on the last step of each epoch.
    pub epoch_val_loss: Option<f64>,
    /// Full test loss; filled on the last step of each epoch when a test set exists.
    pub test_loss: Option<f64>,
    /// Hyperparameters used for this step.
    pub phi: Vec<f64>,
    pub influence_norms: Option<Vec<f64>>,
    /// Windowed mean and standard deviation of consecutive-gradient cosines.
    pub grad_corr: Option<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Number of training steps completed at the end of this epoch.
    pub steps: usize,
    pub mean_train_loss: f64,
    pub val_loss: Option<f64>,
    pub test_loss: Option<f64>,
}

/// Why a run stopped before completing all epochs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Halt {
    pub step: usize,
    pub epoch: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunTrace {
    pub hyper_names: Vec<String>,
    pub records: Vec<StepRecord>,
    pub epochs: Vec<EpochRecord>,
    /// Full validation loss before any training.
    pub initial_val_loss: Option<f64>,
    pub halt: Option<Halt>,
    pub wallclock_secs: f64,
}

impl RunTrace {
    pub fn new(hyper_names: Vec<String>) -> Self {
        RunTrace {
            hyper_names,
            records: Vec::new(),
            epochs: Vec::new(),
            initial_val_loss: None,
            halt: None,
            wallclock_secs: 0.0,
        }
    }

    pub fn is_halted(&self) -> bool {
        self.halt.is_some()
    }

    /// Full validation loss after the last completed epoch (or before training).
    pub fn final_val_loss(&self) -> Option<f64> {
        self.epochs
            .iter()
            .rev()
            .find_map(|e| e.val_loss)
            .or(self.initial_val_loss)
    }

    pub fn final_test_loss(&self) -> Option<f64> {
        self.epochs.iter().rev().find_map(|e| e.test_loss)
    }

    pub fn final_phi(&self) -> Option<&[f64]> {
        self.records.last().map(|r| r.phi.as_slice())
    }

    /// Values of one named hyperparameter over all steps.
    pub fn phi_series(&self, name: &str) -> Option<Vec<f64>> {
        let c = self.hyper_names.iter().position(|n| n == name)?;
        Some(self.records.iter().map(|r| r.phi[c]).collect())
    }

    /// Steps needed before the full validation loss first reaches `target`:
    /// 0 if the untrained model already does, otherwise the step count at the
    /// end of the first qualifying epoch.
    pub fn hit_step(&self, target: f64) -> Option<usize> {
        if self.initial_val_loss.is_some_and(|l| l <= target) {
            return Some(0);
        }
        self.epochs
            .iter()
            .find(|e| e.val_loss.is_some_and(|l| l <= target))
            .map(|e| e.steps)
    }

    pub fn csv_header(&self) -> Vec<String> {
        let mut h: Vec<String> = [
            "step",
            "epoch",
            "train_loss",
            "val_loss",
            "epoch_val_loss",
            "test_loss",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect();
        h.extend(self.hyper_names.iter().cloned());
        h.extend(self.hyper_names.iter().map(|n| format!("gammaF.{n}")));
        h.push("gc_mean".into());
        h.push("gc_std".into());
        h
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(self.csv_header())?;
        let n = self.hyper_names.len();
        for r in &self.records {
            let mut row = vec![
                r.step.to_string(),
                r.epoch.to_string(),
                fmt_f64(r.train_loss),
                fmt_opt(r.val_loss),
                fmt_opt(r.epoch_val_loss),
                fmt_opt(r.test_loss),
            ];
            row.extend(r.phi.iter().map(|&x| fmt_f64(x)));
            match &r.influence_norms {
                Some(g) => row.extend(g.iter().map(|&x| fmt_f64(x))),
                None => row.extend(std::iter::repeat_n(String::new(), n)),
            }
            row.push(fmt_opt(r.grad_corr.map(|c| c.0)));
            row.push(fmt_opt(r.grad_corr.map(|c| c.1)));
            w.write_record(&row)?;
        }
        w.flush().map_err(|e| Error::Csv(e.into()))?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv output is utf-8")
    }

    pub fn write_csv_file(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        self.write_csv(std::io::BufWriter::new(file))
    }
}

/// Shortest round-trip decimal, switching to exponent form for very small or large magnitudes.
pub fn fmt_f64(x: f64) -> String {
    let a = x.abs();
    if x == 0.0 || (1e-5..1e16).contains(&a) || !x.is_finite() {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}
