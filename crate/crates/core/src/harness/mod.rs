//! Run configuration, the training driver, traces, diagnostics, and random search.

mod config;
mod diagnostics;
mod run;
mod sweep;
mod trace;

pub use config::{
    DatasetSource, Diagnostics, Method, PerturbTarget, PerturbationSchedule, RunConfig,
};
pub use diagnostics::{cosine, gradient_correlation, influence_norms, GradientCorrelation};
pub use run::{derive_seed, run, run_with_split};
pub use sweep::{sweep_random, SweepReport, SweepSpec, TrialResult};
pub use trace::{fmt_f64, EpochRecord, Halt, RunTrace, StepRecord};
