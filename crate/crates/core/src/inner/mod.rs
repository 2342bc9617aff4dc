//! Inner-loop parameter update, hyperparameter grouping, and baseline schedules.

mod grouping;
mod schedule;
mod sgd;

pub use grouping::{GroupingMode, GroupingScheme, HyperEntry, HyperKind, HyperVector};
pub use schedule::{scheduler_lr, SchedulerSpec};
pub use sgd::sgd_step;
