//! Online tuning of per-group learning rates and weight decays by forward-mode
//! hypergradients, for fully-connected classifiers trained with SGD.

pub mod data;
pub mod error;
pub mod harness;
pub mod inner;
pub mod numeric;
pub mod oho;

pub use error::{Error, Result};
pub use harness::{run, sweep_random, RunConfig, RunTrace, SweepSpec};
pub use inner::{GroupingMode, GroupingScheme, HyperVector};
pub use numeric::{Minibatch, NetworkSpec, Objective, ParamVector};
pub use oho::{oho_train_step, InfluenceMatrix, MetaConfig, OhoState};
