use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Learning-rate schedule for the non-adaptive baselines.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SchedulerSpec {
    Fixed {
        base_lr: f64,
    },
    /// `base * decay^floor(step / step_size)`
    Step {
        base_lr: f64,
        step_size: usize,
        decay: f64,
    },
    /// `base * decay^step`
    Exp {
        base_lr: f64,
        decay: f64,
    },
    /// Half-cosine from `base` to zero over `horizon` steps, zero afterwards.
    Cosine {
        base_lr: f64,
        horizon: usize,
    },
}

impl SchedulerSpec {
    pub fn base_lr(&self) -> f64 {
        match *self {
            SchedulerSpec::Fixed { base_lr }
            | SchedulerSpec::Step { base_lr, .. }
            | SchedulerSpec::Exp { base_lr, .. }
            | SchedulerSpec::Cosine { base_lr, .. } => base_lr,
        }
    }

    /// Same schedule shape with a different starting rate.
    pub fn with_base_lr(self, lr: f64) -> Self {
        match self {
            SchedulerSpec::Fixed { .. } => SchedulerSpec::Fixed { base_lr: lr },
            SchedulerSpec::Step {
                step_size, decay, ..
            } => SchedulerSpec::Step {
                base_lr: lr,
                step_size,
                decay,
            },
            SchedulerSpec::Exp { decay, .. } => SchedulerSpec::Exp { base_lr: lr, decay },
            SchedulerSpec::Cosine { horizon, .. } => SchedulerSpec::Cosine {
                base_lr: lr,
                horizon,
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        let base = self.base_lr();
        if !(base > 0.0 && base.is_finite()) {
            return Err(Error::config("scheduler base_lr must be > 0"));
        }
        match *self {
            SchedulerSpec::Fixed { .. } => Ok(()),
            SchedulerSpec::Step {
                step_size, decay, ..
            } => {
                if step_size == 0 {
                    return Err(Error::config("scheduler step_size must be >= 1"));
                }
                check_decay(decay)
            }
            SchedulerSpec::Exp { decay, .. } => check_decay(decay),
            SchedulerSpec::Cosine { horizon, .. } => {
                if horizon == 0 {
                    return Err(Error::config("cosine scheduler horizon must be >= 1"));
                }
                Ok(())
            }
        }
    }
}

fn check_decay(decay: f64) -> Result<()> {
    if decay > 0.0 && decay <= 1.0 {
        Ok(())
    } else {
        Err(Error::config("scheduler decay must lie in (0, 1]"))
    }
}

/// Learning rate at training step `step` (0-based).
pub fn scheduler_lr(spec: &SchedulerSpec, step: usize) -> Result<f64> {
    spec.validate()?;
    let lr = match *spec {
        SchedulerSpec::Fixed { base_lr } => base_lr,
        SchedulerSpec::Step {
            base_lr,
            step_size,
            decay,
        } => base_lr * decay.powi((step / step_size) as i32),
        SchedulerSpec::Exp { base_lr, decay } => base_lr * decay.powf(step as f64),
        SchedulerSpec::Cosine { base_lr, horizon } => {
            let t = step.min(horizon) as f64 / horizon as f64;
            (0.5 * base_lr * (1.0 + (std::f64::consts::PI * t).cos())).max(0.0)
        }
    };
    Ok(lr)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixed_is_constant() {
        let s = SchedulerSpec::Fixed { base_lr: 0.01 };
        for step in [0, 1, 1000] {
            assert_eq!(scheduler_lr(&s, step).unwrap(), 0.01);
        }
    }

    #[test]
    fn step_decays_twice() {
        let s = SchedulerSpec::Step {
            base_lr: 0.1,
            step_size: 10,
            decay: 0.1,
        };
        assert!((scheduler_lr(&s, 25).unwrap() - 0.001).abs() < 1e-15);
        assert_eq!(scheduler_lr(&s, 9).unwrap(), 0.1);
    }

    #[test]
    fn exp_and_cosine() {
        let e = SchedulerSpec::Exp {
            base_lr: 0.2,
            decay: 0.5,
        };
        assert_eq!(scheduler_lr(&e, 3).unwrap(), 0.025);
        let c = SchedulerSpec::Cosine {
            base_lr: 0.1,
            horizon: 100,
        };
        assert!((scheduler_lr(&c, 50).unwrap() - 0.05).abs() < 1e-15);
        assert_eq!(scheduler_lr(&c, 0).unwrap(), 0.1);
        assert!(scheduler_lr(&c, 100).unwrap().abs() < 1e-15);
        assert!(scheduler_lr(&c, 150).unwrap() >= 0.0);
    }

    #[test]
    fn config_errors() {
        assert!(scheduler_lr(
            &SchedulerSpec::Cosine {
                base_lr: 0.1,
                horizon: 0
            },
            1
        )
        .is_err());
        assert!(scheduler_lr(&SchedulerSpec::Fixed { base_lr: 0.0 }, 1).is_err());
        assert!(scheduler_lr(
            &SchedulerSpec::Step {
                base_lr: 0.1,
                step_size: 0,
                decay: 0.5
            },
            1
        )
        .is_err());
        assert!(scheduler_lr(
            &SchedulerSpec::Exp {
                base_lr: 0.1,
                decay: 1.5
            },
            1
        )
        .is_err());
    }

    #[test]
    fn parses_tagged_json() {
        let s: SchedulerSpec =
            serde_json::from_str(r#"{"kind":"step","base_lr":0.1,"step_size":5,"decay":0.5}"#)
                .unwrap();
        assert_eq!(
            s,
            SchedulerSpec::Step {
                base_lr: 0.1,
                step_size: 5,
                decay: 0.5
            }
        );
    }
}
