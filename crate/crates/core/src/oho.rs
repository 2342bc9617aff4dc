//! Influence-matrix recursion, validation hypergradient, and the meta update.
//!
//! The parameter trajectory `theta_{t+1} = theta_t - A (grad_t + 2 Lambda theta_t)`
//! is treated as a recurrent system driven by minibatches. Its sensitivity to the
//! hyperparameters is carried forward one step at a time:
//!
//! ```text
//! Gamma_{t+1} = (I - A H_t - 2 A Lambda) Gamma_t + G_t
//! dL_val/dphi = Gamma_{t+1}^T grad L_val(theta_{t+1})
//! ```
//!
//! where `A` and `Lambda` are the per-parameter learning rates and decays, `H_t`
//! the minibatch Hessian, and `G_t` the immediate Jacobian `d theta_{t+1} / d phi_t`.

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::inner::{sgd_step, GroupingScheme, HyperVector};
use crate::numeric::{dot, DenseMatrix, EpsPolicy, Minibatch, Objective, ParamVector};

/// Dense `|theta| x |phi|` sensitivity matrix, stored one column per hyperparameter.
#[derive(Debug, Clone, PartialEq)]
pub struct InfluenceMatrix {
    n_params: usize,
    columns: Vec<Vec<f64>>,
}

impl InfluenceMatrix {
    pub fn zeros(n_params: usize, n_hyper: usize) -> Self {
        InfluenceMatrix {
            n_params,
            columns: vec![vec![0.0; n_params]; n_hyper],
        }
    }

    pub fn from_columns(n_params: usize, columns: Vec<Vec<f64>>) -> Result<Self> {
        for c in &columns {
            check_len("influence column", n_params, c.len())?;
        }
        Ok(InfluenceMatrix { n_params, columns })
    }

    pub fn n_params(&self) -> usize {
        self.n_params
    }

    pub fn n_hyper(&self) -> usize {
        self.columns.len()
    }

    pub fn column(&self, c: usize) -> &[f64] {
        &self.columns[c]
    }

    pub fn columns(&self) -> &[Vec<f64>] {
        &self.columns
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.columns[col][row]
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut m = DenseMatrix::zeros(self.n_params, self.n_hyper());
        for (c, col) in self.columns.iter().enumerate() {
            for (r, &x) in col.iter().enumerate() {
                m.set(r, c, x);
            }
        }
        m
    }

    pub fn is_zero(&self) -> bool {
        self.columns.iter().flatten().all(|&x| x == 0.0)
    }

    pub fn is_finite(&self) -> bool {
        self.columns.iter().flatten().all(|x| x.is_finite())
    }

    /// Squared Frobenius norm of each column.
    pub fn column_sq_norms(&self) -> Vec<f64> {
        self.columns.iter().map(|c| dot(c, c)).collect()
    }

    pub fn fill_zero(&mut self) {
        self.columns.iter_mut().for_each(|c| c.fill(0.0));
    }
}

/// Which data the outer (hyper)gradient is evaluated on.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OuterData {
    #[default]
    Validation,
    Training,
}

/// Meta-optimizer settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetaConfig {
    /// Meta learning rate.
    pub eta: f64,
    #[serde(default = "default_val_batch")]
    pub val_batch_size: usize,
    /// Zero the influence matrix after every `n` completed steps.
    #[serde(default)]
    pub reset_interval: Option<usize>,
    #[serde(default)]
    pub outer_data: OuterData,
    #[serde(default = "default_true")]
    pub clamp_nonnegative: bool,
}

fn default_val_batch() -> usize {
    100
}

fn default_true() -> bool {
    true
}

impl MetaConfig {
    pub fn new(eta: f64) -> Self {
        MetaConfig {
            eta,
            val_batch_size: default_val_batch(),
            reset_interval: None,
            outer_data: OuterData::Validation,
            clamp_nonnegative: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        // eta = 0 is accepted: it disables the meta update and is the reference
        // point for equivalence with plain SGD.
        if !(self.eta >= 0.0 && self.eta.is_finite()) {
            return Err(Error::config("meta.eta must be a finite value >= 0"));
        }
        if self.val_batch_size == 0 {
            return Err(Error::config("meta.val_batch_size must be >= 1"));
        }
        if self.reset_interval == Some(0) {
            return Err(Error::config("meta.reset_interval must be >= 1 when set"));
        }
        Ok(())
    }
}

/// Jointly evolving parameters, hyperparameters, and influence matrix of one run.
#[derive(Debug, Clone)]
pub struct OhoState {
    pub theta: ParamVector,
    pub phi: HyperVector,
    pub gamma: InfluenceMatrix,
    pub step: usize,
}

impl OhoState {
    pub fn new(theta: ParamVector, phi: HyperVector, grouping: &GroupingScheme) -> Result<Self> {
        grouping.check_params(&theta, "OhoState parameters")?;
        grouping.check_hyper(&phi, "OhoState hyperparameters")?;
        let gamma = InfluenceMatrix::zeros(theta.len(), phi.len());
        Ok(OhoState {
            theta,
            phi,
            gamma,
            step: 0,
        })
    }
}

/// `G = d theta_{t+1} / d phi_t` for the coupled-decay SGD update.
///
/// The learning-rate column of a segment holds `-(grad_i + 2 lambda theta_i)`,
/// its decay column `-2 alpha theta_i`; all other entries are zero.
pub fn immediate_jacobian(
    theta: &ParamVector,
    grad: &ParamVector,
    phi: &HyperVector,
    grouping: &GroupingScheme,
) -> Result<InfluenceMatrix> {
    theta.check_same_layout(grad, "immediate_jacobian gradient")?;
    grouping.check_params(theta, "immediate_jacobian parameters")?;
    grouping.check_hyper(phi, "immediate_jacobian hyperparameters")?;
    let h = phi.values();
    let mut g = InfluenceMatrix::zeros(theta.len(), phi.len());
    for (si, seg) in grouping.layout().segments().iter().enumerate() {
        let (ai, li) = grouping.segment_hyper(si);
        let (alpha, lambda) = (h[ai], h[li]);
        for i in seg.offset..seg.offset + seg.len {
            g.columns[ai][i] = -(grad[i] + 2.0 * lambda * theta[i]);
            g.columns[li][i] = -2.0 * alpha * theta[i];
        }
    }
    Ok(g)
}

/// Advances the influence matrix by one step:
/// `Gamma' = Gamma - A (H Gamma) - 2 A Lambda Gamma + G`.
///
/// `batch` and `grad` must be the training minibatch and gradient used for the
/// parameter step at `state.theta`. One Hessian-vector product per column.
pub fn influence_update<M: Objective + ?Sized>(
    state: &OhoState,
    model: &M,
    grouping: &GroupingScheme,
    batch: &Minibatch,
    grad: &ParamVector,
    eps: EpsPolicy,
) -> Result<InfluenceMatrix> {
    let g = immediate_jacobian(&state.theta, grad, &state.phi, grouping)?;
    check_len(
        "influence matrix rows",
        state.theta.len(),
        state.gamma.n_params(),
    )?;
    check_len(
        "influence matrix columns",
        state.phi.len(),
        state.gamma.n_hyper(),
    )?;
    let h = state.phi.values();
    let segments = grouping.layout().segments();
    let names = state.phi.entries();

    let mut columns = Vec::with_capacity(state.gamma.n_hyper());
    for (c, (col, g_col)) in state.gamma.columns.iter().zip(g.columns).enumerate() {
        let instability = || Error::Instability {
            column: names[c].to_string(),
            step: state.step,
        };
        let v = state.theta.with_values(col.clone())?;
        let hv = model.hvp(&state.theta, &v, batch, eps).map_err(|e| {
            if e.is_numerical() {
                instability()
            } else {
                e
            }
        })?;
        let mut next = g_col;
        for (si, seg) in segments.iter().enumerate() {
            let (ai, li) = grouping.segment_hyper(si);
            let (alpha, lambda) = (h[ai], h[li]);
            for i in seg.offset..seg.offset + seg.len {
                next[i] += col[i] - alpha * hv[i] - 2.0 * alpha * lambda * col[i];
            }
        }
        if !next.iter().all(|x| x.is_finite()) {
            return Err(instability());
        }
        columns.push(next);
    }
    Ok(InfluenceMatrix {
        n_params: state.gamma.n_params(),
        columns,
    })
}

/// `Gamma^T grad L_val`, one entry per hyperparameter.
pub fn hypergradient(gamma: &InfluenceMatrix, val_grad: &ParamVector) -> Result<Vec<f64>> {
    check_len("hypergradient", gamma.n_params(), val_grad.len())?;
    Ok(gamma
        .columns
        .iter()
        .map(|c| dot(c, val_grad.values()))
        .collect())
}

/// `phi - eta * hypergrad`, optionally clamped at zero.
pub fn meta_step(phi: &HyperVector, hypergrad: &[f64], config: &MetaConfig) -> Result<HyperVector> {
    check_len("meta_step", phi.len(), hypergrad.len())?;
    let values = phi
        .values()
        .iter()
        .zip(hypergrad)
        .map(|(&p, &d)| {
            let next = p - config.eta * d;
            if config.clamp_nonnegative {
                next.max(0.0)
            } else {
                next
            }
        })
        .collect();
    phi.with_values(values)
}

pub fn reset_influence(state: &mut OhoState) {
    state.gamma.fill_zero();
}

/// What a single joint step observed.
#[derive(Debug, Clone)]
pub struct StepReport {
    /// Training minibatch loss at `theta_t`.
    pub train_loss: f64,
    /// Training minibatch gradient at `theta_t` (without the decay term).
    pub train_grad: ParamVector,
    /// Outer minibatch loss at `theta_{t+1}`.
    pub outer_loss: f64,
    pub hypergrad: Vec<f64>,
    /// Per-column squared norms of the influence matrix used for `hypergrad`
    /// (taken before any reset).
    pub influence_norms: Vec<f64>,
}

/// One joint parameter/hyperparameter step.
///
/// Order: training gradient at `theta_t`; parameter step with `phi_t`; influence
/// update; draw the outer minibatch; outer gradient at `theta_{t+1}`; meta step;
/// optional influence reset. `state` is left untouched when an error is returned.
pub fn oho_train_step<M: Objective + ?Sized>(
    state: &mut OhoState,
    model: &M,
    grouping: &GroupingScheme,
    train_batch: &Minibatch,
    next_outer: &mut dyn FnMut() -> Result<Minibatch>,
    config: &MetaConfig,
    eps: EpsPolicy,
) -> Result<StepReport> {
    let (train_loss, grad) = model.loss_grad(&state.theta, train_batch)?;
    let theta = sgd_step(&state.theta, &grad, &state.phi, grouping)?;
    let mut gamma = influence_update(state, model, grouping, train_batch, &grad, eps)?;
    let outer = next_outer()?;
    let (outer_loss, outer_grad) = model.loss_grad(&theta, &outer)?;
    let hypergrad = hypergradient(&gamma, &outer_grad)?;
    let phi = meta_step(&state.phi, &hypergrad, config)?;
    if phi.values().iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite {
            context: "hyperparameters after meta step",
        });
    }
    let influence_norms = gamma.column_sq_norms();
    if let Some(n) = config.reset_interval {
        if (state.step + 1).is_multiple_of(n) {
            gamma.fill_zero();
        }
    }
    state.theta = theta;
    state.phi = phi;
    state.gamma = gamma;
    state.step += 1;
    Ok(StepReport {
        train_loss,
        train_grad: grad,
        outer_loss,
        hypergrad,
        influence_norms,
    })
}
