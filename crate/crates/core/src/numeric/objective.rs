use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::matrix::{norm2, norm_inf, DenseMatrix};
use super::params::{Layout, ParamVector};
use crate::error::{check_len, Error, Result};

/// A batch of examples: one input row per label.
#[derive(Debug, Clone, PartialEq)]
pub struct Minibatch {
    inputs: DenseMatrix,
    labels: Vec<usize>,
}

impl Minibatch {
    pub fn new(inputs: DenseMatrix, labels: Vec<usize>) -> Result<Self> {
        check_len("Minibatch labels", inputs.rows(), labels.len())?;
        if labels.is_empty() {
            return Err(Error::Dimension {
                context: "Minibatch must hold at least one example",
                expected: 1,
                actual: 0,
            });
        }
        Ok(Minibatch { inputs, labels })
    }

    /// Batch of unlabelled points (labels all zero); used by the quadratic objective.
    pub fn points(rows: &[Vec<f64>]) -> Result<Self> {
        let inputs = DenseMatrix::from_rows(rows)?;
        let labels = vec![0; inputs.rows()];
        Minibatch::new(inputs, labels)
    }

    pub fn inputs(&self) -> &DenseMatrix {
        &self.inputs
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// Step rule for the central-difference Hessian-vector product.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EpsPolicy {
    /// `eps = scale * (1 + |theta|_inf) / max(|v|_2, 1e-12)`
    Relative { scale: f64 },
    /// `eps = value / max(|v|_2, 1e-12)`; the probe step along `v` has length `value`.
    Absolute { value: f64 },
}

impl Default for EpsPolicy {
    fn default() -> Self {
        EpsPolicy::Relative { scale: 1e-4 }
    }
}

impl EpsPolicy {
    pub fn step(&self, theta: &[f64], v_norm: f64) -> f64 {
        let denom = v_norm.max(1e-12);
        match *self {
            EpsPolicy::Relative { scale } => scale * (1.0 + norm_inf(theta)) / denom,
            EpsPolicy::Absolute { value } => value / denom,
        }
    }
}

/// A differentiable batch loss over a flat parameter vector.
pub trait Objective: Send + Sync {
    fn layout(&self) -> Arc<Layout>;

    fn loss(&self, theta: &ParamVector, batch: &Minibatch) -> Result<f64> {
        self.loss_grad(theta, batch).map(|(l, _)| l)
    }

    /// Batch-mean loss and its gradient with respect to `theta`.
    fn loss_grad(&self, theta: &ParamVector, batch: &Minibatch) -> Result<(f64, ParamVector)>;

    /// Hessian-vector product of the batch loss at `theta`.
    ///
    /// Defaults to the central difference of gradients along `v`.
    fn hvp(
        &self,
        theta: &ParamVector,
        v: &ParamVector,
        batch: &Minibatch,
        eps: EpsPolicy,
    ) -> Result<ParamVector> {
        finite_difference_hvp(self, theta, v, batch, eps)
    }
}

/// `(grad L(theta + eps v) - grad L(theta - eps v)) / (2 eps)`.
///
/// A zero direction returns the zero vector without evaluating any gradient.
pub fn finite_difference_hvp<O: Objective + ?Sized>(
    model: &O,
    theta: &ParamVector,
    v: &ParamVector,
    batch: &Minibatch,
    eps: EpsPolicy,
) -> Result<ParamVector> {
    theta.check_same_layout(v, "hvp direction")?;
    let vn = norm2(v.values());
    if vn == 0.0 {
        return Ok(theta.zeros_like());
    }
    let h = eps.step(theta.values(), vn);
    let (_, gp) = model.loss_grad(&theta.axpy(h, v)?, batch)?;
    let (_, gm) = model.loss_grad(&theta.axpy(-h, v)?, batch)?;
    let inv = 1.0 / (2.0 * h);
    let out: Vec<f64> = gp
        .values()
        .iter()
        .zip(gm.values())
        .map(|(a, b)| (a - b) * inv)
        .collect();
    if !out.iter().all(|x| x.is_finite()) {
        return Err(Error::NonFinite {
            context: "Hessian-vector product",
        });
    }
    theta.with_values(out)
}

/// Convenience wrappers with the signatures used throughout the crate.
pub fn forward_loss<O: Objective + ?Sized>(
    model: &O,
    theta: &ParamVector,
    batch: &Minibatch,
) -> Result<f64> {
    model.loss(theta, batch)
}

pub fn loss_grad<O: Objective + ?Sized>(
    model: &O,
    theta: &ParamVector,
    batch: &Minibatch,
) -> Result<(f64, ParamVector)> {
    model.loss_grad(theta, batch)
}

pub fn hvp<O: Objective + ?Sized>(
    model: &O,
    theta: &ParamVector,
    v: &ParamVector,
    batch: &Minibatch,
    eps: EpsPolicy,
) -> Result<ParamVector> {
    model.hvp(theta, v, batch, eps)
}
