use std::sync::Arc;

use super::matrix::{dot, DenseMatrix};
use super::objective::{Minibatch, Objective};
use super::params::{Layout, ParamVector};
use crate::error::{check_len, Error, Result};

/// `L(theta) = mean_b 1/2 (theta - x_b)^T A (theta - x_b)` with symmetric `A`.
///
/// Each batch row is a centre point; labels are ignored. The Hessian is `A`
/// everywhere, so central-difference HVPs are exact up to rounding.
#[derive(Debug, Clone)]
pub struct Quadratic {
    a: DenseMatrix,
    layout: Arc<Layout>,
}

impl Quadratic {
    pub fn new(a: DenseMatrix) -> Result<Self> {
        let n = a.rows();
        Quadratic::with_layout(a, Layout::flat(n))
    }

    pub fn diag(d: &[f64]) -> Self {
        let n = d.len();
        let mut a = DenseMatrix::zeros(n, n);
        for (i, &x) in d.iter().enumerate() {
            a.set(i, i, x);
        }
        Quadratic {
            a,
            layout: Arc::new(Layout::flat(n)),
        }
    }

    pub fn with_layout(a: DenseMatrix, layout: Layout) -> Result<Self> {
        check_len("quadratic matrix must be square", a.rows(), a.cols())?;
        check_len("quadratic layout", a.rows(), layout.len())?;
        for i in 0..a.rows() {
            for j in 0..i {
                if a.get(i, j) != a.get(j, i) {
                    return Err(Error::config("quadratic matrix must be symmetric"));
                }
            }
        }
        Ok(Quadratic {
            a,
            layout: Arc::new(layout),
        })
    }

    pub fn matrix(&self) -> &DenseMatrix {
        &self.a
    }

    pub fn dim(&self) -> usize {
        self.a.rows()
    }

    /// Batch of one point at the origin.
    pub fn origin_batch(&self) -> Minibatch {
        Minibatch::points(&[vec![0.0; self.dim()]]).expect("non-empty batch")
    }

    fn mean_center(&self, batch: &Minibatch) -> Result<Vec<f64>> {
        let n = self.dim();
        check_len("quadratic centre width", n, batch.inputs().cols())?;
        let mut c = vec![0.0; n];
        for r in 0..batch.len() {
            for (ci, x) in c.iter_mut().zip(batch.inputs().row(r)) {
                *ci += x;
            }
        }
        let inv = 1.0 / batch.len() as f64;
        c.iter_mut().for_each(|x| *x *= inv);
        Ok(c)
    }
}

impl Objective for Quadratic {
    fn layout(&self) -> Arc<Layout> {
        self.layout.clone()
    }

    fn loss_grad(&self, theta: &ParamVector, batch: &Minibatch) -> Result<(f64, ParamVector)> {
        check_len("quadratic parameter count", self.dim(), theta.len())?;
        check_len("quadratic centre width", self.dim(), batch.inputs().cols())?;
        let mut loss = 0.0;
        for r in 0..batch.len() {
            let d: Vec<f64> = theta
                .values()
                .iter()
                .zip(batch.inputs().row(r))
                .map(|(t, x)| t - x)
                .collect();
            loss += 0.5 * dot(&d, &self.a.matvec(&d)?);
        }
        loss /= batch.len() as f64;
        let c = self.mean_center(batch)?;
        let d: Vec<f64> = theta.values().iter().zip(&c).map(|(t, x)| t - x).collect();
        let g = self.a.matvec(&d)?;
        if !loss.is_finite() || !g.iter().all(|x| x.is_finite()) {
            return Err(Error::NonFinite {
                context: "quadratic loss",
            });
        }
        Ok((loss, theta.with_values(g)?))
    }
}
