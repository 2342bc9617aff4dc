use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::numeric::{dot, norm2};
use crate::oho::InfluenceMatrix;

/// Squared norm of every influence column.
pub fn influence_norms(gamma: &InfluenceMatrix) -> Vec<f64> {
    gamma.column_sq_norms()
}

/// Cosine similarity; zero when either vector is zero.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let na = norm2(a);
    let nb = norm2(b);
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot(a, b) / (na * nb)
    }
}

/// Streaming mean and standard deviation of the cosine between consecutive gradients,
/// over a sliding window of `window` gradients.
#[derive(Debug, Clone)]
pub struct GradientCorrelation {
    window: usize,
    prev: Option<Vec<f64>>,
    cosines: VecDeque<f64>,
}

impl GradientCorrelation {
    pub fn new(window: usize) -> Result<Self> {
        if window < 2 {
            return Err(Error::config("gradient correlation window must be >= 2"));
        }
        Ok(GradientCorrelation {
            window,
            prev: None,
            cosines: VecDeque::with_capacity(window),
        })
    }

    /// Feeds the next gradient; returns `(mean, std)` once the window is full.
    pub fn push(&mut self, grad: &[f64]) -> Option<(f64, f64)> {
        if let Some(prev) = &self.prev {
            self.cosines.push_back(cosine(prev, grad));
            if self.cosines.len() > self.window - 1 {
                self.cosines.pop_front();
            }
        }
        self.prev = Some(grad.to_vec());
        if self.cosines.len() == self.window - 1 {
            Some(mean_std(self.cosines.iter().copied()))
        } else {
            None
        }
    }
}

fn mean_std(xs: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = xs.clone().count() as f64;
    let mean = xs.clone().sum::<f64>() / n;
    let var = xs.map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Windowed statistics for a whole gradient sequence; entry `t` covers gradients
/// `t + 1 - window ..= t` and is `None` until enough gradients have been seen.
pub fn gradient_correlation(grads: &[Vec<f64>], window: usize) -> Result<Vec<Option<(f64, f64)>>> {
    let mut tracker = GradientCorrelation::new(window)?;
    Ok(grads.iter().map(|g| tracker.push(g)).collect())
}
