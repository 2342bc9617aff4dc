use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::matrix::dot;
use super::objective::{Minibatch, Objective};
use super::params::{Layout, ParamVector};
use crate::error::{check_len, Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    #[default]
    Relu,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    #[default]
    SoftmaxCrossEntropy,
}

/// Fully-connected classifier: ReLU hidden layers, softmax cross-entropy on the logits.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSpec {
    pub layer_sizes: Vec<usize>,
    #[serde(default)]
    pub activation: Activation,
    #[serde(default)]
    pub loss: LossKind,
}

impl NetworkSpec {
    pub fn new(layer_sizes: Vec<usize>) -> Result<Self> {
        let spec = NetworkSpec {
            layer_sizes,
            activation: Activation::Relu,
            loss: LossKind::SoftmaxCrossEntropy,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.layer_sizes.len() < 2 {
            return Err(Error::config(
                "network needs at least input and output sizes",
            ));
        }
        if self.layer_sizes.contains(&0) {
            return Err(Error::config("network layer sizes must be positive"));
        }
        Ok(())
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn n_classes(&self) -> usize {
        *self.layer_sizes.last().unwrap()
    }

    pub fn num_params(&self) -> usize {
        self.layer_sizes
            .windows(2)
            .map(|w| w[0] * w[1] + w[1])
            .sum()
    }

    /// He-style uniform init: weights in `+-sqrt(6 / fan_in)`, zero biases.
    pub fn init_params<R: Rng + ?Sized>(&self, rng: &mut R) -> ParamVector {
        let layout = Arc::new(Layout::for_network(&self.layer_sizes));
        let mut theta = ParamVector::zeros(layout.clone());
        for (l, w) in self.layer_sizes.windows(2).enumerate() {
            let bound = (6.0 / w[0] as f64).sqrt();
            let seg = layout.segments()[2 * l];
            for x in theta.segment_mut(&seg) {
                *x = rng.random_range(-bound..bound);
            }
        }
        theta
    }

    fn check_theta(&self, theta: &ParamVector) -> Result<()> {
        check_len("network parameter count", self.num_params(), theta.len())?;
        check_len(
            "network parameter segments",
            2 * (self.layer_sizes.len() - 1),
            theta.layout().segments().len(),
        )
    }

    fn check_batch(&self, batch: &Minibatch) -> Result<()> {
        check_len(
            "network input width",
            self.input_dim(),
            batch.inputs().cols(),
        )?;
        let k = self.n_classes();
        if let Some(&bad) = batch.labels().iter().find(|&&y| y >= k) {
            return Err(Error::Dimension {
                context: "class label out of range",
                expected: k,
                actual: bad,
            });
        }
        Ok(())
    }

    /// Pre-activations of every layer (the last entry holds the logits) and
    /// the ReLU outputs of every hidden layer.
    fn forward(&self, theta: &[f64], batch: &Minibatch) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        let n = batch.len();
        let n_layers = self.layer_sizes.len() - 1;
        let mut pre: Vec<Vec<f64>> = Vec::with_capacity(n_layers);
        let mut act: Vec<Vec<f64>> = Vec::with_capacity(n_layers - 1);
        let mut offset = 0;
        for (l, w) in self.layer_sizes.windows(2).enumerate() {
            let (fan_in, fan_out) = (w[0], w[1]);
            let weights = &theta[offset..offset + fan_in * fan_out];
            let bias = &theta[offset + fan_in * fan_out..offset + fan_in * fan_out + fan_out];
            offset += fan_in * fan_out + fan_out;

            let mut z = vec![0.0; n * fan_out];
            for r in 0..n {
                let a_row: &[f64] = if l == 0 {
                    batch.inputs().row(r)
                } else {
                    &act[l - 1][r * fan_in..(r + 1) * fan_in]
                };
                for o in 0..fan_out {
                    z[r * fan_out + o] =
                        bias[o] + dot(&weights[o * fan_in..(o + 1) * fan_in], a_row);
                }
            }
            if l + 1 < n_layers {
                act.push(z.iter().map(|&x| x.max(0.0)).collect());
            }
            pre.push(z);
        }
        (pre, act)
    }

    fn loss_and_logit_grad(&self, logits: &[f64], labels: &[usize]) -> (f64, Vec<f64>) {
        let k = self.n_classes();
        let n = labels.len();
        let inv_n = 1.0 / n as f64;
        let mut total = 0.0;
        let mut dz = vec![0.0; logits.len()];
        for (r, &y) in labels.iter().enumerate() {
            let z = &logits[r * k..(r + 1) * k];
            let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let sum: f64 = z.iter().map(|&v| (v - m).exp()).sum();
            let lse = m + sum.ln();
            total += lse - z[y];
            let d = &mut dz[r * k..(r + 1) * k];
            for c in 0..k {
                d[c] = (z[c] - lse).exp() * inv_n;
            }
            d[y] -= inv_n;
        }
        (total * inv_n, dz)
    }
}

impl Objective for NetworkSpec {
    fn layout(&self) -> Arc<Layout> {
        Arc::new(Layout::for_network(&self.layer_sizes))
    }

    fn loss(&self, theta: &ParamVector, batch: &Minibatch) -> Result<f64> {
        self.check_theta(theta)?;
        self.check_batch(batch)?;
        let (pre, _) = self.forward(theta.values(), batch);
        let (loss, _) = self.loss_and_logit_grad(pre.last().unwrap(), batch.labels());
        if !loss.is_finite() {
            return Err(Error::NonFinite { context: "loss" });
        }
        Ok(loss)
    }

    fn loss_grad(&self, theta: &ParamVector, batch: &Minibatch) -> Result<(f64, ParamVector)> {
        self.check_theta(theta)?;
        self.check_batch(batch)?;
        let values = theta.values();
        let (pre, act) = self.forward(values, batch);
        let (loss, mut delta) = self.loss_and_logit_grad(pre.last().unwrap(), batch.labels());
        if !loss.is_finite() {
            return Err(Error::NonFinite { context: "loss" });
        }

        let n = batch.len();
        let mut grad = vec![0.0; values.len()];
        let offsets: Vec<usize> = self
            .layer_sizes
            .windows(2)
            .scan(0, |off, w| {
                let o = *off;
                *off += w[0] * w[1] + w[1];
                Some(o)
            })
            .collect();

        for l in (0..self.layer_sizes.len() - 1).rev() {
            let (fan_in, fan_out) = (self.layer_sizes[l], self.layer_sizes[l + 1]);
            let off = offsets[l];
            let weights = &values[off..off + fan_in * fan_out];
            let (gw, gb) =
                grad[off..off + fan_in * fan_out + fan_out].split_at_mut(fan_in * fan_out);

            let mut next_delta = if l > 0 {
                vec![0.0; n * fan_in]
            } else {
                Vec::new()
            };
            for r in 0..n {
                let d = &delta[r * fan_out..(r + 1) * fan_out];
                let input_row: &[f64] = if l == 0 {
                    batch.inputs().row(r)
                } else {
                    &act[l - 1][r * fan_in..(r + 1) * fan_in]
                };
                for o in 0..fan_out {
                    let dro = d[o];
                    if dro == 0.0 {
                        continue;
                    }
                    gb[o] += dro;
                    let gw_row = &mut gw[o * fan_in..(o + 1) * fan_in];
                    for (g, a) in gw_row.iter_mut().zip(input_row) {
                        *g += dro * a;
                    }
                    if l > 0 {
                        let nd = &mut next_delta[r * fan_in..(r + 1) * fan_in];
                        for (g, w) in nd.iter_mut().zip(&weights[o * fan_in..(o + 1) * fan_in]) {
                            *g += dro * w;
                        }
                    }
                }
            }
            if l > 0 {
                // relu'(0) = 0
                for (g, &z) in next_delta.iter_mut().zip(&pre[l - 1]) {
                    if z <= 0.0 {
                        *g = 0.0;
                    }
                }
                delta = next_delta;
            }
        }

        if !grad.iter().all(|g| g.is_finite()) {
            return Err(Error::NonFinite {
                context: "gradient",
            });
        }
        Ok((loss, theta.with_values(grad)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::DenseMatrix;

    fn theta_for(spec: &NetworkSpec, values: Vec<f64>) -> ParamVector {
        ParamVector::new(values, spec.layout()).unwrap()
    }

    #[test]
    fn uniform_logits_give_log_k() {
        let spec = NetworkSpec::new(vec![3, 10]).unwrap();
        let theta = ParamVector::zeros(spec.layout());
        let batch = Minibatch::new(
            DenseMatrix::from_rows(&[vec![0.3, -1.0, 2.0]]).unwrap(),
            vec![4],
        )
        .unwrap();
        let l = spec.loss(&theta, &batch).unwrap();
        assert!((l - 10f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn zero_network_any_batch() {
        let spec = NetworkSpec::new(vec![2, 5, 4, 3]).unwrap();
        let theta = ParamVector::zeros(spec.layout());
        let batch = Minibatch::new(
            DenseMatrix::from_rows(&[vec![1.0, 2.0], vec![-3.0, 0.5]]).unwrap(),
            vec![0, 2],
        )
        .unwrap();
        assert!((spec.loss(&theta, &batch).unwrap() - 3f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn two_class_logistic() {
        // weights [1, 0], zero biases
        let spec = NetworkSpec::new(vec![1, 2]).unwrap();
        let theta = theta_for(&spec, vec![1.0, 0.0, 0.0, 0.0]);
        let batch = Minibatch::new(DenseMatrix::from_rows(&[vec![3.0]]).unwrap(), vec![0]).unwrap();
        let l = spec.loss(&theta, &batch).unwrap();
        assert!((l - (1.0 + (-3f64).exp()).ln()).abs() < 1e-12);
        assert!((l - 0.048587).abs() < 1e-6);
    }

    #[test]
    fn shape_mismatch_errors() {
        let spec = NetworkSpec::new(vec![3, 2]).unwrap();
        let theta = ParamVector::flat(vec![0.0; 5]);
        let batch = Minibatch::new(DenseMatrix::zeros(1, 3), vec![0]).unwrap();
        assert!(matches!(
            spec.loss(&theta, &batch),
            Err(Error::Dimension { .. })
        ));
        let theta = ParamVector::zeros(spec.layout());
        let wide = Minibatch::new(DenseMatrix::zeros(1, 4), vec![0]).unwrap();
        assert!(matches!(
            spec.loss_grad(&theta, &wide),
            Err(Error::Dimension { .. })
        ));
        let bad_label = Minibatch::new(DenseMatrix::zeros(1, 3), vec![2]).unwrap();
        assert!(spec.loss(&theta, &bad_label).is_err());
    }

    #[test]
    fn spec_validation() {
        assert!(NetworkSpec::new(vec![3]).is_err());
        assert!(NetworkSpec::new(vec![3, 0, 2]).is_err());
    }

    #[test]
    fn deterministic_bitwise() {
        use rand::SeedableRng;
        let spec = NetworkSpec::new(vec![4, 8, 3]).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let theta = spec.init_params(&mut rng);
        let batch = Minibatch::new(
            DenseMatrix::from_rows(&[vec![0.1, 0.2, -0.3, 0.4], vec![1.0, -1.0, 0.5, 0.0]])
                .unwrap(),
            vec![1, 2],
        )
        .unwrap();
        let (l1, g1) = spec.loss_grad(&theta, &batch).unwrap();
        let (l2, g2) = spec.loss_grad(&theta, &batch).unwrap();
        assert_eq!(l1.to_bits(), l2.to_bits());
        assert!(g1
            .values()
            .iter()
            .zip(g2.values())
            .all(|(a, b)| a.to_bits() == b.to_bits()));
    }
}
