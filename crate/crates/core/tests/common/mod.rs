#![allow(dead_code)]

use std::sync::Arc;

use oho_core::data::{synth_blobs, Dataset};
use oho_core::inner::{GroupingScheme, HyperVector};
use oho_core::numeric::{
    DenseMatrix, EpsPolicy, Layout, Minibatch, NetworkSpec, Objective, ParamVector,
};
use oho_core::oho::{oho_train_step, MetaConfig, OhoState};
use oho_core::Result;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-10)
}

pub fn max_rel_err(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(&x, &y)| rel_err(x, y))
        .fold(0.0, f64::max)
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Per-parameter `(alpha column, lambda column)` read off the layout segments.
pub fn param_hyper_map(g: &GroupingScheme) -> Vec<(usize, usize)> {
    let mut out = Vec::with_capacity(g.layout().len());
    for (si, seg) in g.layout().segments().iter().enumerate() {
        let idx = g.segment_hyper(si);
        out.extend(std::iter::repeat_n(idx, seg.len));
    }
    out
}

/// Hessian assembled column by column from central differences of the gradient
/// along the coordinate axes, then symmetrized.
pub fn dense_hessian<O: Objective + ?Sized>(
    model: &O,
    theta: &ParamVector,
    batch: &Minibatch,
    step: f64,
) -> DenseMatrix {
    let n = theta.len();
    let mut h = DenseMatrix::zeros(n, n);
    for j in 0..n {
        let d = step * (1.0 + theta[j].abs());
        let mut tp = theta.clone();
        tp[j] += d;
        let mut tm = theta.clone();
        tm[j] -= d;
        let (_, gp) = model.loss_grad(&tp, batch).unwrap();
        let (_, gm) = model.loss_grad(&tm, batch).unwrap();
        for i in 0..n {
            h.set(i, j, (gp[i] - gm[i]) / (2.0 * d));
        }
    }
    let mut s = DenseMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            s.set(i, j, 0.5 * (h.get(i, j) + h.get(j, i)));
        }
    }
    s
}

/// Wraps a model so that every Hessian-vector product goes through [`dense_hessian`].
pub struct DenseHessianOracle<O> {
    pub inner: O,
    pub step: f64,
}

impl<O: Objective> Objective for DenseHessianOracle<O> {
    fn layout(&self) -> Arc<Layout> {
        self.inner.layout()
    }

    fn loss(&self, theta: &ParamVector, batch: &Minibatch) -> Result<f64> {
        self.inner.loss(theta, batch)
    }

    fn loss_grad(&self, theta: &ParamVector, batch: &Minibatch) -> Result<(f64, ParamVector)> {
        self.inner.loss_grad(theta, batch)
    }

    fn hvp(
        &self,
        theta: &ParamVector,
        v: &ParamVector,
        batch: &Minibatch,
        _eps: EpsPolicy,
    ) -> Result<ParamVector> {
        let h = dense_hessian(&self.inner, theta, batch, self.step);
        theta.with_values(h.matvec(v.values())?)
    }
}

/// SGD with fixed hyperparameters, written out element by element.
pub fn train_fixed<O: Objective + ?Sized>(
    model: &O,
    theta0: &ParamVector,
    phi: &[f64],
    grouping: &GroupingScheme,
    batches: &[Minibatch],
) -> ParamVector {
    let map = param_hyper_map(grouping);
    let mut theta = theta0.clone();
    for b in batches {
        let (_, g) = model.loss_grad(&theta, b).unwrap();
        let next: Vec<f64> = (0..theta.len())
            .map(|i| {
                let (a, l) = (phi[map[i].0], phi[map[i].1]);
                theta[i] - a * (g[i] + 2.0 * l * theta[i])
            })
            .collect();
        theta = theta.with_values(next).unwrap();
    }
    theta
}

/// Forward sensitivity `d theta_T / d phi` by explicit accumulation of
/// `sum_i (prod_{j > i} J_j) G_i`, with `J_j = I - A H_j - 2 A Lambda`.
pub fn unrolled_influence<O: Objective + ?Sized>(
    model: &O,
    theta0: &ParamVector,
    phi: &[f64],
    grouping: &GroupingScheme,
    batches: &[Minibatch],
    hessian: &dyn Fn(&ParamVector, &Minibatch) -> DenseMatrix,
) -> DenseMatrix {
    let n = theta0.len();
    let m = phi.len();
    let map = param_hyper_map(grouping);
    let mut theta = theta0.clone();
    let mut jacobians = Vec::new();
    let mut injections = Vec::new();
    for b in batches {
        let (_, g) = model.loss_grad(&theta, b).unwrap();
        let h = hessian(&theta, b);
        let mut j = DenseMatrix::zeros(n, n);
        let mut gi = DenseMatrix::zeros(n, m);
        for r in 0..n {
            let (ac, lc) = map[r];
            let (a, l) = (phi[ac], phi[lc]);
            for c in 0..n {
                let ident = if r == c { 1.0 } else { 0.0 };
                let decay = if r == c { 2.0 * a * l } else { 0.0 };
                j.set(r, c, ident - a * h.get(r, c) - decay);
            }
            gi.set(r, ac, -(g[r] + 2.0 * l * theta[r]));
            gi.set(r, lc, -2.0 * a * theta[r]);
        }
        jacobians.push(j);
        injections.push(gi);
        let next: Vec<f64> = (0..n)
            .map(|i| {
                let (a, l) = (phi[map[i].0], phi[map[i].1]);
                theta[i] - a * (g[i] + 2.0 * l * theta[i])
            })
            .collect();
        theta = theta.with_values(next).unwrap();
    }
    let t = batches.len();
    let mut total = DenseMatrix::zeros(n, m);
    for i in 0..t {
        let mut term = injections[i].clone();
        for jac in &jacobians[i + 1..] {
            term = jac.matmul(&term).unwrap();
        }
        for (o, x) in total.data_mut().iter_mut().zip(term.data()) {
            *o += x;
        }
    }
    total
}

/// Central finite difference of `L_val(theta_T(phi))` in each hyperparameter.
pub fn fd_hypergradient<O: Objective + ?Sized>(
    model: &O,
    theta0: &ParamVector,
    phi: &[f64],
    grouping: &GroupingScheme,
    batches: &[Minibatch],
    val: &Minibatch,
    rel_step: f64,
) -> Vec<f64> {
    (0..phi.len())
        .map(|c| {
            let h = if phi[c] == 0.0 {
                rel_step
            } else {
                rel_step * phi[c].abs()
            };
            let mut p = phi.to_vec();
            p[c] += h;
            let lp = model
                .loss(&train_fixed(model, theta0, &p, grouping, batches), val)
                .unwrap();
            p[c] = phi[c] - h;
            let lm = model
                .loss(&train_fixed(model, theta0, &p, grouping, batches), val)
                .unwrap();
            (lp - lm) / (2.0 * h)
        })
        .collect()
}

/// Runs the joint step with `eta = 0` over `batches` against a fixed outer batch;
/// returns the last hypergradient and the final state.
pub fn oho_fixed_phi<O: Objective + ?Sized>(
    model: &O,
    theta0: &ParamVector,
    phi: &HyperVector,
    grouping: &GroupingScheme,
    batches: &[Minibatch],
    val: &Minibatch,
    eps: EpsPolicy,
) -> (Vec<f64>, OhoState) {
    let mut state = OhoState::new(theta0.clone(), phi.clone(), grouping).unwrap();
    let config = MetaConfig::new(0.0);
    let mut last = Vec::new();
    for b in batches {
        let mut outer = || Ok(val.clone());
        let r = oho_train_step(&mut state, model, grouping, b, &mut outer, &config, eps).unwrap();
        last = r.hypergrad;
    }
    (last, state)
}

/// `n` labelled points from overlapping blobs, as a single dataset.
pub fn blob_data(
    n_classes: usize,
    per_class: usize,
    dim: usize,
    spread: f64,
    seed: u64,
) -> Dataset {
    let (x, y) = synth_blobs(n_classes, per_class, dim, spread, seed).unwrap();
    Dataset::new(x, y).unwrap()
}

/// Consecutive batches of `size` cycling through `data` until `steps` batches exist.
pub fn cyclic_batches(data: &Dataset, size: usize, steps: usize) -> Vec<Minibatch> {
    let n = data.len();
    (0..steps)
        .map(|s| {
            let idx: Vec<usize> = (0..size).map(|k| (s * size + k) % n).collect();
            data.batch(&idx).unwrap()
        })
        .collect()
}

pub fn init_theta(spec: &NetworkSpec, seed: u64) -> ParamVector {
    spec.init_params(&mut ChaCha8Rng::seed_from_u64(seed))
}

/// Initial parameters plus small Gaussian noise, so biases are nonzero and no
/// pre-activation sits exactly on the ReLU kink.
pub fn jittered_theta(spec: &NetworkSpec, seed: u64) -> ParamVector {
    use rand::Rng;
    use rand_distr::StandardNormal;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let mut theta = spec.init_params(&mut rng);
    for x in theta.values_mut() {
        *x += 0.1 * rng.sample::<f64, _>(StandardNormal);
    }
    theta
}
