use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::{Method, PerturbTarget, RunConfig};
use super::diagnostics::GradientCorrelation;
use super::trace::{EpochRecord, Halt, RunTrace, StepRecord};
use crate::data::{BatchStream, Dataset, DatasetSplit};
use crate::error::{Error, Result};
use crate::inner::{scheduler_lr, sgd_step, GroupingScheme, HyperVector};
use crate::numeric::{Minibatch, NetworkSpec, Objective, ParamVector};
use crate::oho::{oho_train_step, OhoState, OuterData};

/// Independent RNG stream identifiers derived from the run seed.
const STREAM_INIT: u64 = 0;
const STREAM_TRAIN: u64 = 1;
const STREAM_VAL: u64 = 2;
const STREAM_OUTER_TRAIN: u64 = 3;

/// SplitMix64 finalizer over `seed` and a stream id.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Loads the configured dataset and trains.
pub fn run(config: &RunConfig) -> Result<RunTrace> {
    config.validate()?;
    let split = config.dataset.load()?;
    run_with_split(config, &split)
}

/// Trains on already loaded data.
///
/// A numerical failure (non-finite loss, parameters, hyperparameters, or influence
/// entries) ends the run early; the partial trace is returned with `halt` set.
pub fn run_with_split(config: &RunConfig, split: &DatasetSplit) -> Result<RunTrace> {
    config.validate()?;
    let model = &config.network;
    check_data(model, split)?;

    let grouping = GroupingScheme::new(config.grouping, config.tie_alpha(), model.layout())?;
    let mut init_rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, STREAM_INIT));
    let theta = model.init_params(&mut init_rng);
    let phi = grouping.init_hyper(config.alpha0, config.lambda0)?;
    let mut state = OhoState::new(theta, phi, &grouping)?;

    let meta = config.meta();
    if let Some(m) = meta {
        if m.outer_data == OuterData::Validation && split.validation.is_empty() {
            return Err(Error::config(
                "dataset.val_count: validation split is empty but method.oho.outer_data is validation",
            ));
        }
    }

    let val_full = full_batch(&split.validation)?;
    let test_full = full_batch(&split.test)?;
    let full_loss = |theta: &ParamVector, b: &Option<Minibatch>| -> Result<Option<f64>> {
        b.as_ref().map(|b| model.loss(theta, b)).transpose()
    };

    let mut train_stream = BatchStream::new(
        split.train.len(),
        config.batch_size.min(split.train.len()),
        derive_seed(config.seed, STREAM_TRAIN),
    )?;
    let mut outer_stream = match meta {
        Some(m) => {
            let (data, stream) = match m.outer_data {
                OuterData::Validation => (&split.validation, STREAM_VAL),
                OuterData::Training => (&split.train, STREAM_OUTER_TRAIN),
            };
            Some((
                data,
                BatchStream::new(
                    data.len(),
                    m.val_batch_size.min(data.len()),
                    derive_seed(config.seed, stream),
                )?,
            ))
        }
        None => None,
    };
    let mut gc = if config.diagnostics.grad_correlation {
        Some(GradientCorrelation::new(config.diagnostics.gc_window)?)
    } else {
        None
    };

    let mut trace = RunTrace::new(grouping.entry_names());
    let start = Instant::now();
    match full_loss(&state.theta, &val_full) {
        Ok(l) => trace.initial_val_loss = l,
        Err(e) if e.is_numerical() => {
            trace.halt = Some(halt(0, 0, &e));
            return Ok(trace);
        }
        Err(e) => return Err(e),
    }

    let mut frozen = false;
    'epochs: for epoch in 0..config.epochs {
        if let Some(p) = &config.perturbation {
            if p.epochs.contains(&epoch) {
                state
                    .phi
                    .overwrite(p.target == PerturbTarget::Alpha, p.value);
                frozen |= p.freeze;
            }
        }
        let mut loss_sum = 0.0;
        let batches = train_stream.epoch_indices();
        let n_batches = batches.len();
        for idx in batches {
            let step = state.step;
            let batch = split.train.batch(&idx)?;
            let outcome = match (&config.method, meta) {
                (Method::Oho(m), _) if !frozen => {
                    let phi_used = state.phi.values().to_vec();
                    let (data, stream) = outer_stream.as_mut().expect("outer stream for oho");
                    let mut next_outer = || stream.next_batch(data);
                    oho_train_step(
                        &mut state,
                        model,
                        &grouping,
                        &batch,
                        &mut next_outer,
                        m,
                        config.hvp_eps,
                    )
                    .and_then(|r| {
                        check_theta(&state.theta)?;
                        Ok(StepOutcome {
                            train_loss: r.train_loss,
                            grad: r.train_grad.into_values(),
                            outer_loss: Some(r.outer_loss),
                            phi: phi_used,
                            influence_norms: config
                                .diagnostics
                                .influence_norms
                                .then_some(r.influence_norms),
                        })
                    })
                }
                (Method::Scheduler(s), _) => scheduler_lr(s, step).and_then(|lr| {
                    let phi = grouping.init_hyper(lr, config.lambda0)?;
                    plain_step(&mut state, model, &grouping, &batch, &phi)
                }),
                _ => {
                    let phi = state.phi.clone();
                    plain_step(&mut state, model, &grouping, &batch, &phi)
                }
            };
            let out = match outcome {
                Ok(o) => o,
                Err(e) if e.is_numerical() => {
                    trace.halt = Some(halt(step, epoch, &e));
                    break 'epochs;
                }
                Err(e) => return Err(e),
            };
            loss_sum += out.train_loss;
            let grad_corr = gc.as_mut().and_then(|g| g.push(&out.grad));
            trace.records.push(StepRecord {
                step,
                epoch,
                train_loss: out.train_loss,
                val_loss: out.outer_loss,
                epoch_val_loss: None,
                test_loss: None,
                phi: out.phi,
                influence_norms: out.influence_norms,
                grad_corr,
            });
        }

        let (val_loss, test_loss) = match full_loss(&state.theta, &val_full)
            .and_then(|v| Ok((v, full_loss(&state.theta, &test_full)?)))
        {
            Ok(v) => v,
            Err(e) if e.is_numerical() => {
                trace.halt = Some(halt(state.step, epoch, &e));
                break 'epochs;
            }
            Err(e) => return Err(e),
        };
        if let Some(last) = trace.records.last_mut() {
            last.epoch_val_loss = val_loss;
            last.test_loss = test_loss;
        }
        trace.epochs.push(EpochRecord {
            epoch,
            steps: state.step,
            mean_train_loss: loss_sum / n_batches.max(1) as f64,
            val_loss,
            test_loss,
        });
    }
    trace.wallclock_secs = start.elapsed().as_secs_f64();
    Ok(trace)
}

struct StepOutcome {
    train_loss: f64,
    grad: Vec<f64>,
    outer_loss: Option<f64>,
    phi: Vec<f64>,
    influence_norms: Option<Vec<f64>>,
}

/// Parameter step with fixed hyperparameters; no influence tracking.
fn plain_step(
    state: &mut OhoState,
    model: &NetworkSpec,
    grouping: &GroupingScheme,
    batch: &Minibatch,
    phi: &HyperVector,
) -> Result<StepOutcome> {
    let (train_loss, grad) = model.loss_grad(&state.theta, batch)?;
    let theta = sgd_step(&state.theta, &grad, phi, grouping)?;
    check_theta(&theta)?;
    state.theta = theta;
    state.step += 1;
    Ok(StepOutcome {
        train_loss,
        grad: grad.into_values(),
        outer_loss: None,
        phi: phi.values().to_vec(),
        influence_norms: None,
    })
}

fn check_theta(theta: &ParamVector) -> Result<()> {
    if theta.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFinite {
            context: "parameters after step",
        })
    }
}

fn halt(step: usize, epoch: usize, e: &Error) -> Halt {
    Halt {
        step,
        epoch,
        message: e.to_string(),
    }
}

fn full_batch(d: &Dataset) -> Result<Option<Minibatch>> {
    if d.is_empty() {
        Ok(None)
    } else {
        d.as_batch().map(Some)
    }
}

fn check_data(model: &NetworkSpec, split: &DatasetSplit) -> Result<()> {
    if split.train.is_empty() {
        return Err(Error::config("dataset: training split is empty"));
    }
    for (name, d) in [
        ("train", &split.train),
        ("validation", &split.validation),
        ("test", &split.test),
    ] {
        if d.is_empty() {
            continue;
        }
        if d.width() != model.input_dim() {
            return Err(Error::config(format!(
                "network.layer_sizes[0]: {} does not match {name} input width {}",
                model.input_dim(),
                d.width()
            )));
        }
        if let Some(&y) = d.labels.iter().max() {
            if y >= model.n_classes() {
                return Err(Error::config(format!(
                    "network.layer_sizes: output width {} too small for {name} label {y}",
                    model.n_classes()
                )));
            }
        }
    }
    Ok(())
}
