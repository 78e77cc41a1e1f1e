//! RMSProp minibatch training with multiplicative input corruption.

use std::path::Path;

use rand::Rng as _;
use rand::seq::SliceRandom;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::datasets::Dataset;
use crate::error::{Error, Result};
use crate::network::{self, Checkpoint, CheckpointMeta, Gradients, NetParams, Workspace};
use crate::rng::{self, Rng};

pub const RMSPROP_EPSILON: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub learning_rate: f64,
    pub rmsprop_decay: f64,
    pub momentum: f64,
    pub epochs: usize,
    pub lambda_l1: f64,
    pub mult_noise: f64,
    pub seed: u64,
    /// Write a checkpoint every this many epochs; 0 writes only the final one.
    pub checkpoint_every: usize,
    /// Worker threads for per-example passes; results do not depend on it.
    pub threads: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 100,
            learning_rate: 2e-5,
            rmsprop_decay: 0.9,
            momentum: 0.0,
            epochs: 100,
            lambda_l1: network::DEFAULT_LAMBDA,
            mult_noise: 0.01,
            seed: 0,
            checkpoint_every: 0,
            threads: 1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::config(what.to_string()));
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if !(0.0..1.0).contains(&self.rmsprop_decay) {
            return bad("rmsprop_decay must lie in [0, 1)");
        }
        if self.momentum != 0.0 {
            return bad("only momentum 0 is supported");
        }
        if !(self.mult_noise >= 0.0 && self.mult_noise.is_finite()) {
            return bad("mult_noise must be non-negative");
        }
        if !(self.lambda_l1 >= 0.0 && self.lambda_l1.is_finite()) {
            return bad("lambda_l1 must be non-negative");
        }
        if self.threads == 0 {
            return bad("threads must be at least 1");
        }
        Ok(())
    }
}

/// Running mean-square of the gradient per parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct OptState {
    pub v: Gradients,
    pub step_count: u64,
}

impl OptState {
    pub fn new(p: &NetParams) -> Self {
        OptState { v: Gradients::zeros(p.d_in, p.n), step_count: 0 }
    }
}

/// `x * (1 + level * eps)` with standard normal `eps` per element.
pub fn corrupt_multiplicative(x: &[f64], level: f64, rng: &mut Rng) -> Vec<f64> {
    if level == 0.0 {
        return x.to_vec();
    }
    x.iter()
        .map(|&v| {
            let eps: f64 = rng.sample(StandardNormal);
            v * (1.0 + level * eps)
        })
        .collect()
}

/// `v <- decay v + (1 - decay) g^2`, `p <- p - lr g / (sqrt(v) + eps)`.
pub fn rmsprop_step(p: &mut NetParams, g: &Gradients, s: &mut OptState, cfg: &TrainConfig) -> Result<()> {
    if !p.same_shape(g) || !p.same_shape(&s.v) {
        return Err(Error::dim("parameters, gradients and optimizer state differ in shape"));
    }
    if !g.all_finite() {
        return Err(Error::Numeric("gradient".into()));
    }
    let decay = cfg.rmsprop_decay;
    let lr = cfg.learning_rate;
    for ((pt, gt), vt) in p.tensors_mut().into_iter().zip(g.tensors()).zip(s.v.tensors_mut()) {
        for ((pv, &gv), vv) in pt.iter_mut().zip(gt.iter()).zip(vt.iter_mut()) {
            *vv = decay * *vv + (1.0 - decay) * gv * gv;
            *pv -= lr * gv / (vv.sqrt() + RMSPROP_EPSILON);
        }
    }
    s.step_count += 1;
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub params: NetParams,
    pub opt: OptState,
    /// Mean training loss per epoch.
    pub history: Vec<f64>,
}

pub fn train(ds: &Dataset, cfg: &TrainConfig) -> Result<TrainOutcome> {
    let params = network::init_params(ds.d_in(), ds.n, cfg.seed)?;
    train_from(ds, cfg, params, |_, _, _| Ok(()))
}

/// Train and write a checkpoint at `path` every `checkpoint_every` epochs and at the end.
pub fn train_checkpointed(ds: &Dataset, cfg: &TrainConfig, path: &Path) -> Result<TrainOutcome> {
    let params = network::init_params(ds.d_in(), ds.n, cfg.seed)?;
    let every = cfg.checkpoint_every;
    let outcome = train_from(ds, cfg, params, |epoch, p, _| {
        if every > 0 && epoch % every == 0 && epoch < cfg.epochs {
            checkpoint_for(ds, cfg, p.clone(), epoch).save(path)?;
        }
        Ok(())
    })?;
    checkpoint_for(ds, cfg, outcome.params.clone(), cfg.epochs).save(path)?;
    Ok(outcome)
}

pub fn checkpoint_for(ds: &Dataset, cfg: &TrainConfig, params: NetParams, epoch: usize) -> Checkpoint {
    Checkpoint {
        params,
        meta: CheckpointMeta {
            sensor_scale: ds.sensor_scale,
            encoding: ds.encoding.to_json_value(),
            target_mode: ds.target_mode,
            train_seed: cfg.seed,
            phase_seed: ds.phase_seed,
            epoch,
        },
    }
}

/// The epoch loop. `on_epoch(epoch, params, history)` runs after every epoch
/// (1-based) and may abort training by returning an error.
pub fn train_from(
    ds: &Dataset,
    cfg: &TrainConfig,
    mut params: NetParams,
    mut on_epoch: impl FnMut(usize, &NetParams, &[f64]) -> Result<()>,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if ds.is_empty() {
        return Err(Error::config("cannot train on an empty dataset"));
    }
    if params.d_in != ds.d_in() || params.n != ds.n {
        return Err(Error::config(format!(
            "network expects d_in = {}, n = {}; dataset has d_in = {}, n = {}",
            params.d_in,
            params.n,
            ds.d_in(),
            ds.n
        )));
    }
    let mut opt = OptState::new(&params);
    let mut shuffle_rng = rng::stream(cfg.seed, rng::STREAM_SHUFFLE);
    let mut corrupt_rng = rng::stream(cfg.seed, rng::STREAM_CORRUPTION);
    let mut order: Vec<usize> = (0..ds.len()).collect();
    let mut pool = Pool::new(cfg.threads, &params);
    let mut history = Vec::with_capacity(cfg.epochs);
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut shuffle_rng);
        let mut loss_sum = 0.0;
        for (batch, idx) in order.chunks(cfg.batch_size).enumerate() {
            let inputs: Vec<Vec<f64>> =
                idx.iter().map(|&i| corrupt_multiplicative(ds.input(i), cfg.mult_noise, &mut corrupt_rng)).collect();
            let targets: Vec<&[f64]> = idx.iter().map(|&i| ds.target(i)).collect();
            let batch_loss = pool
                .run(&params, &inputs, &targets, cfg.lambda_l1)
                .map_err(|e| match e {
                    Error::Numeric(_) => Error::NonFiniteLoss { epoch, batch },
                    other => other,
                })?;
            if !batch_loss.is_finite() {
                return Err(Error::NonFiniteLoss { epoch, batch });
            }
            loss_sum += batch_loss;
            pool.sum.scale(1.0 / idx.len() as f64);
            rmsprop_step(&mut params, &pool.sum, &mut opt, cfg).map_err(|e| match e {
                Error::Numeric(_) => Error::NonFiniteLoss { epoch, batch },
                other => other,
            })?;
        }
        history.push(loss_sum / ds.len() as f64);
        on_epoch(epoch, &params, &history)?;
    }
    Ok(TrainOutcome { params, opt, history })
}

/// Per-example gradient buffers; examples are reduced strictly in batch order
/// so the result is identical for any thread count.
struct Pool {
    threads: usize,
    workers: Vec<(Workspace, Vec<Gradients>)>,
    sum: Gradients,
}

impl Pool {
    fn new(threads: usize, p: &NetParams) -> Self {
        Pool { threads, workers: Vec::new(), sum: Gradients::zeros(p.d_in, p.n) }
    }

    /// Fills `self.sum` with the summed gradients and returns the summed loss.
    fn run(&mut self, p: &NetParams, inputs: &[Vec<f64>], targets: &[&[f64]], lambda: f64) -> Result<f64> {
        let count = inputs.len();
        let threads = self.threads.min(count).max(1);
        let per = count.div_ceil(threads);
        while self.workers.len() < threads {
            self.workers.push((Workspace::new(p.n), Vec::new()));
        }
        for (_, grads) in self.workers.iter_mut().take(threads) {
            while grads.len() < per {
                grads.push(Gradients::zeros(p.d_in, p.n));
            }
        }
        let mut losses = vec![0.0; count];
        if threads == 1 {
            let (ws, grads) = &mut self.workers[0];
            for (k, l) in losses.iter_mut().enumerate() {
                *l = network::backward_into(p, &inputs[k], targets[k], lambda, ws, &mut grads[k])?;
            }
        } else {
            let results: Vec<Result<()>> = std::thread::scope(|s| {
                let handles: Vec<_> = self
                    .workers
                    .iter_mut()
                    .zip(losses.chunks_mut(per))
                    .enumerate()
                    .map(|(w, ((ws, grads), ls))| {
                        s.spawn(move || {
                            for (j, l) in ls.iter_mut().enumerate() {
                                let k = w * per + j;
                                *l = network::backward_into(p, &inputs[k], targets[k], lambda, ws, &mut grads[j])?;
                            }
                            Ok(())
                        })
                    })
                    .collect();
                handles.into_iter().map(|h| h.join().expect("worker panicked")).collect()
            });
            results.into_iter().collect::<Result<()>>()?;
        }
        self.sum.fill_zero();
        for k in 0..count {
            self.sum.add_assign(&self.workers[k / per].1[k % per]);
        }
        Ok(losses.iter().sum())
    }
}

pub fn history_csv(history: &[f64]) -> String {
    let mut out = String::from("epoch,mean_loss\n");
    for (i, l) in history.iter().enumerate() {
        out.push_str(&format!("{},{:.17e}\n", i + 1, l));
    }
    out
}
