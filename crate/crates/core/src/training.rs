//! Minibatch training loop shared by every task.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::network::Network;
use crate::optim::{OptimizerKind, OptimizerState};
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrainConfig {
    pub optimizer: OptimizerKind,
    pub learning_rate: f64,
    pub epochs: usize,
    /// `None` trains full-batch.
    pub batch_size: Option<usize>,
    /// Drives minibatch shuffling only; weight init takes its own seed.
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { optimizer: OptimizerKind::ADAM, learning_rate: 1e-3, epochs: 100, batch_size: None, seed: 0 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainReport {
    /// Loss of the untrained network on the full training set.
    pub initial_loss: f64,
    /// Sum of minibatch losses seen during each epoch.
    pub epoch_losses: Vec<f64>,
}

impl TrainReport {
    pub fn final_loss(&self) -> f64 {
        self.epoch_losses.last().copied().unwrap_or(self.initial_loss)
    }
}

/// Full-dataset loss without keeping gradients around.
pub fn dataset_loss<T: Real>(net: &Network<T>, inputs: &Matrix<T>, targets: &Matrix<T>) -> Result<f64> {
    let trace = net.forward(inputs)?;
    Ok(net.loss(&trace, targets)?.as_f64())
}

/// Trains `net` in place. `on_epoch(epoch, net)` runs once before training
/// (epoch 0) and after every epoch.
pub fn train<T: Real>(
    net: &mut Network<T>,
    inputs: &Matrix<T>,
    targets: &Matrix<T>,
    config: &TrainConfig,
    mut on_epoch: impl FnMut(usize, &Network<T>) -> Result<()>,
) -> Result<TrainReport> {
    if inputs.rows() != targets.rows() {
        return Err(Error::Shape { op: "train", left: inputs.shape(), right: targets.shape() });
    }
    if inputs.rows() == 0 {
        return Err(Error::config("training set is empty"));
    }
    if !(config.learning_rate > 0.0 && config.learning_rate.is_finite()) {
        return Err(Error::config(format!("learning rate must be positive, got {}", config.learning_rate)));
    }
    let n = inputs.rows();
    let batch = config.batch_size.unwrap_or(n).clamp(1, n);
    let mut optimizer = OptimizerState::new(config.optimizer, config.learning_rate);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..n).collect();

    let initial_loss = dataset_loss(net, inputs, targets)?;
    on_epoch(0, net)?;

    let mut epoch_losses = Vec::with_capacity(config.epochs);
    for epoch in 1..=config.epochs {
        let mut total = 0.0;
        if batch == n {
            total += step(net, &mut optimizer, inputs, targets)?;
        } else {
            order.shuffle(&mut rng);
            for chunk in order.chunks(batch) {
                let x = inputs.select_rows(chunk);
                let y = targets.select_rows(chunk);
                total += step(net, &mut optimizer, &x, &y)?;
            }
        }
        if !total.is_finite() {
            return Err(Error::Diverged(format!("loss became {total} in epoch {epoch}")));
        }
        epoch_losses.push(total);
        on_epoch(epoch, net)?;
    }
    Ok(TrainReport { initial_loss, epoch_losses })
}

fn step<T: Real>(net: &mut Network<T>, opt: &mut OptimizerState<T>, x: &Matrix<T>, y: &Matrix<T>) -> Result<f64> {
    let trace = net.forward(x).map_err(diverged)?;
    let loss = net.loss(&trace, y)?.as_f64();
    let grads = net.backward(&trace, y).map_err(diverged)?;
    if !grads.is_finite() {
        return Err(Error::Diverged("non-finite gradient".into()));
    }
    opt.step(&mut net.parameters_mut(), &grads.tensors())?;
    Ok(loss)
}

fn diverged(e: Error) -> Error {
    match e {
        Error::NonFinite { op, value } => Error::Diverged(format!("{op} saw {value}")),
        other => other,
    }
}
