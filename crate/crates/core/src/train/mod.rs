//! Training loop: BCE on normalized residual targets, Adam updates,
//! patience-based early stopping and relative-MSE evaluation.

mod config;
mod early_stop;
mod evaluate;
mod metrics;

use std::time::Instant;

use crate::data::{normalize, Dataset, PairedSample};
use crate::error::{Error, Result};
use crate::model::{backward, forward, Gradients, ModelWeights};
use crate::tensor::{adam_step, bce_loss, ConvKernel, Tensor};
use crate::Rng;

pub use config::TrainConfig;
pub use early_stop::early_stop_check;
pub use evaluate::{evaluate_rmse, NoChangePredictor, ResidualPredictor, RmseReport};
pub use metrics::{parse_metrics, MetricsCsv, MetricsRecord, METRICS_HEADER};

/// Adam first/second moments mirroring the model's kernels.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub first: Vec<ConvKernel<f32>>,
    pub second: Vec<ConvKernel<f32>>,
    /// Number of updates applied so far.
    pub step: u64,
}

impl AdamState {
    pub fn new(weights: &ModelWeights) -> Self {
        let zeros: Vec<_> = weights.layers().iter().map(|l| l.kernel.zeros_like()).collect();
        AdamState {
            first: zeros.clone(),
            second: zeros,
            step: 0,
        }
    }

    /// Applies one Adam update to every kernel and bias.
    pub fn apply(
        &mut self,
        weights: &mut ModelWeights,
        grads: &Gradients<f32>,
        config: &TrainConfig,
    ) -> Result<()> {
        if grads.len() != weights.layers().len() || self.first.len() != grads.len() {
            return Err(Error::shape(format!(
                "adam: {} layers, {} gradients, {} moment sets",
                weights.layers().len(),
                grads.len(),
                self.first.len()
            )));
        }
        self.step += 1;
        let lr = config.learning_rate;
        for (((layer, g), m), v) in weights
            .layers_mut()
            .iter_mut()
            .zip(grads)
            .zip(&mut self.first)
            .zip(&mut self.second)
        {
            let k = &mut layer.kernel;
            adam_step(&mut k.weights, &g.weights, &mut m.weights, &mut v.weights, self.step, lr, &config.adam)?;
            adam_step(&mut k.bias, &g.bias, &mut m.bias, &mut v.bias, self.step, lr, &config.adam)?;
        }
        Ok(())
    }
}

/// Called after every epoch, e.g. to log metrics or write checkpoints.
pub trait TrainObserver {
    /// `improved` is true when this epoch set a new best training loss.
    fn on_epoch(
        &mut self,
        _record: &MetricsRecord,
        _weights: &ModelWeights,
        _improved: bool,
    ) -> Result<()> {
        Ok(())
    }
}

impl TrainObserver for () {}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Weights of the epoch with the lowest mean training loss.
    pub best: ModelWeights,
    pub best_epoch: usize,
    /// Weights after the last completed epoch.
    pub last: ModelWeights,
    pub history: Vec<MetricsRecord>,
    pub stopped_early: bool,
}

fn batch_tensors(samples: &[&PairedSample]) -> Result<(Tensor<f32>, Tensor<f32>)> {
    let inputs: Vec<Tensor<f32>> = samples.iter().map(|s| normalize(&s.lr)).collect();
    let targets: Vec<Tensor<f32>> = samples.iter().map(|s| normalize(&s.residual)).collect();
    Ok((
        Tensor::stack(&inputs.iter().collect::<Vec<_>>())?,
        Tensor::stack(&targets.iter().collect::<Vec<_>>())?,
    ))
}

/// One optimizer step on a batch; returns the batch's mean BCE.
pub fn train_step(
    weights: &mut ModelWeights,
    adam: &mut AdamState,
    batch: &[&PairedSample],
    config: &TrainConfig,
) -> Result<f64> {
    let (x, t) = batch_tensors(batch)?;
    let (y, cache) = forward(weights, &x)?;
    let (loss, dy) = bce_loss(&y, &t)?;
    if !loss.is_finite() {
        return Ok(loss);
    }
    let grads = backward(weights, &cache, &dy)?;
    adam.apply(weights, &grads, config)?;
    Ok(loss)
}

/// Trains `weights` on `data.train` until `max_epochs` or early stopping.
///
/// Every epoch shuffles the training order with stream `epoch` of the seed,
/// runs batches of `batch_size` (the last may be short), and records the
/// sample-weighted mean BCE. Relative MSE is evaluated every `eval_every`
/// epochs and after the last epoch.
pub fn train(
    config: &TrainConfig,
    weights: ModelWeights,
    data: &Dataset,
    observer: &mut dyn TrainObserver,
) -> Result<TrainOutcome> {
    config.validate()?;
    if data.train.is_empty() {
        return Err(Error::config("training split is empty"));
    }
    for (i, s) in data.train.iter().chain(&data.test).enumerate() {
        s.lr.ensure_same_dims(&s.residual, "training sample")?;
        weights
            .config()
            .check_input_size(s.lr.height(), s.lr.width())
            .map_err(|e| Error::config(format!("sample {i}: {e}")))?;
    }

    let root = Rng::new(config.seed);
    let mut weights = weights;
    let mut adam = AdamState::new(&weights);
    let mut best = weights.clone();
    let mut best_loss = f64::INFINITY;
    let mut best_epoch = 0;
    let mut history: Vec<MetricsRecord> = Vec::new();
    let mut losses = Vec::new();
    let mut stopped_early = false;

    for epoch in 1..=config.max_epochs {
        let started = Instant::now();
        let mut order: Vec<usize> = (0..data.train.len()).collect();
        if config.shuffle {
            root.fork(epoch as u64).shuffle(&mut order);
        }
        let mut weighted = 0.0;
        for (b, chunk) in order.chunks(config.batch_size).enumerate() {
            let batch: Vec<&PairedSample> = chunk.iter().map(|&i| &data.train[i]).collect();
            let loss = train_step(&mut weights, &mut adam, &batch, config)?;
            if !loss.is_finite() {
                return Err(Error::Numeric(format!(
                    "epoch {epoch} batch {}: loss is {loss}",
                    b + 1
                )));
            }
            weighted += loss * batch.len() as f64;
        }
        let loss = weighted / data.train.len() as f64;
        losses.push(loss);

        let improved = loss < best_loss - config.min_delta || best_epoch == 0;
        if improved {
            best_loss = best_loss.min(loss);
            best_epoch = epoch;
            best = weights.clone();
        }
        let stop = early_stop_check(&losses, config.patience, config.min_delta);
        let last = stop || epoch == config.max_epochs;
        let evaluate = last || (config.eval_every > 0 && epoch % config.eval_every == 0);
        let (rmse_train, rmse_test) = if evaluate {
            let tr = evaluate_rmse(&weights, &data.train)?.reconstruction;
            let te = if data.test.is_empty() {
                None
            } else {
                Some(evaluate_rmse(&weights, &data.test)?.reconstruction)
            };
            (Some(tr), te)
        } else {
            (None, None)
        };
        let record = MetricsRecord {
            epoch,
            loss,
            rmse_train,
            rmse_test,
            seconds: started.elapsed().as_secs_f64(),
        };
        observer.on_epoch(&record, &weights, improved)?;
        history.push(record);
        if stop && epoch < config.max_epochs {
            stopped_early = true;
            break;
        }
        if stop {
            break;
        }
    }

    Ok(TrainOutcome {
        best,
        best_epoch,
        last: weights,
        history,
        stopped_early,
    })
}
