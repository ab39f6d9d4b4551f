use ndarray::{Array2, Axis, Zip};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::mlp::{targets, Architecture, Dense, Gradients, InputNormalization, MlpModel};
use crate::colorspace::ChromaticityPoint;
use crate::constellation::SymbolBits;
use crate::error::{Error, Result};
use crate::rng::{stream, StreamDomain};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Optimizer {
    Sgd,
    Adam { beta1: f64, beta2: f64, epsilon: f64 },
}

impl Default for Optimizer {
    fn default() -> Self {
        Optimizer::Adam {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LearningRateSchedule {
    #[default]
    Constant,
    /// Half-cosine decay from the base rate to zero over all steps.
    Cosine,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingConfig {
    pub sample_count: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub optimizer: Optimizer,
    pub schedule: LearningRateSchedule,
    /// Full-dataset loss is recorded every this many epochs (and after the last one).
    pub checkpoint_every: usize,
    pub seed: u64,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            sample_count: 15_000,
            epochs: 5_000,
            batch_size: 4_096,
            learning_rate: 1e-3,
            optimizer: Optimizer::default(),
            schedule: LearningRateSchedule::Constant,
            checkpoint_every: 10,
            seed: 0,
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 || self.checkpoint_every == 0 {
            return Err(Error::Config("epochs, batch size and checkpoint interval must be >= 1".into()));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::Config(format!("learning rate {} must be positive", self.learning_rate)));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainingReport {
    /// `(epoch, full-dataset loss)`; epoch 0 is the initialization.
    pub loss_history: Vec<(usize, f64)>,
    pub best_epoch: usize,
    pub best_loss: f64,
}

pub struct TrainedModel {
    pub model: MlpModel,
    pub report: TrainingReport,
}

struct AdamState {
    m: Vec<Dense>,
    v: Vec<Dense>,
    t: i32,
}

fn zeros_like(layers: &[Dense]) -> Vec<Dense> {
    layers.iter().map(|l| Dense::zeros(l.weights.nrows(), l.weights.ncols())).collect()
}

fn apply_update(model: &mut MlpModel, grads: &Gradients, optimizer: &Optimizer, state: &mut AdamState, lr: f64) {
    match *optimizer {
        Optimizer::Sgd => {
            for (layer, g) in model.layers_mut().iter_mut().zip(&grads.layers) {
                layer.weights.scaled_add(-lr, &g.weights);
                layer.bias.scaled_add(-lr, &g.bias);
            }
        }
        Optimizer::Adam { beta1, beta2, epsilon } => {
            state.t += 1;
            let c1 = 1.0 - beta1.powi(state.t);
            let c2 = 1.0 - beta2.powi(state.t);
            let step = lr / c1;
            let update = |p: f64, g: f64, m: &mut f64, v: &mut f64| {
                *m = beta1 * *m + (1.0 - beta1) * g;
                *v = beta2 * *v + (1.0 - beta2) * g * g;
                p - step * *m / ((*v / c2).sqrt() + epsilon)
            };
            for (((layer, g), m), v) in model
                .layers_mut()
                .iter_mut()
                .zip(&grads.layers)
                .zip(&mut state.m)
                .zip(&mut state.v)
            {
                Zip::from(&mut layer.weights)
                    .and(&g.weights)
                    .and(&mut m.weights)
                    .and(&mut v.weights)
                    .for_each(|p, &g, m, v| *p = update(*p, g, m, v));
                Zip::from(&mut layer.bias)
                    .and(&g.bias)
                    .and(&mut m.bias)
                    .and(&mut v.bias)
                    .for_each(|p, &g, m, v| *p = update(*p, g, m, v));
            }
        }
    }
}

fn dataset_loss(model: &MlpModel, x: &Array2<f64>, t: &Array2<f64>) -> f64 {
    const CHUNK: usize = 4096;
    let mut total = 0.0;
    for start in (0..x.nrows()).step_by(CHUNK) {
        let end = (start + CHUNK).min(x.nrows());
        let xs = x.slice(ndarray::s![start..end, ..]);
        let ts = t.slice(ndarray::s![start..end, ..]);
        total += model.loss(xs, ts) * (end - start) as f64;
    }
    total / x.nrows() as f64
}

/// Mini-batch training on mean binary cross-entropy. Returns the parameters
/// with the lowest recorded full-dataset loss.
pub fn train(
    dataset: &[(ChromaticityPoint, SymbolBits)],
    arch: Architecture,
    config: &TrainingConfig,
) -> Result<TrainedModel> {
    config.validate()?;
    let Some((_, first)) = dataset.first() else {
        return Err(Error::Config("empty training set".into()));
    };
    let outputs = first.len();
    if dataset.iter().any(|(p, b)| b.len() != outputs || !p.is_finite()) {
        return Err(Error::Config("training labels must share one width and inputs must be finite".into()));
    }

    let mut rng = stream(config.seed, StreamDomain::Model, 0);
    let mut model = MlpModel::init(arch, outputs, &mut rng)?;
    let points: Vec<_> = dataset.iter().map(|(p, _)| *p).collect();
    let labels: Vec<_> = dataset.iter().map(|(_, b)| *b).collect();
    model.set_normalization(InputNormalization::from_bounding_box(&points));
    let x = model.input_matrix(&points);
    let t = targets(&labels, outputs);

    let n = dataset.len();
    let batch = config.batch_size.min(n);
    let batches_per_epoch = n.div_ceil(batch);
    let total_steps = (config.epochs * batches_per_epoch) as f64;
    let mut state = AdamState {
        m: zeros_like(model.layers()),
        v: zeros_like(model.layers()),
        t: 0,
    };

    let initial = dataset_loss(&model, &x, &t);
    let mut report = TrainingReport {
        loss_history: vec![(0, initial)],
        best_epoch: 0,
        best_loss: initial,
    };
    let mut best = model.clone();
    let mut order: Vec<usize> = (0..n).collect();
    let mut step = 0usize;

    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(batch) {
            let xb = x.select(Axis(0), chunk);
            let tb = t.select(Axis(0), chunk);
            let (loss, grads) = model.loss_and_gradients(xb.view(), tb.view());
            if !loss.is_finite() {
                return Err(Error::Diverged { epoch, loss });
            }
            let lr = match config.schedule {
                LearningRateSchedule::Constant => config.learning_rate,
                LearningRateSchedule::Cosine => {
                    0.5 * config.learning_rate * (1.0 + (std::f64::consts::PI * step as f64 / total_steps).cos())
                }
            };
            apply_update(&mut model, &grads, &config.optimizer, &mut state, lr);
            step += 1;
        }

        if epoch % config.checkpoint_every == 0 || epoch == config.epochs {
            let loss = dataset_loss(&model, &x, &t);
            if !loss.is_finite() {
                return Err(Error::Diverged { epoch, loss });
            }
            report.loss_history.push((epoch, loss));
            if loss < report.best_loss {
                report.best_loss = loss;
                report.best_epoch = epoch;
                best = model.clone();
            }
        }
    }

    Ok(TrainedModel { model: best, report })
}
