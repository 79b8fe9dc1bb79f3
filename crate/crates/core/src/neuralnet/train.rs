use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::network::{DenseNetwork, Gradients};
use crate::error::{Error, Result};
use crate::seed;

/// Probabilities are clamped into `[PROB_CLAMP, 1 - PROB_CLAMP]` before any log.
pub const PROB_CLAMP: f64 = 1e-7;

pub fn clamp_probability(p: f64) -> f64 {
    p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Loss {
    /// Sum of squared errors over outputs, averaged over the batch.
    SquaredError,
    /// Binary cross-entropy averaged over all entries.
    BinaryLogLoss,
}

impl Loss {
    /// Loss value and its gradient with respect to the predictions.
    pub fn evaluate(self, pred: &DMatrix<f64>, target: &DMatrix<f64>) -> Result<(f64, DMatrix<f64>)> {
        if pred.shape() != target.shape() {
            return Err(Error::domain(format!(
                "prediction {:?} and target {:?} shapes differ",
                pred.shape(),
                target.shape()
            )));
        }
        let batch = pred.nrows().max(1) as f64;
        match self {
            Loss::SquaredError => {
                let diff = pred - target;
                Ok((diff.norm_squared() / batch, diff * (2.0 / batch)))
            }
            Loss::BinaryLogLoss => {
                let n = pred.len().max(1) as f64;
                let mut value = 0.0;
                let grad = pred.zip_map(target, |p, y| {
                    let pc = clamp_probability(p);
                    value -= y * pc.ln() + (1.0 - y) * (1.0 - pc).ln();
                    if p == pc {
                        (-(y / pc) + (1.0 - y) / (1.0 - pc)) / n
                    } else {
                        0.0
                    }
                });
                Ok((value / n, grad))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    Sgd,
    Adam { beta1: f64, beta2: f64, eps: f64 },
}

impl Default for OptimizerKind {
    fn default() -> Self {
        OptimizerKind::Adam { beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub optimizer: OptimizerKind,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig { learning_rate: 1e-3, batch_size: 32, epochs: 100, optimizer: OptimizerKind::default(), seed: 0 }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!("learning rate must be positive, got {}", self.learning_rate)));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be at least 1".into()));
        }
        if let OptimizerKind::Adam { beta1, beta2, eps } = self.optimizer {
            if !((0.0..1.0).contains(&beta1) && (0.0..1.0).contains(&beta2) && eps > 0.0) {
                return Err(Error::Config("adam needs beta1, beta2 in [0, 1) and eps > 0".into()));
            }
        }
        Ok(())
    }
}

/// Optimizer state for one network.
#[derive(Debug, Clone, PartialEq)]
pub struct Optimizer {
    kind: OptimizerKind,
    learning_rate: f64,
    step: u64,
    first: Option<Gradients>,
    second: Option<Gradients>,
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, learning_rate: f64) -> Self {
        Optimizer { kind, learning_rate, step: 0, first: None, second: None }
    }

    pub fn from_config(config: &TrainConfig) -> Self {
        Self::new(config.optimizer, config.learning_rate)
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    /// Descends along `grads`.
    pub fn step(&mut self, net: &mut DenseNetwork, grads: &Gradients) -> Result<()> {
        if grads.layers.len() != net.layers.len()
            || grads
                .layers
                .iter()
                .zip(&net.layers)
                .any(|((w, b), l)| w.shape() != l.weights.shape() || b.len() != l.bias.len())
        {
            return Err(Error::domain("gradient shapes do not match the network"));
        }
        self.step += 1;
        let lr = self.learning_rate;
        match self.kind {
            OptimizerKind::Sgd => {
                for (layer, (gw, gb)) in net.layers.iter_mut().zip(&grads.layers) {
                    layer.weights -= gw * lr;
                    layer.bias -= gb * lr;
                }
            }
            OptimizerKind::Adam { beta1, beta2, eps } => {
                let m = self.first.get_or_insert_with(|| Gradients::zeros_like(net));
                let v = self.second.get_or_insert_with(|| Gradients::zeros_like(net));
                let t = self.step as i32;
                let c1 = 1.0 - beta1.powi(t);
                let c2 = 1.0 - beta2.powi(t);
                for (l, layer) in net.layers.iter_mut().enumerate() {
                    let (gw, gb) = &grads.layers[l];
                    let (mw, mb) = &mut m.layers[l];
                    let (vw, vb) = &mut v.layers[l];
                    adam_update(layer.weights.as_mut_slice(), gw.as_slice(), mw.as_mut_slice(), vw.as_mut_slice(), (beta1, beta2, eps, c1, c2, lr));
                    adam_update(layer.bias.as_mut_slice(), gb.as_slice(), mb.as_mut_slice(), vb.as_mut_slice(), (beta1, beta2, eps, c1, c2, lr));
                }
            }
        }
        Ok(())
    }
}

fn adam_update(theta: &mut [f64], g: &[f64], m: &mut [f64], v: &mut [f64], (b1, b2, eps, c1, c2, lr): (f64, f64, f64, f64, f64, f64)) {
    for i in 0..theta.len() {
        m[i] = b1 * m[i] + (1.0 - b1) * g[i];
        v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
        let mhat = m[i] / c1;
        let vhat = v[i] / c2;
        theta[i] -= lr * mhat / (vhat.sqrt() + eps);
    }
}

/// Loss and parameter gradients of `loss(net(inputs), targets)`.
pub fn loss_and_gradients(net: &DenseNetwork, inputs: &DMatrix<f64>, targets: &DMatrix<f64>, loss: Loss) -> Result<(f64, Gradients)> {
    let trace = net.forward_trace(inputs)?;
    let (value, grad) = loss.evaluate(trace.output(), targets)?;
    let (grads, _) = net.backward(&trace, &grad)?;
    Ok((value, grads))
}

pub(crate) fn select_rows(m: &DMatrix<f64>, rows: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), m.ncols(), |r, c| m[(rows[r], c)])
}

/// Mini-batch training with a seeded shuffle each epoch. Returns the mean
/// training loss per epoch.
pub fn fit(net: &mut DenseNetwork, inputs: &DMatrix<f64>, targets: &DMatrix<f64>, loss: Loss, config: &TrainConfig) -> Result<Vec<f64>> {
    config.validate()?;
    if inputs.nrows() == 0 || inputs.nrows() != targets.nrows() {
        return Err(Error::domain(format!("{} inputs vs {} targets", inputs.nrows(), targets.nrows())));
    }
    let mut rng = seed::rng(seed::derive_seed(config.seed, "fit-shuffle"));
    let mut opt = Optimizer::from_config(config);
    let mut order: Vec<usize> = (0..inputs.nrows()).collect();
    let mut history = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for chunk in order.chunks(config.batch_size) {
            let x = select_rows(inputs, chunk);
            let y = select_rows(targets, chunk);
            let (value, grads) = loss_and_gradients(net, &x, &y, loss)?;
            if !value.is_finite() {
                return Err(Error::Numeric(format!("non-finite training loss at epoch {epoch}")));
            }
            total += value * chunk.len() as f64;
            opt.step(net, &grads)?;
        }
        history.push(total / inputs.nrows() as f64);
    }
    if !net.is_finite() {
        return Err(Error::Numeric("parameters diverged to non-finite values".into()));
    }
    Ok(history)
}

/// Column means and standard deviations; zero deviations are replaced by 1.
pub fn column_stats(m: &DMatrix<f64>) -> (DVector<f64>, DVector<f64>) {
    let n = m.nrows().max(1) as f64;
    let mean = DVector::from_iterator(m.ncols(), m.column_iter().map(|c| c.sum() / n));
    let scale = DVector::from_iterator(
        m.ncols(),
        m.column_iter().zip(mean.iter()).map(|(c, mu)| {
            let var = c.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / n;
            let sd = var.sqrt();
            if sd > 1e-12 {
                sd
            } else {
                1.0
            }
        }),
    );
    (mean, scale)
}
