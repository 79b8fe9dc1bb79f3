//! Dense feed-forward networks with exact backpropagation, SGD/Adam and
//! finite-difference gradient checking. Shared by the GAN and the localizer.

mod network;
mod train;

use nalgebra::DMatrix;

pub use network::{Activation, DenseLayer, DenseNetwork, ForwardTrace, Gradients, NetworkDocument};
pub use train::{
    clamp_probability, column_stats, fit, loss_and_gradients, Loss, Optimizer, OptimizerKind, TrainConfig, PROB_CLAMP,
};

use crate::error::{Error, Result};

/// Largest relative disagreement between backprop and central differences
/// over every parameter. The denominator is floored at 1e-6 so parameters
/// with negligible gradient compare absolutely.
pub fn gradient_check(net: &DenseNetwork, batch: &DMatrix<f64>, targets: &DMatrix<f64>, loss: Loss, step_h: f64) -> Result<f64> {
    if !(step_h > 0.0 && step_h <= 1e-2) {
        return Err(Error::domain(format!("finite-difference step must be in (0, 1e-2], got {step_h}")));
    }
    let (_, analytic) = loss_and_gradients(net, batch, targets, loss)?;
    let mut probe = net.clone();
    let mut worst = 0.0f64;
    for i in 0..net.parameter_count() {
        let original = *probe.parameter_mut(i);
        *probe.parameter_mut(i) = original + step_h;
        let (up, _) = loss.evaluate(&probe.forward(batch)?, targets)?;
        *probe.parameter_mut(i) = original - step_h;
        let (down, _) = loss.evaluate(&probe.forward(batch)?, targets)?;
        *probe.parameter_mut(i) = original;
        let numeric = (up - down) / (2.0 * step_h);
        let a = analytic.parameter(i);
        let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-6);
        worst = worst.max(rel);
    }
    Ok(worst)
}
