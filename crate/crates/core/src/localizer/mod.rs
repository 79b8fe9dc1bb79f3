//! Position regression from RSS fingerprints and the four-variant benchmark.

mod bench;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

pub use bench::{
    build_variants, error_reduction, prepare_run, run_benchmark, run_single, score_variant, BenchmarkReport, Reduction,
    RunData, RunOutcome, Variant, VariantStats,
};

use crate::error::{Error, Result};
use crate::neuralnet::{column_stats, fit, Activation, DenseNetwork, Loss, TrainConfig};
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalizationSample {
    /// RSS per access point, dBm.
    pub features: Vec<f64>,
    /// `(x, y)` in meters.
    pub target: (f64, f64),
}

/// Seeded shuffle, then the first `floor(n * train_fraction)` samples train.
pub fn split_dataset<T: Clone>(samples: &[T], train_fraction: f64, seed: u64) -> Result<(Vec<T>, Vec<T>)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::domain(format!("train fraction must lie in (0, 1), got {train_fraction}")));
    }
    if samples.len() < 2 {
        return Err(Error::domain("need at least 2 samples to split"));
    }
    let mut idx: Vec<usize> = (0..samples.len()).collect();
    idx.shuffle(&mut seed::rng(seed));
    let cut = (samples.len() as f64 * train_fraction).floor() as usize;
    let train = idx[..cut].iter().map(|&i| samples[i].clone()).collect();
    let test = idx[cut..].iter().map(|&i| samples[i].clone()).collect();
    Ok((train, test))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalizerArchitecture {
    pub hidden: Vec<usize>,
    pub hidden_activation: Activation,
}

impl Default for LocalizerArchitecture {
    fn default() -> Self {
        LocalizerArchitecture { hidden: vec![64, 64], hidden_activation: Activation::Relu }
    }
}

/// Trained regressor plus the normalization it was trained under. Features
/// are z-scored per access point; targets are centered per axis and divided
/// by one shared scale so the training loss stays proportional to the MSE.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalizerModel {
    pub net: DenseNetwork,
    pub feature_mean: Vec<f64>,
    pub feature_scale: Vec<f64>,
    pub target_mean: (f64, f64),
    pub target_scale: f64,
}

impl LocalizerModel {
    pub fn predict(&self, features: &[Vec<f64>]) -> Result<Vec<(f64, f64)>> {
        let dim = self.feature_mean.len();
        if features.iter().any(|f| f.len() != dim) {
            return Err(Error::domain(format!("feature vectors must have length {dim}")));
        }
        let x = DMatrix::from_fn(features.len(), dim, |i, j| (features[i][j] - self.feature_mean[j]) / self.feature_scale[j]);
        let out = self.net.forward(&x)?;
        Ok((0..out.nrows())
            .map(|i| {
                (
                    out[(i, 0)] * self.target_scale + self.target_mean.0,
                    out[(i, 1)] * self.target_scale + self.target_mean.1,
                )
            })
            .collect())
    }
}

pub fn train_localizer(train: &[LocalizationSample], arch: &LocalizerArchitecture, config: &TrainConfig) -> Result<LocalizerModel> {
    let first = train.first().ok_or_else(|| Error::domain("empty training set"))?;
    let dim = first.features.len();
    if dim == 0 || train.iter().any(|s| s.features.len() != dim) {
        return Err(Error::domain("feature vectors must share a nonzero length"));
    }
    let raw = DMatrix::from_fn(train.len(), dim, |i, j| train[i].features[j]);
    let (fmean, fscale) = column_stats(&raw);
    let x = DMatrix::from_fn(train.len(), dim, |i, j| (raw[(i, j)] - fmean[j]) / fscale[j]);

    let n = train.len() as f64;
    let tmean = (
        train.iter().map(|s| s.target.0).sum::<f64>() / n,
        train.iter().map(|s| s.target.1).sum::<f64>() / n,
    );
    let spread = train
        .iter()
        .map(|s| (s.target.0 - tmean.0).powi(2) + (s.target.1 - tmean.1).powi(2))
        .sum::<f64>()
        / (2.0 * n);
    let tscale = if spread.sqrt() > 1e-12 { spread.sqrt() } else { 1.0 };
    let y = DMatrix::from_fn(train.len(), 2, |i, j| {
        let t = train[i].target;
        if j == 0 {
            (t.0 - tmean.0) / tscale
        } else {
            (t.1 - tmean.1) / tscale
        }
    });

    let mut sizes = vec![dim];
    sizes.extend_from_slice(&arch.hidden);
    sizes.push(2);
    let mut acts = vec![arch.hidden_activation; arch.hidden.len()];
    acts.push(Activation::Identity);
    let mut net = DenseNetwork::new(&sizes, &acts, seed::derive_seed(config.seed, "localizer-init"))?;
    fit(&mut net, &x, &y, Loss::SquaredError, config)?;
    Ok(LocalizerModel {
        net,
        feature_mean: fmean.iter().copied().collect(),
        feature_scale: fscale.iter().copied().collect(),
        target_mean: tmean,
        target_scale: tscale,
    })
}

/// Mean over samples of `((x_hat - x)^2 + (y_hat - y)^2) / 2`, in m^2.
pub fn evaluate_mse(model: &LocalizerModel, test: &[LocalizationSample]) -> Result<f64> {
    if test.is_empty() {
        return Err(Error::domain("empty test set"));
    }
    let features: Vec<Vec<f64>> = test.iter().map(|s| s.features.clone()).collect();
    let pred = model.predict(&features)?;
    Ok(mse_of(&pred, test))
}

pub fn mse_of(pred: &[(f64, f64)], test: &[LocalizationSample]) -> f64 {
    pred.iter()
        .zip(test)
        .map(|(p, s)| ((p.0 - s.target.0).powi(2) + (p.1 - s.target.1).powi(2)) / 2.0)
        .sum::<f64>()
        / test.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neuralnet::{DenseLayer, OptimizerKind};
    use nalgebra::DVector;
    use rand::Rng;

    fn sample(f: &[f64], t: (f64, f64)) -> LocalizationSample {
        LocalizationSample { features: f.to_vec(), target: t }
    }

    #[test]
    fn split_counts_and_partition() {
        let items: Vec<usize> = (0..300).collect();
        let (train, test) = split_dataset(&items, 0.9, 5).unwrap();
        assert_eq!((train.len(), test.len()), (270, 30));
        let mut all: Vec<usize> = train.iter().chain(&test).copied().collect();
        all.sort();
        assert_eq!(all, items);
        assert_eq!(split_dataset(&items, 0.9, 5).unwrap(), (train, test));
        let (_, last) = split_dataset(&items, 299.5 / 300.0, 1).unwrap();
        assert_eq!(last.len(), 1);
        assert!(split_dataset(&items, 1.0, 0).is_err());
        assert!(split_dataset(&items[..1], 0.5, 0).is_err());
    }

    #[test]
    fn memorizes_a_repeated_sample() {
        let train = vec![sample(&[-50.0, -60.0, -70.0], (3.0, 7.5)); 20];
        let config = TrainConfig { epochs: 300, batch_size: 8, seed: 1, ..Default::default() };
        let model = train_localizer(&train, &LocalizerArchitecture::default(), &config).unwrap();
        let p = model.predict(&[vec![-50.0, -60.0, -70.0]]).unwrap()[0];
        assert!((p.0 - 3.0).abs() < 1e-2 && (p.1 - 7.5).abs() < 1e-2, "{p:?}");
    }

    #[test]
    fn linear_targets_recovered_by_linear_net() {
        let mut rng = crate::seed::rng(3);
        let mk = |rng: &mut crate::seed::Rng| {
            let f: Vec<f64> = (0..3).map(|_| rng.random_range(-80.0..-40.0)).collect();
            let t = (0.1 * f[0] - 0.05 * f[1] + 12.0, 0.02 * f[2] + 0.03 * f[0] + 9.0);
            sample(&f, t)
        };
        let train: Vec<_> = (0..200).map(|_| mk(&mut rng)).collect();
        let test: Vec<_> = (0..50).map(|_| mk(&mut rng)).collect();
        let arch = LocalizerArchitecture { hidden: vec![], hidden_activation: Activation::Identity };
        let config = TrainConfig { epochs: 400, batch_size: 16, learning_rate: 1e-2, seed: 2, ..Default::default() };
        let model = train_localizer(&train, &arch, &config).unwrap();
        let mse = evaluate_mse(&model, &test).unwrap();
        assert!(mse < 1e-4, "{mse}");
    }

    #[test]
    fn monotone_single_ap_beats_constant_predictor() {
        // RSS falls with x; y is constant.
        let samples: Vec<_> = (0..60).map(|i| {
            let x = i as f64 * 0.15;
            sample(&[-30.0 - 25.0 * (x + 0.5).log10()], (x, 4.0))
        }).collect();
        let (train, test) = split_dataset(&samples, 0.8, 3).unwrap();
        let config = TrainConfig { epochs: 500, batch_size: 16, seed: 4, ..Default::default() };
        let model = train_localizer(&train, &LocalizerArchitecture::default(), &config).unwrap();
        let mse = evaluate_mse(&model, &test).unwrap();
        let mean_x = train.iter().map(|s| s.target.0).sum::<f64>() / train.len() as f64;
        let baseline = mse_of(&vec![(mean_x, 4.0); test.len()], &test);
        assert!(mse < baseline, "{mse} vs {baseline}");
    }

    fn fixed_model(offset: (f64, f64)) -> LocalizerModel {
        // Features are (x, y) themselves; the identity net reproduces them.
        let layer = DenseLayer { weights: DMatrix::identity(2, 2), bias: DVector::zeros(2), activation: Activation::Identity };
        LocalizerModel {
            net: DenseNetwork::from_layers(vec![layer]).unwrap(),
            feature_mean: vec![0.0, 0.0],
            feature_scale: vec![1.0, 1.0],
            target_mean: offset,
            target_scale: 1.0,
        }
    }

    #[test]
    fn mse_arithmetic() {
        let test = vec![sample(&[1.0, 2.0], (1.0, 2.0)), sample(&[4.0, 0.5], (4.0, 0.5))];
        assert_eq!(evaluate_mse(&fixed_model((0.0, 0.0)), &test).unwrap(), 0.0);
        assert!((evaluate_mse(&fixed_model((1.0, 0.0)), &test).unwrap() - 0.5).abs() < 1e-15);
        assert!(evaluate_mse(&fixed_model((0.0, 0.0)), &[]).is_err());
    }

    #[test]
    fn constant_mean_predictor_mse_is_mean_variance() {
        let test: Vec<_> = (0..10).map(|i| sample(&[0.0], (i as f64, (i * i) as f64 * 0.1))).collect();
        let mx = test.iter().map(|s| s.target.0).sum::<f64>() / 10.0;
        let my = test.iter().map(|s| s.target.1).sum::<f64>() / 10.0;
        let var = |f: &dyn Fn(&LocalizationSample) -> f64, m: f64| test.iter().map(|s| (f(s) - m).powi(2)).sum::<f64>() / 10.0;
        let expect = (var(&|s| s.target.0, mx) + var(&|s| s.target.1, my)) / 2.0;
        assert!((mse_of(&[(mx, my); 10], &test) - expect).abs() < 1e-12);
    }

    #[test]
    fn training_deterministic() {
        let samples: Vec<_> = (0..30).map(|i| sample(&[i as f64, (i % 7) as f64], (i as f64 * 0.3, 1.0))).collect();
        let config = TrainConfig { epochs: 20, batch_size: 8, seed: 8, optimizer: OptimizerKind::default(), ..Default::default() };
        let a = train_localizer(&samples, &LocalizerArchitecture::default(), &config).unwrap();
        let b = train_localizer(&samples, &LocalizerArchitecture::default(), &config).unwrap();
        assert_eq!(a, b);
        assert!(train_localizer(&[], &LocalizerArchitecture::default(), &config).is_err());
    }
}
