//! Adversarial training over fixed-width sample tuples.
//!
//! The generator maps standard-normal latent vectors to z-scored samples;
//! the discriminator maps samples to a probability of being real. Each
//! mini-batch takes one discriminator ascent step on
//! `ln D(x) + ln(1 - D(G(z)))` followed by one generator step.

mod divergence;

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand_distr::{Distribution as _, StandardNormal};
use serde::{Deserialize, Serialize};

pub use divergence::{js_divergence, kl_divergence, marginal_js, sample_js, value_function, Distribution};

use crate::error::{Error, Result};
use crate::neuralnet::{column_stats, Activation, DenseNetwork, Loss, NetworkDocument, Optimizer, TrainConfig};
use crate::seed;

pub const LOG_CSV_HEADER: &str = "epoch,d_loss,g_loss,d_real_mean,d_fake_mean,js_estimate";

/// Per-dimension z-score statistics of the real data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl NormStats {
    pub fn from_data(raw: &DMatrix<f64>) -> Self {
        let (mean, scale) = column_stats(raw);
        NormStats { mean: mean.iter().copied().collect(), scale: scale.iter().copied().collect() }
    }

    pub fn identity(dim: usize) -> Self {
        NormStats { mean: vec![0.0; dim], scale: vec![1.0; dim] }
    }

    pub fn normalize(&self, raw: &DMatrix<f64>) -> DMatrix<f64> {
        DMatrix::from_fn(raw.nrows(), raw.ncols(), |i, j| (raw[(i, j)] - self.mean[j]) / self.scale[j])
    }

    pub fn denormalize(&self, z: &DMatrix<f64>) -> DMatrix<f64> {
        DMatrix::from_fn(z.nrows(), z.ncols(), |i, j| z[(i, j)] * self.scale[j] + self.mean[j])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GanArchitecture {
    pub latent_dim: usize,
    pub generator_hidden: Vec<usize>,
    pub discriminator_hidden: Vec<usize>,
    pub hidden_activation: Activation,
}

impl Default for GanArchitecture {
    fn default() -> Self {
        GanArchitecture {
            latent_dim: 8,
            generator_hidden: vec![32, 32],
            discriminator_hidden: vec![32, 32],
            hidden_activation: Activation::LeakyRelu(0.2),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GanModel {
    pub generator: DenseNetwork,
    pub discriminator: DenseNetwork,
    pub latent_dim: usize,
    pub norm: NormStats,
    /// Optional `[lo, hi]` clamp per sample dimension, applied after denormalizing.
    pub bounds: Vec<Option<(f64, f64)>>,
}

impl GanModel {
    pub fn new(arch: &GanArchitecture, norm: NormStats, bounds: Vec<Option<(f64, f64)>>, seed: u64) -> Result<Self> {
        let dim = norm.mean.len();
        if arch.latent_dim == 0 || dim == 0 || norm.scale.len() != dim || bounds.len() != dim {
            return Err(Error::domain("GAN needs latent_dim >= 1 and consistent sample dimensions"));
        }
        let build = |input: usize, hidden: &[usize], output: usize, out_act: Activation, stage: &str| {
            let mut sizes = vec![input];
            sizes.extend_from_slice(hidden);
            sizes.push(output);
            let mut acts = vec![arch.hidden_activation; hidden.len()];
            acts.push(out_act);
            DenseNetwork::new(&sizes, &acts, seed::derive_seed(seed, stage))
        };
        Ok(GanModel {
            generator: build(arch.latent_dim, &arch.generator_hidden, dim, Activation::Identity, "generator-init")?,
            discriminator: build(dim, &arch.discriminator_hidden, 1, Activation::Sigmoid, "discriminator-init")?,
            latent_dim: arch.latent_dim,
            norm,
            bounds,
        })
    }

    pub fn sample_dim(&self) -> usize {
        self.norm.mean.len()
    }

    fn latent_batch(&self, n: usize, rng: &mut seed::Rng) -> DMatrix<f64> {
        DMatrix::from_fn(n, self.latent_dim, |_, _| StandardNormal.sample(rng))
    }

    /// Discriminator probabilities for normalized samples.
    pub fn discriminate(&self, normalized: &DMatrix<f64>) -> Result<Vec<f64>> {
        Ok(self.discriminator.forward(normalized)?.iter().copied().collect())
    }

    /// Normalized generator output for `n` fresh latent draws.
    pub fn generate_normalized(&self, n: usize, seed: u64) -> Result<DMatrix<f64>> {
        let mut rng = seed::rng(seed);
        let z = self.latent_batch(n, &mut rng);
        self.generator.forward(&z)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&GanDocument::from(self))?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: GanDocument = serde_json::from_str(text)?;
        let model = GanModel {
            generator: doc.generator.try_into()?,
            discriminator: doc.discriminator.try_into()?,
            latent_dim: doc.latent_dim,
            norm: doc.norm,
            bounds: doc.bounds,
        };
        if model.generator.input_dim() != model.latent_dim
            || model.generator.output_dim() != model.sample_dim()
            || model.discriminator.input_dim() != model.sample_dim()
            || model.discriminator.output_dim() != 1
            || model.bounds.len() != model.sample_dim()
        {
            return Err(Error::Config("GAN document has inconsistent dimensions".into()));
        }
        Ok(model)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GanDocument {
    latent_dim: usize,
    norm: NormStats,
    bounds: Vec<Option<(f64, f64)>>,
    generator: NetworkDocument,
    discriminator: NetworkDocument,
}

impl From<&GanModel> for GanDocument {
    fn from(m: &GanModel) -> Self {
        GanDocument {
            latent_dim: m.latent_dim,
            norm: m.norm.clone(),
            bounds: m.bounds.clone(),
            generator: NetworkDocument::from(&m.generator),
            discriminator: NetworkDocument::from(&m.discriminator),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeneratorObjective {
    /// Descend `-ln D(G(z))`.
    #[default]
    NonSaturating,
    /// Descend `ln(1 - D(G(z)))`, the literal minimax form.
    Minimax,
}

#[derive(Debug, Clone, Default)]
pub struct GanTrainOptions {
    pub objective: GeneratorObjective,
    /// Normalized held-out real samples; when set, the log carries a marginal JS estimate.
    pub monitor: Option<DMatrix<f64>>,
    /// Epoch stride of the JS estimate (0 means every epoch).
    pub monitor_every: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub d_loss: f64,
    pub g_loss: f64,
    pub d_real_mean: f64,
    pub d_fake_mean: f64,
    pub js_estimate: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GanTrainLog {
    pub epochs: Vec<EpochStats>,
}

impl GanTrainLog {
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from(LOG_CSV_HEADER);
        out.push('\n');
        for e in &self.epochs {
            let js = e.js_estimate.map(|v| v.to_string()).unwrap_or_default();
            let _ = writeln!(out, "{},{},{},{},{},{}", e.epoch, e.d_loss, e.g_loss, e.d_real_mean, e.d_fake_mean, js);
        }
        out
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_csv_string()).map_err(|e| Error::io(path, e))
    }
}

/// One discriminator ascent step on `mean ln D(real) + mean ln(1 - D(fake))`.
/// Returns the discriminator loss (the negated value) and mean outputs on
/// the real and fake batches, all measured before the update.
pub fn discriminator_step(
    model: &mut GanModel,
    opt: &mut Optimizer,
    real: &DMatrix<f64>,
    fake: &DMatrix<f64>,
) -> Result<(f64, f64, f64)> {
    let d = &model.discriminator;
    let real_trace = d.forward_trace(real)?;
    let fake_trace = d.forward_trace(fake)?;
    let ones = DMatrix::from_element(real.nrows(), 1, 1.0);
    let zeros = DMatrix::from_element(fake.nrows(), 1, 0.0);
    let (loss_real, grad_real) = Loss::BinaryLogLoss.evaluate(real_trace.output(), &ones)?;
    let (loss_fake, grad_fake) = Loss::BinaryLogLoss.evaluate(fake_trace.output(), &zeros)?;
    let (mut grads, _) = d.backward(&real_trace, &grad_real)?;
    let (fake_grads, _) = d.backward(&fake_trace, &grad_fake)?;
    grads.add_assign(&fake_grads);
    let real_mean = real_trace.output().mean();
    let fake_mean = fake_trace.output().mean();
    opt.step(&mut model.discriminator, &grads)?;
    Ok((loss_real + loss_fake, real_mean, fake_mean))
}

fn generator_step(model: &mut GanModel, opt: &mut Optimizer, z: &DMatrix<f64>, objective: GeneratorObjective) -> Result<f64> {
    let g_trace = model.generator.forward_trace(z)?;
    let d_trace = model.discriminator.forward_trace(g_trace.output())?;
    let n = z.nrows();
    let (loss, grad) = match objective {
        GeneratorObjective::NonSaturating => {
            Loss::BinaryLogLoss.evaluate(d_trace.output(), &DMatrix::from_element(n, 1, 1.0))?
        }
        GeneratorObjective::Minimax => {
            let (l, g) = Loss::BinaryLogLoss.evaluate(d_trace.output(), &DMatrix::from_element(n, 1, 0.0))?;
            (-l, -g)
        }
    };
    let (_, d_input) = model.discriminator.backward(&d_trace, &grad)?;
    let (g_grads, _) = model.generator.backward(&g_trace, &d_input)?;
    opt.step(&mut model.generator, &g_grads)?;
    Ok(loss)
}

/// Alternating adversarial training on normalized `real` samples.
pub fn train_gan(
    real: &DMatrix<f64>,
    config: &TrainConfig,
    mut model: GanModel,
    options: &GanTrainOptions,
) -> Result<(GanModel, GanTrainLog)> {
    config.validate()?;
    if real.ncols() != model.sample_dim() {
        return Err(Error::domain(format!(
            "real samples have {} columns, model expects {}",
            real.ncols(),
            model.sample_dim()
        )));
    }
    if real.nrows() < 2 * config.batch_size {
        return Err(Error::domain(format!(
            "GAN training needs at least {} samples (2 x batch size), got {}",
            2 * config.batch_size,
            real.nrows()
        )));
    }
    let mut rng = seed::rng(seed::derive_seed(config.seed, "gan-train"));
    let mut d_opt = Optimizer::from_config(config);
    let mut g_opt = Optimizer::from_config(config);
    let mut order: Vec<usize> = (0..real.nrows()).collect();
    let mut log = GanTrainLog::default();

    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let (mut d_sum, mut g_sum, mut real_sum, mut fake_sum, mut batches) = (0.0, 0.0, 0.0, 0.0, 0usize);
        for chunk in order.chunks(config.batch_size) {
            let x = DMatrix::from_fn(chunk.len(), real.ncols(), |r, c| real[(chunk[r], c)]);
            let z = model.latent_batch(chunk.len(), &mut rng);
            let fake = model.generator.forward(&z)?;
            let (d_loss, real_mean, fake_mean) = discriminator_step(&mut model, &mut d_opt, &x, &fake)?;
            let z = model.latent_batch(chunk.len(), &mut rng);
            let g_loss = generator_step(&mut model, &mut g_opt, &z, options.objective)?;
            if !(d_loss.is_finite() && g_loss.is_finite()) {
                return Err(Error::Numeric(format!("non-finite GAN loss at epoch {epoch}")));
            }
            d_sum += d_loss;
            g_sum += g_loss;
            real_sum += real_mean;
            fake_sum += fake_mean;
            batches += 1;
        }
        if !(model.generator.is_finite() && model.discriminator.is_finite()) {
            return Err(Error::Numeric(format!("GAN parameters diverged at epoch {epoch}")));
        }
        let js_estimate = match &options.monitor {
            Some(held_out) if options.monitor_every == 0 || epoch % options.monitor_every == 0 || epoch + 1 == config.epochs => {
                let generated = model.generate_normalized(held_out.nrows(), seed::derive_seed(config.seed, &format!("monitor-{epoch}")))?;
                Some(marginal_js(&generated, held_out, 30)?)
            }
            _ => None,
        };
        let b = batches as f64;
        log.epochs.push(EpochStats {
            epoch,
            d_loss: d_sum / b,
            g_loss: g_sum / b,
            d_real_mean: real_sum / b,
            d_fake_mean: fake_sum / b,
            js_estimate,
        });
    }
    Ok((model, log))
}

/// Draws `n` samples in data units, clamped to the model's bounds.
pub fn generate_samples(model: &GanModel, n: usize, seed: u64) -> Result<DMatrix<f64>> {
    if n == 0 {
        return Ok(DMatrix::zeros(0, model.sample_dim()));
    }
    let mut out = model.norm.denormalize(&model.generate_normalized(n, seed)?);
    for (j, b) in model.bounds.iter().enumerate() {
        if let Some((lo, hi)) = *b {
            for v in out.column_mut(j).iter_mut() {
                *v = v.clamp(lo, hi);
            }
        }
    }
    Ok(out)
}

/// Mean discriminator output on `n` fresh generated samples.
pub fn mean_fake_score(model: &GanModel, n: usize, seed: u64) -> Result<f64> {
    let fake = model.generate_normalized(n, seed)?;
    let scores = model.discriminator.forward(&fake)?;
    Ok(scores.mean())
}

/// Copies column `j` out of a sample matrix.
pub fn column(m: &DMatrix<f64>, j: usize) -> Vec<f64> {
    m.column(j).iter().copied().collect()
}
