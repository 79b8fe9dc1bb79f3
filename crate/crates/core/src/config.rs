//! Scenario configuration: the environment plus every pipeline stage.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::env_sim::{AccessPoint, PropagationParams, RoomGeometry};
use crate::error::{Error, Result};
use crate::neuralnet::{Activation, OptimizerKind, TrainConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplingConfig {
    pub n_points: usize,
    pub readings_per_point: usize,
    pub reading_noise_sigma_db: f64,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        SamplingConfig { n_points: 50, readings_per_point: 150, reading_noise_sigma_db: 2.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InterpolationConfig {
    pub knn_k: usize,
    pub idw_p: f64,
    pub idw_epsilon_m: f64,
    pub dct_num_coeffs: usize,
    pub mice_max_iter: usize,
    pub mice_tol: f64,
}

impl Default for InterpolationConfig {
    fn default() -> Self {
        InterpolationConfig { knn_k: 3, idw_p: 2.0, idw_epsilon_m: 1e-6, dct_num_coeffs: 12, mice_max_iter: 50, mice_tol: 1e-6 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GanConfig {
    pub latent_dim: usize,
    pub hidden: Vec<usize>,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub beta1: f64,
    pub augment_n: usize,
}

impl Default for GanConfig {
    fn default() -> Self {
        GanConfig { latent_dim: 8, hidden: vec![32, 32], epochs: 1000, batch_size: 32, lr: 1e-3, beta1: 0.5, augment_n: 300 }
    }
}

impl GanConfig {
    pub fn train_config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            learning_rate: self.lr,
            batch_size: self.batch_size,
            epochs: self.epochs,
            optimizer: OptimizerKind::Adam { beta1: self.beta1, beta2: 0.999, eps: 1e-8 },
            seed,
        }
    }

    pub fn architecture(&self) -> crate::gan::GanArchitecture {
        crate::gan::GanArchitecture {
            latent_dim: self.latent_dim,
            generator_hidden: self.hidden.clone(),
            discriminator_hidden: self.hidden.clone(),
            hidden_activation: Activation::LeakyRelu(0.2),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LocalizerConfig {
    pub hidden: Vec<usize>,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub train_fraction: f64,
}

impl Default for LocalizerConfig {
    fn default() -> Self {
        LocalizerConfig { hidden: vec![64, 64], epochs: 2000, batch_size: 32, lr: 1e-3, train_fraction: 0.9 }
    }
}

impl LocalizerConfig {
    pub fn train_config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            learning_rate: self.lr,
            batch_size: self.batch_size,
            epochs: self.epochs,
            optimizer: OptimizerKind::default(),
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchConfig {
    pub runs: usize,
    pub base_seed: u64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig { runs: 10, base_seed: 1 }
    }
}

/// Whole-pipeline configuration as read from JSON. Only `room` and `aps`
/// are required; every other section falls back to its defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub room: RoomGeometry,
    pub aps: Vec<AccessPoint>,
    #[serde(default)]
    pub propagation: PropagationParams,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub sampling: SamplingConfig,
    #[serde(default)]
    pub interpolation: InterpolationConfig,
    #[serde(default)]
    pub gan: GanConfig,
    #[serde(default)]
    pub localizer: LocalizerConfig,
    #[serde(default)]
    pub bench: BenchConfig,
}

impl ScenarioConfig {
    /// Lecture hall with three 21 dBm, 2.4 GHz access points.
    pub fn lecture_hall() -> Self {
        let ap = |id: &str, x_m, y_m| AccessPoint { id: id.into(), x_m, y_m, tx_power_dbm: 21.0, frequency_hz: 2.4e9 };
        ScenarioConfig {
            room: RoomGeometry::lecture_hall(),
            aps: vec![ap("ap1", 2.0, 3.0), ap("ap2", 8.5, 9.0), ap("ap3", 3.0, 15.0)],
            propagation: PropagationParams::default(),
            seed: 0,
            sampling: SamplingConfig::default(),
            interpolation: InterpolationConfig::default(),
            gan: GanConfig::default(),
            localizer: LocalizerConfig::default(),
            bench: BenchConfig::default(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ScenarioConfig = serde_json::from_str(text).map_err(|e| Error::Config(format!("invalid config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn ap_ids(&self) -> Vec<String> {
        self.aps.iter().map(|a| a.id.clone()).collect()
    }

    /// Checks every field up front. All failures are [`Error::Config`].
    pub fn validate(&self) -> Result<()> {
        self.check().map_err(|e| match e {
            Error::Config(m) => Error::Config(m),
            other => Error::Config(other.to_string()),
        })
    }

    fn check(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        self.room.validate()?;
        self.propagation.validate()?;
        if self.aps.is_empty() {
            return bad("at least one access point is required".into());
        }
        for (i, ap) in self.aps.iter().enumerate() {
            ap.validate(&self.room)?;
            if self.aps[..i].iter().any(|o| o.id == ap.id) {
                return bad(format!("duplicate access point id {:?}", ap.id));
            }
        }
        let cells = self.room.cell_count();
        let s = &self.sampling;
        if s.n_points == 0 || s.n_points > cells {
            return bad(format!("sampling.n_points must be in [1, {cells}], got {}", s.n_points));
        }
        if s.readings_per_point == 0 {
            return bad("sampling.readings_per_point must be at least 1".into());
        }
        if !(s.reading_noise_sigma_db.is_finite() && s.reading_noise_sigma_db >= 0.0) {
            return bad("sampling.reading_noise_sigma_db must be finite and nonnegative".into());
        }
        let it = &self.interpolation;
        if it.knn_k == 0 || it.knn_k > s.n_points {
            return bad(format!("interpolation.knn_k must be in [1, n_points], got {}", it.knn_k));
        }
        if !(it.idw_p.is_finite() && it.idw_p > 0.0) || !(it.idw_epsilon_m.is_finite() && it.idw_epsilon_m > 0.0) {
            return bad("interpolation.idw_p and idw_epsilon_m must be positive".into());
        }
        if it.dct_num_coeffs == 0 || it.dct_num_coeffs > s.n_points {
            return bad("interpolation.dct_num_coeffs must be in [1, n_points]".into());
        }
        if it.mice_max_iter == 0 || !(it.mice_tol.is_finite() && it.mice_tol > 0.0) {
            return bad("interpolation.mice_max_iter and mice_tol must be positive".into());
        }
        let g = &self.gan;
        if g.latent_dim == 0 || g.hidden.contains(&0) || !(g.beta1 >= 0.0 && g.beta1 < 1.0) {
            return bad("gan.latent_dim and hidden widths must be positive and beta1 in [0, 1)".into());
        }
        g.train_config(0).validate()?;
        let l = &self.localizer;
        if l.hidden.contains(&0) {
            return bad("localizer.hidden widths must be positive".into());
        }
        if !(l.train_fraction > 0.0 && l.train_fraction < 1.0) {
            return bad(format!("localizer.train_fraction must lie in (0, 1), got {}", l.train_fraction));
        }
        let n_train = (cells as f64 * l.train_fraction).floor() as usize;
        if n_train == 0 || n_train == cells {
            return bad("localizer.train_fraction leaves an empty train or test set".into());
        }
        if n_train < 2 * g.batch_size {
            return bad(format!("gan.batch_size {} too large for {n_train} training cells", g.batch_size));
        }
        l.train_config(0).validate()?;
        if self.bench.runs == 0 {
            return bad("bench.runs must be at least 1".into());
        }
        Ok(())
    }
}
