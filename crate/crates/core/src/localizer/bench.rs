use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{evaluate_mse, split_dataset, train_localizer, LocalizationSample, LocalizerArchitecture};
use crate::config::ScenarioConfig;
use crate::env_sim::{generate_ground_truth, RfMap};
use crate::error::{Error, Result};
use crate::gan::{generate_samples, train_gan, GanModel, GanTrainOptions, NormStats};
use crate::interpolation::{knn_impute, mice_impute_grids, MiceOptions, SparseGrid};
use crate::neuralnet::Activation;
use crate::sampling::{collect_measurements, sample_locations_fixed, to_sparse_grid, MeasurementSet};
use crate::seed::derive_seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Original,
    Knn,
    Mice,
    Gan,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::Original, Variant::Knn, Variant::Mice, Variant::Gan];

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Original => "original",
            Variant::Knn => "knn",
            Variant::Mice => "mice",
            Variant::Gan => "gan",
        }
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.as_str() == s.to_ascii_lowercase())
            .ok_or_else(|| Error::domain(format!("unknown variant `{s}` (expected original, knn, mice or gan)")))
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Percentage error reduction `(1 - new/base) * 100`; negative when `new` is worse.
pub fn error_reduction(base_mse: f64, new_mse: f64) -> Result<f64> {
    if !(base_mse > 0.0 && base_mse.is_finite()) {
        return Err(Error::domain(format!("base MSE must be positive and finite, got {base_mse}")));
    }
    Ok((1.0 - new_mse / base_mse) * 100.0)
}

/// One benchmark run: test MSE and training-set size for each variant, in
/// [`Variant::ALL`] order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOutcome {
    pub run: usize,
    pub seed: u64,
    pub mse: Vec<f64>,
    pub train_rows: Vec<usize>,
    pub test_rows: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantStats {
    pub variant: Variant,
    pub mse: Vec<f64>,
    pub mean: f64,
    /// Sample standard deviation; 0 for a single run.
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reduction {
    pub base: Variant,
    pub new: Variant,
    pub percent: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub base_seed: u64,
    pub runs: Vec<RunOutcome>,
    pub variants: Vec<VariantStats>,
    /// Mean-MSE reductions for every ordered pair of distinct variants.
    pub reductions: Vec<Reduction>,
}

impl BenchmarkReport {
    pub fn from_runs(base_seed: u64, runs: Vec<RunOutcome>) -> Result<Self> {
        if runs.is_empty() {
            return Err(Error::domain("a report needs at least one run"));
        }
        let variants: Vec<VariantStats> = Variant::ALL
            .iter()
            .enumerate()
            .map(|(v, &variant)| {
                let mse: Vec<f64> = runs.iter().map(|r| r.mse[v]).collect();
                let n = mse.len() as f64;
                let mean = mse.iter().sum::<f64>() / n;
                let std = if mse.len() < 2 {
                    0.0
                } else {
                    (mse.iter().map(|m| (m - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
                };
                VariantStats { variant, mse, mean, std }
            })
            .collect();
        let mut reductions = Vec::new();
        for base in &variants {
            for new in &variants {
                if base.variant != new.variant {
                    reductions.push(Reduction {
                        base: base.variant,
                        new: new.variant,
                        percent: error_reduction(base.mean, new.mean)?,
                    });
                }
            }
        }
        Ok(BenchmarkReport { base_seed, runs, variants, reductions })
    }

    pub fn stats(&self, v: Variant) -> &VariantStats {
        &self.variants[Variant::ALL.iter().position(|&x| x == v).unwrap_or(0)]
    }

    pub fn reduction(&self, base: Variant, new: Variant) -> Option<f64> {
        self.reductions.iter().find(|r| r.base == base && r.new == new).map(|r| r.percent)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// `variant,run,mse` rows, variants outermost.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("variant,run,mse\n");
        for s in &self.variants {
            for (run, m) in self.runs.iter().zip(&s.mse) {
                let _ = writeln!(out, "{},{},{}", s.variant, run.run, m);
            }
        }
        out
    }

    /// Bar chart of mean MSE per variant with one-standard-deviation whiskers.
    pub fn to_svg(&self) -> String {
        let (w, h) = (640.0, 420.0);
        let (left, right, top, bottom) = (70.0, 20.0, 40.0, 50.0);
        let plot_h = h - top - bottom;
        let plot_w = w - left - right;
        let peak = self.variants.iter().map(|s| s.mean + s.std).fold(0.0f64, f64::max);
        let y_max = nice_ceiling(if peak > 0.0 { peak * 1.1 } else { 1.0 });
        let y_of = |v: f64| top + plot_h * (1.0 - v / y_max);
        let slot = plot_w / self.variants.len() as f64;

        let mut svg = String::new();
        let _ = writeln!(svg, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#);
        let _ = writeln!(svg, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="22" text-anchor="middle" font-size="14">Localization MSE over {} runs</text>"#,
            w / 2.0,
            self.runs.len()
        );
        for i in 0..=5 {
            let v = y_max * i as f64 / 5.0;
            let y = y_of(v);
            let _ = writeln!(svg, r##"<line x1="{left}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#dddddd"/>"##, w - right);
            let _ = writeln!(svg, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#, left - 6.0, y + 4.0, tick_label(v));
        }
        let _ = writeln!(svg, r#"<line x1="{left}" y1="{top}" x2="{left}" y2="{:.2}" stroke="black"/>"#, top + plot_h);
        let _ = writeln!(svg, r#"<line x1="{left}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="black"/>"#, top + plot_h, w - right, top + plot_h);
        let _ = writeln!(
            svg,
            r#"<text x="18" y="{:.2}" text-anchor="middle" transform="rotate(-90 18 {:.2})">MSE (m²)</text>"#,
            top + plot_h / 2.0,
            top + plot_h / 2.0
        );
        let colors = ["#7f7f7f", "#1f77b4", "#2ca02c", "#d62728"];
        for (i, s) in self.variants.iter().enumerate() {
            let cx = left + slot * (i as f64 + 0.5);
            let bw = slot * 0.5;
            let y = y_of(s.mean);
            let _ = writeln!(
                svg,
                r#"<rect class="bar" data-variant="{}" x="{:.2}" y="{y:.2}" width="{bw:.2}" height="{:.2}" fill="{}"/>"#,
                s.variant,
                cx - bw / 2.0,
                top + plot_h - y,
                colors[i % colors.len()]
            );
            let (lo, hi) = (y_of((s.mean - s.std).max(0.0)), y_of(s.mean + s.std));
            let _ = writeln!(svg, r#"<g class="errorbar" data-variant="{}" stroke="black">"#, s.variant);
            let _ = writeln!(svg, r#"<line x1="{cx:.2}" y1="{lo:.2}" x2="{cx:.2}" y2="{hi:.2}"/>"#);
            for yy in [lo, hi] {
                let _ = writeln!(svg, r#"<line x1="{:.2}" y1="{yy:.2}" x2="{:.2}" y2="{yy:.2}"/>"#, cx - 8.0, cx + 8.0);
            }
            let _ = writeln!(svg, "</g>");
            let _ = writeln!(svg, r#"<text x="{cx:.2}" y="{:.2}" text-anchor="middle">{}</text>"#, top + plot_h + 20.0, s.variant);
            let _ = writeln!(svg, r#"<text x="{cx:.2}" y="{:.2}" text-anchor="middle" font-size="10">{:.3}</text>"#, hi - 6.0, s.mean);
        }
        svg.push_str("</svg>\n");
        svg
    }

    /// Writes `report.json`, `report.csv` and `fig4.svg` into `dir`.
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for (name, body) in [("report.json", self.to_json()?), ("report.csv", self.to_csv_string()), ("fig4.svg", self.to_svg())] {
            let path = dir.join(name);
            std::fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
        }
        Ok(())
    }
}

fn nice_ceiling(v: f64) -> f64 {
    let mag = 10f64.powf(v.log10().floor());
    let m = v / mag;
    let step = [1.0, 2.0, 2.5, 5.0, 10.0].into_iter().find(|&s| s >= m - 1e-12).unwrap_or(10.0);
    step * mag
}

fn tick_label(v: f64) -> String {
    let s = format!("{v:.3}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s.is_empty() { "0".into() } else { s.to_string() }
}

fn fingerprint_samples(layers: &[DMatrix<f64>], truth: &RfMap, cells: &[(usize, usize)]) -> Vec<LocalizationSample> {
    cells
        .iter()
        .map(|&(r, c)| LocalizationSample {
            features: layers.iter().map(|l| l[(r, c)]).collect(),
            target: truth.geometry.cell_center(r, c),
        })
        .collect()
}

fn annotate(run: usize, variant: &str) -> impl Fn(Error) -> Error + '_ {
    move |e| Error::Run { run, variant: variant.to_string(), source: Box::new(e) }
}

/// Training sets for all four variants plus the shared test set of one run.
#[derive(Debug, Clone)]
pub struct RunData {
    pub train: Vec<Vec<LocalizationSample>>,
    pub test: Vec<LocalizationSample>,
}

/// Builds the four training variants of run `run`. Randomness comes from
/// `base_seed + run` split into per-stage streams.
pub fn prepare_run(cfg: &ScenarioConfig, run: usize) -> Result<RunData> {
    let seed = cfg.bench.base_seed.wrapping_add(run as u64);
    let stage = annotate(run, "shared");
    let truth = generate_ground_truth(&cfg.room, &cfg.aps, &cfg.propagation, derive_seed(seed, "truth")).map_err(&stage)?;
    let s = &cfg.sampling;
    let locations = sample_locations_fixed(&cfg.room, s.n_points, derive_seed(seed, "locations")).map_err(&stage)?;
    let ms = collect_measurements(&truth, &locations, s.readings_per_point, s.reading_noise_sigma_db, derive_seed(seed, "readings"))
        .map_err(&stage)?;
    build_variants(cfg, &truth, &ms, seed).map_err(|e| match e {
        Error::Run { variant, source, .. } => Error::Run { run, variant, source },
        other => stage(other),
    })
}

/// Splits the grid cells into train/test, takes the test fingerprints from
/// `truth`, and assembles each variant's training rows from `ms` restricted
/// to the training cells. Failures are annotated with run index 0.
pub fn build_variants(cfg: &ScenarioConfig, truth: &RfMap, ms: &MeasurementSet, seed: u64) -> Result<RunData> {
    let room = cfg.room;
    let stage = annotate(0, "shared");
    if truth.geometry != room || ms.room != room || truth.ap_ids != ms.ap_ids {
        return Err(stage(Error::domain("truth map and measurements disagree on room or access points")));
    }
    let layers: Vec<SparseGrid> = (0..ms.ap_ids.len()).map(|a| to_sparse_grid(ms, a)).collect::<Result<_>>().map_err(&stage)?;

    let cells: Vec<(usize, usize)> =
        (0..room.grid_rows).flat_map(|r| (0..room.grid_cols).map(move |c| (r, c))).collect();
    let (train_cells, test_cells) = split_dataset(&cells, cfg.localizer.train_fraction, derive_seed(seed, "split")).map_err(&stage)?;
    let test = fingerprint_samples(&truth.layers, truth, &test_cells);

    let observed_train: Vec<(usize, usize)> = train_cells.iter().copied().filter(|&rc| layers[0].mask[rc]).collect();
    if observed_train.is_empty() {
        return Err(annotate(0, "original")(Error::Infeasible("no measured cell fell in the training split".into())));
    }
    let measured: Vec<DMatrix<f64>> = layers.iter().map(|l| l.values.clone()).collect();
    let original = fingerprint_samples(&measured, truth, &observed_train);

    let knn: Vec<DMatrix<f64>> = layers
        .iter()
        .map(|l| knn_impute(l, cfg.interpolation.knn_k).map(|r| r.completed))
        .collect::<Result<_>>()
        .map_err(annotate(0, "knn"))?;
    let knn = fingerprint_samples(&knn, truth, &train_cells);

    let opts = MiceOptions { max_iter: cfg.interpolation.mice_max_iter, tol: cfg.interpolation.mice_tol, ..Default::default() };
    let mice: Vec<DMatrix<f64>> = mice_impute_grids(&layers, &opts, derive_seed(seed, "mice"))
        .map_err(annotate(0, "mice"))?
        .into_iter()
        .map(|r| r.completed)
        .collect();
    let mice = fingerprint_samples(&mice, truth, &train_cells);

    let gan = augment_with_gan(cfg, &mice, seed).map_err(annotate(0, "gan"))?;
    Ok(RunData { train: vec![original, knn, mice, gan], test })
}

/// Trains a GAN on the `(x, y, rss...)` rows of `base` and appends
/// `augment_n` generated rows, positions clamped to the room.
fn augment_with_gan(cfg: &ScenarioConfig, base: &[LocalizationSample], seed: u64) -> Result<Vec<LocalizationSample>> {
    let dim = 2 + cfg.aps.len();
    let rows = DMatrix::from_fn(base.len(), dim, |i, j| match j {
        0 => base[i].target.0,
        1 => base[i].target.1,
        _ => base[i].features[j - 2],
    });
    let norm = NormStats::from_data(&rows);
    let mut bounds = vec![Some((0.0, cfg.room.width_m)), Some((0.0, cfg.room.length_m))];
    bounds.resize(dim, None);
    let model = GanModel::new(&cfg.gan.architecture(), norm.clone(), bounds, derive_seed(seed, "gan-init"))?;
    let train_cfg = cfg.gan.train_config(derive_seed(seed, "gan"));
    let (model, _) = train_gan(&norm.normalize(&rows), &train_cfg, model, &GanTrainOptions::default())?;
    let generated = generate_samples(&model, cfg.gan.augment_n, derive_seed(seed, "gan-sample"))?;
    let mut out = base.to_vec();
    out.extend((0..generated.nrows()).map(|i| LocalizationSample {
        features: (2..dim).map(|j| generated[(i, j)]).collect(),
        target: (generated[(i, 0)], generated[(i, 1)]),
    }));
    Ok(out)
}

/// Runs one benchmark iteration end to end. Every variant's localizer
/// starts from the same initialization and minibatch order.
pub fn run_single(cfg: &ScenarioConfig, run: usize) -> Result<RunOutcome> {
    let data = prepare_run(cfg, run)?;
    let seed = cfg.bench.base_seed.wrapping_add(run as u64);
    let mse = Variant::ALL
        .iter()
        .map(|&v| score_variant(cfg, &data, v, seed).map_err(annotate(run, v.as_str())))
        .collect::<Result<Vec<_>>>()?;
    Ok(RunOutcome {
        run,
        seed,
        mse,
        train_rows: data.train.iter().map(Vec::len).collect(),
        test_rows: data.test.len(),
    })
}

/// Trains the localizer on one variant's rows and returns its test MSE.
pub fn score_variant(cfg: &ScenarioConfig, data: &RunData, variant: Variant, seed: u64) -> Result<f64> {
    let v = Variant::ALL.iter().position(|&x| x == variant).unwrap_or(0);
    let arch = LocalizerArchitecture { hidden: cfg.localizer.hidden.clone(), hidden_activation: Activation::Relu };
    let model = train_localizer(&data.train[v], &arch, &cfg.localizer.train_config(derive_seed(seed, "localizer")))?;
    let m = evaluate_mse(&model, &data.test)?;
    if !m.is_finite() {
        return Err(Error::Numeric("test MSE is not finite".into()));
    }
    Ok(m)
}

/// Runs `runs` independent iterations, in parallel, reported in run order.
pub fn run_benchmark(cfg: &ScenarioConfig, runs: usize) -> Result<BenchmarkReport> {
    if runs == 0 {
        return Err(Error::domain("runs must be at least 1"));
    }
    cfg.validate()?;
    let outcomes = (0..runs).into_par_iter().map(|r| run_single(cfg, r)).collect::<Result<Vec<_>>>()?;
    BenchmarkReport::from_runs(cfg.bench.base_seed, outcomes)
}
