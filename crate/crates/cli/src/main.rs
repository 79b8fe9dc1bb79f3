use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use rfmap::env_sim::{generate_ground_truth, RfMap};
use rfmap::gan::{train_gan, GanModel, GanTrainOptions, NormStats};
use rfmap::interpolation::{
    dct_interpolate, grid_to_csv, idw_interpolate, knn_impute, mice_impute_grids, parse_grid_csv, sparse_grid_to_table,
    ImputationResult, Method, MiceOptions, SparseGrid, GRID_CSV_HEADER,
};
use rfmap::localizer::{build_variants, run_benchmark, score_variant, BenchmarkReport, Variant};
use rfmap::sampling::{self, collect_measurements, sample_locations_fixed, sample_locations_ppp, to_sparse_grid, MeasurementSet};
use rfmap::seed::derive_seed;
use rfmap::{Error, ScenarioConfig};

#[derive(Parser)]
#[command(name = "rfmap", version, about = "RF map reconstruction and localization benchmark")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Scenario configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Overrides the configuration seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Sampler {
    Fixed,
    Ppp,
}

#[derive(Subcommand)]
enum Command {
    /// Write the default lecture-hall configuration.
    DefaultConfig {
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate the ground-truth map as CSV.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: PathBuf,
    },
    /// Simulate a measurement campaign over a ground-truth map.
    Sample {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        truth: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "fixed")]
        sampler: Sampler,
    },
    /// Complete a sparse grid dump, or every AP layer of a measurement CSV.
    Impute {
        #[arg(long)]
        method: String,
        #[arg(long = "in")]
        input: PathBuf,
        /// Output file for a grid dump, output directory for measurements.
        #[arg(long)]
        out: PathBuf,
        /// Required for measurement input; supplies the room for grid dumps.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Train the augmentation GAN on MICE-completed measurements.
    TrainGan {
        #[command(flatten)]
        common: Common,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// Train and score one localizer variant on a measurement campaign.
    Localize {
        #[command(flatten)]
        common: Common,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        truth: PathBuf,
        #[arg(long, default_value = "mice")]
        method: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the four-variant benchmark and write report.json, report.csv and fig4.svg.
    Bench {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        runs: Option<usize>,
    },
    /// Render the chart of an existing report.json.
    Chart {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug)]
enum Failure {
    Config(String),
    Data(String),
    Numeric(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => 1,
            Failure::Data(_) => 2,
            Failure::Numeric(_) => 3,
        }
    }

    fn line(&self) -> String {
        let (kind, msg) = match self {
            Failure::Config(m) => ("config", m),
            Failure::Data(m) => ("data", m),
            Failure::Numeric(m) => ("numeric", m),
        };
        format!("error kind={kind} code={} msg={:?}", self.code(), msg.replace('\n', " "))
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let msg = e.to_string();
        match e.root() {
            Error::Config(_) => Failure::Config(msg),
            Error::Numeric(_) => Failure::Numeric(msg),
            _ => Failure::Data(msg),
        }
    }
}

type CmdResult = std::result::Result<(), Failure>;

fn load_config(common: &Common) -> std::result::Result<ScenarioConfig, Failure> {
    let mut cfg = load_config_path(&common.config)?;
    if let Some(s) = common.seed {
        cfg.seed = s;
        cfg.bench.base_seed = s;
    }
    Ok(cfg)
}

fn load_config_path(path: &Path) -> std::result::Result<ScenarioConfig, Failure> {
    ScenarioConfig::load(path).map_err(|e| Failure::Config(e.to_string()))
}

fn write(path: &Path, body: &str) -> CmdResult {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Failure::Data(format!("cannot create {}: {e}", dir.display())))?;
    }
    std::fs::write(path, body).map_err(|e| Failure::Data(format!("cannot write {}: {e}", path.display())))
}

fn read(path: &Path) -> std::result::Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure::Data(format!("cannot read {}: {e}", path.display())))
}

fn cmd_simulate(common: &Common, out: &Path) -> CmdResult {
    let cfg = load_config(common)?;
    let truth = generate_ground_truth(&cfg.room, &cfg.aps, &cfg.propagation, derive_seed(cfg.seed, "truth"))?;
    write(out, &truth.to_csv_string())
}

fn cmd_sample(common: &Common, truth: &Path, out: &Path, sampler: Sampler) -> CmdResult {
    let cfg = load_config(common)?;
    let truth = RfMap::parse_csv(&read(truth)?, &cfg.room, &cfg.ap_ids())?;
    let s = &cfg.sampling;
    let loc_seed = derive_seed(cfg.seed, "locations");
    let locations = match sampler {
        Sampler::Fixed => sample_locations_fixed(&cfg.room, s.n_points, loc_seed)?,
        Sampler::Ppp => sample_locations_ppp(&cfg.room, s.n_points as f64 / cfg.room.area(), loc_seed)?,
    };
    let ms = collect_measurements(&truth, &locations, s.readings_per_point, s.reading_noise_sigma_db, derive_seed(cfg.seed, "readings"))?;
    write(out, &sampling::to_csv_string(&ms))
}

fn impute_one(method: Method, g: &SparseGrid, cfg: &ScenarioConfig, seed: u64) -> rfmap::Result<ImputationResult> {
    let it = &cfg.interpolation;
    match method {
        Method::Knn => knn_impute(g, it.knn_k),
        Method::Idw => idw_interpolate(g, it.idw_p, it.idw_epsilon_m),
        Method::Dct => dct_interpolate(g, it.dct_num_coeffs),
        Method::Mice => Ok(mice_impute_grids(std::slice::from_ref(g), &mice_options(cfg), seed)?.remove(0)),
    }
}

fn mice_options(cfg: &ScenarioConfig) -> MiceOptions {
    MiceOptions { max_iter: cfg.interpolation.mice_max_iter, tol: cfg.interpolation.mice_tol, ..Default::default() }
}

fn load_measurements(path: &Path, cfg: &ScenarioConfig) -> std::result::Result<MeasurementSet, Failure> {
    Ok(sampling::parse_csv(&read(path)?, &cfg.room, &cfg.ap_ids(), cfg.seed)?)
}

fn cmd_impute(method: &str, input: &Path, out: &Path, config: Option<&Path>, seed: Option<u64>) -> CmdResult {
    let method: Method = method.parse().map_err(|e: Error| Failure::Config(e.to_string()))?;
    let mut cfg = match config {
        Some(p) => Some(load_config_path(p)?),
        None => None,
    };
    if let (Some(c), Some(s)) = (cfg.as_mut(), seed) {
        c.seed = s;
    }
    let text = read(input)?;
    let header = text.lines().next().unwrap_or("").trim_end_matches('\r');
    if header == GRID_CSV_HEADER {
        let (cell, shape) = match &cfg {
            Some(c) => (c.room.cell_size(), Some((c.room.grid_rows, c.room.grid_cols))),
            None => ((1.0, 1.0), None),
        };
        let g = parse_grid_csv(&text, shape, cell)?;
        let defaults = cfg.unwrap_or_else(ScenarioConfig::lecture_hall);
        let result = impute_one(method, &g, &defaults, derive_seed(defaults.seed, "impute"))?;
        return write(out, &result.to_csv_string());
    }
    let cfg = cfg.ok_or_else(|| Failure::Config("--config is required to impute a measurement CSV".into()))?;
    let ms = load_measurements(input, &cfg)?;
    let layers: Vec<SparseGrid> = (0..ms.ap_ids.len()).map(|a| to_sparse_grid(&ms, a)).collect::<rfmap::Result<_>>()?;
    let seed = derive_seed(cfg.seed, "impute");
    let results: Vec<ImputationResult> = if method == Method::Mice {
        mice_impute_grids(&layers, &mice_options(&cfg), seed)?
    } else {
        layers.iter().map(|g| impute_one(method, g, &cfg, seed)).collect::<rfmap::Result<_>>()?
    };
    for (id, r) in ms.ap_ids.iter().zip(&results) {
        write(&out.join(format!("{id}.csv")), &grid_to_csv(&r.completed, &r.observed))?;
    }
    Ok(())
}

fn cmd_train_gan(common: &Common, input: &Path, out: &Path, log: Option<&Path>) -> CmdResult {
    let cfg = load_config(common)?;
    let ms = load_measurements(input, &cfg)?;
    let layers: Vec<SparseGrid> = (0..ms.ap_ids.len()).map(|a| to_sparse_grid(&ms, a)).collect::<rfmap::Result<_>>()?;
    let completed = mice_impute_grids(&layers, &mice_options(&cfg), derive_seed(cfg.seed, "mice"))?;
    let grids: Vec<SparseGrid> = completed
        .into_iter()
        .map(|r| SparseGrid::fully_observed(r.completed, cfg.room.cell_size()))
        .collect::<rfmap::Result<_>>()?;
    let rows = sparse_grid_to_table(&grids)?.values;
    let norm = NormStats::from_data(&rows);
    let mut bounds = vec![Some((0.0, cfg.room.width_m)), Some((0.0, cfg.room.length_m))];
    bounds.resize(rows.ncols(), None);
    let model = GanModel::new(&cfg.gan.architecture(), norm.clone(), bounds, derive_seed(cfg.seed, "gan-init"))?;
    let (model, train_log) =
        train_gan(&norm.normalize(&rows), &cfg.gan.train_config(derive_seed(cfg.seed, "gan")), model, &GanTrainOptions::default())?;
    write(out, &model.to_json()?)?;
    if let Some(log) = log {
        write(log, &train_log.to_csv_string())?;
    }
    Ok(())
}

fn cmd_localize(common: &Common, input: &Path, truth: &Path, method: &str, out: &Path) -> CmdResult {
    let cfg = load_config(common)?;
    let variant: Variant = method.parse().map_err(|e: Error| Failure::Config(e.to_string()))?;
    let truth = RfMap::parse_csv(&read(truth)?, &cfg.room, &cfg.ap_ids())?;
    let ms = load_measurements(input, &cfg)?;
    let data = build_variants(&cfg, &truth, &ms, cfg.seed)?;
    let mse = score_variant(&cfg, &data, variant, cfg.seed)?;
    let v = Variant::ALL.iter().position(|&x| x == variant).unwrap_or(0);
    let doc = serde_json::json!({
        "variant": variant,
        "mse": mse,
        "train_rows": data.train[v].len(),
        "test_rows": data.test.len(),
    });
    write(out, &format!("{}\n", serde_json::to_string_pretty(&doc).map_err(Error::from)?))
}

fn cmd_bench(common: &Common, out: &Path, runs: Option<usize>) -> CmdResult {
    let mut cfg = load_config(common)?;
    if let Some(r) = runs {
        cfg.bench.runs = r;
    }
    cfg.validate()?;
    let report = run_benchmark(&cfg, cfg.bench.runs)?;
    report.save(out)?;
    for s in &report.variants {
        println!("{:<8} mean={:.4} std={:.4}", s.variant, s.mean, s.std);
    }
    Ok(())
}

fn cmd_chart(input: &Path, out: &Path) -> CmdResult {
    let report: BenchmarkReport = serde_json::from_str(&read(input)?).map_err(|e| Failure::Data(format!("invalid report: {e}")))?;
    write(out, &report.to_svg())
}

fn dispatch(cli: Cli) -> CmdResult {
    match cli.command {
        Command::DefaultConfig { out } => write(&out, &format!("{}\n", ScenarioConfig::lecture_hall().to_json()?)),
        Command::Simulate { common, out } => cmd_simulate(&common, &out),
        Command::Sample { common, truth, out, sampler } => cmd_sample(&common, &truth, &out, sampler),
        Command::Impute { method, input, out, config, seed } => cmd_impute(&method, &input, &out, config.as_deref(), seed),
        Command::TrainGan { common, input, out, log } => cmd_train_gan(&common, &input, &out, log.as_deref()),
        Command::Localize { common, input, truth, method, out } => cmd_localize(&common, &input, &truth, &method, &out),
        Command::Bench { common, out, runs } => cmd_bench(&common, &out, runs),
        Command::Chart { input, out } => cmd_chart(&input, &out),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            let f = Failure::Config(e.kind().to_string());
            eprintln!("{}", f.line());
            return ExitCode::from(f.code());
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("{}", f.line());
            ExitCode::from(f.code())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn failure_classification() {
        assert_eq!(Failure::from(Error::Config("x".into())).code(), 1);
        assert_eq!(Failure::from(Error::Numeric("x".into())).code(), 3);
        assert_eq!(Failure::from(Error::Parse { line: 3, msg: "bad".into() }).code(), 2);
        let nested = Error::Run { run: 1, variant: "gan".into(), source: Box::new(Error::Numeric("nan".into())) };
        assert_eq!(Failure::from(nested).code(), 3);
    }

    #[test]
    fn diagnostic_is_one_line() {
        let line = Failure::Data("a \"b\"\nc".into()).line();
        assert!(!line.contains('\n'));
        assert!(line.starts_with("error kind=data code=2 msg="));
    }
}
