use rfmap::env_sim::{generate_ground_truth, RfMap};
use rfmap::gan::GanModel;
use rfmap::localizer::{run_benchmark, BenchmarkReport, Variant};
use rfmap::sampling::{collect_measurements, load_csv, sample_locations_fixed, save_csv, to_sparse_grid};
use rfmap::seed::derive_seed;
use rfmap::{Error, ScenarioConfig};

fn small_config() -> ScenarioConfig {
    let mut cfg = ScenarioConfig::lecture_hall();
    cfg.sampling.readings_per_point = 20;
    cfg.gan.epochs = 20;
    cfg.gan.augment_n = 50;
    cfg.localizer.epochs = 30;
    cfg.localizer.hidden = vec![16, 16];
    cfg.bench.runs = 2;
    cfg
}

#[test]
fn benchmark_is_deterministic_and_well_formed() {
    let cfg = small_config();
    let a = run_benchmark(&cfg, 2).unwrap();
    let b = run_benchmark(&cfg, 2).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.to_csv_string(), b.to_csv_string());
    assert_eq!(a.variants.len(), 4);
    for s in &a.variants {
        assert_eq!(s.mse.len(), 2);
        assert!(s.mse.iter().all(|m| m.is_finite() && *m >= 0.0));
        assert!(s.std >= 0.0);
    }
    assert_eq!(a.runs.iter().map(|r| r.run).collect::<Vec<_>>(), vec![0, 1]);
    assert!(a.runs.iter().all(|r| r.test_rows == 30 && r.train_rows[1] == 270 && r.train_rows[3] == 320));

    let mut other = cfg.clone();
    other.bench.base_seed += 7;
    assert_ne!(run_benchmark(&other, 2).unwrap().to_csv_string(), a.to_csv_string());
}

#[test]
fn single_run_report_has_zero_spread() {
    let report = run_benchmark(&small_config(), 1).unwrap();
    assert!(report.variants.iter().all(|s| s.std == 0.0));
    let orig = report.stats(Variant::Original).mean;
    let mice = report.stats(Variant::Mice).mean;
    let expected = (1.0 - mice / orig) * 100.0;
    assert!((report.reduction(Variant::Original, Variant::Mice).unwrap() - expected).abs() < 1e-12);
}

#[test]
fn report_files_written() {
    let dir = tempfile::tempdir().unwrap();
    let report = run_benchmark(&small_config(), 1).unwrap();
    report.save(dir.path()).unwrap();
    let json = std::fs::read_to_string(dir.path().join("report.json")).unwrap();
    let back: BenchmarkReport = serde_json::from_str(&json).unwrap();
    assert_eq!(back, report);
    let csv = std::fs::read_to_string(dir.path().join("report.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 4);
    let svg = std::fs::read_to_string(dir.path().join("fig4.svg")).unwrap();
    assert_eq!(svg.matches("class=\"bar\"").count(), 4);
}

#[test]
fn invalid_config_rejected_before_work() {
    let mut cfg = small_config();
    cfg.localizer.train_fraction = 0.0;
    assert!(matches!(run_benchmark(&cfg, 1), Err(Error::Config(_))));
}

#[test]
fn files_chain_through_disk() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config();
    let truth = generate_ground_truth(&cfg.room, &cfg.aps, &cfg.propagation, derive_seed(cfg.seed, "truth")).unwrap();
    let truth_path = dir.path().join("truth.csv");
    truth.save_csv(&truth_path).unwrap();
    let reloaded = RfMap::load_csv(&truth_path, &cfg.room, &cfg.ap_ids()).unwrap();
    assert_eq!(reloaded, truth);

    let locs = sample_locations_fixed(&cfg.room, cfg.sampling.n_points, 3).unwrap();
    let ms = collect_measurements(&reloaded, &locs, 5, 1.0, 4).unwrap();
    let ms_path = dir.path().join("m.csv");
    save_csv(&ms, &ms_path).unwrap();
    let back = load_csv(&ms_path, &cfg.room, &cfg.ap_ids(), ms.seed).unwrap();
    assert_eq!(back, ms);
    let grid = to_sparse_grid(&back, 0).unwrap();
    assert_eq!(grid.observed_count(), cfg.sampling.n_points);

    let config_path = dir.path().join("cfg.json");
    std::fs::write(&config_path, cfg.to_json().unwrap()).unwrap();
    assert_eq!(ScenarioConfig::load(&config_path).unwrap(), cfg);
    assert!(matches!(ScenarioConfig::load(dir.path().join("missing.json")), Err(Error::Io { .. })));
    assert!(GanModel::from_json("{}").is_err());
}
