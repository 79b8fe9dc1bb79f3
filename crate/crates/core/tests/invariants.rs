use nalgebra::DMatrix;
use proptest::prelude::*;

use rfmap::env_sim::{generate_ground_truth, AccessPoint, PropagationParams, RoomGeometry};
use rfmap::interpolation::{
    dct_interpolate, idw_interpolate, knn_impute, mice_impute_grids, parse_grid_csv, sparse_grid_to_table, MiceOptions,
    SparseGrid,
};
use rfmap::localizer::{mse_of, split_dataset, LocalizationSample};
use rfmap::sampling::{collect_measurements, parse_csv, sample_locations_fixed, to_csv_string};

fn sparse_grid() -> impl Strategy<Value = SparseGrid> {
    (2usize..7, 2usize..7)
        .prop_flat_map(|(r, c)| {
            (
                prop::collection::vec(-90.0f64..-20.0, r * c),
                prop::collection::vec(any::<bool>(), r * c),
                Just((r, c)),
                (0.2f64..2.0, 0.2f64..2.0),
            )
        })
        .prop_filter_map("needs 3 observed", |(vals, mut mask, (r, c), cell)| {
            // Guarantee a few observations in fixed positions.
            mask[0] = true;
            mask[r * c - 1] = true;
            mask[r * c / 2] = true;
            let values = DMatrix::from_row_slice(r, c, &vals);
            let mask = DMatrix::from_row_slice(r, c, &mask);
            SparseGrid::new(values, mask, cell).ok()
        })
}

fn observed_range(g: &SparseGrid) -> (f64, f64) {
    g.observed().iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &(_, _, v)| (lo.min(v), hi.max(v)))
}

fn assert_observed_unchanged(g: &SparseGrid, completed: &DMatrix<f64>) -> Result<(), TestCaseError> {
    for (r, c, v) in g.observed() {
        prop_assert_eq!(completed[(r, c)].to_bits(), v.to_bits());
    }
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn imputers_keep_observed_cells(g in sparse_grid(), k in 1usize..4) {
        let knn = knn_impute(&g, k.min(g.observed_count())).unwrap();
        assert_observed_unchanged(&g, &knn.completed)?;
        let idw = idw_interpolate(&g, 2.0, 1e-6).unwrap();
        assert_observed_unchanged(&g, &idw.completed)?;
        let dct = dct_interpolate(&g, 1).unwrap();
        assert_observed_unchanged(&g, &dct.completed)?;
        let mice = mice_impute_grids(std::slice::from_ref(&g), &MiceOptions::default(), 0).unwrap();
        assert_observed_unchanged(&g, &mice[0].completed)?;
    }

    #[test]
    fn averaging_imputers_stay_in_observed_range(g in sparse_grid(), k in 1usize..4, p in 0.5f64..4.0) {
        let (lo, hi) = observed_range(&g);
        let tol = 1e-9 * hi.abs().max(lo.abs());
        for v in knn_impute(&g, k.min(g.observed_count())).unwrap().completed.iter() {
            prop_assert!(*v >= lo - tol && *v <= hi + tol);
        }
        for v in idw_interpolate(&g, p, 1e-6).unwrap().completed.iter() {
            prop_assert!(*v >= lo - tol && *v <= hi + tol);
        }
    }

    #[test]
    fn grid_table_round_trip(g in sparse_grid()) {
        let table = sparse_grid_to_table(&[g.clone(), g.clone()]).unwrap();
        prop_assert_eq!(table.values.shape(), (g.rows() * g.cols(), 4));
        let back = table.to_grids().unwrap();
        prop_assert_eq!(back[0].mask.clone(), g.mask.clone());
        for (r, c, v) in g.observed() {
            prop_assert_eq!(back[1].values[(r, c)], v);
        }
    }

    #[test]
    fn grid_dump_round_trip(g in sparse_grid()) {
        let csv = knn_impute(&g, 1).unwrap().to_csv_string();
        let parsed = parse_grid_csv(&csv, Some((g.rows(), g.cols())), g.cell_size).unwrap();
        prop_assert_eq!(parsed.mask, g.mask.clone());
    }

    #[test]
    fn split_is_a_partition(n in 2usize..400, frac in 0.05f64..0.95, seed in any::<u64>()) {
        let items: Vec<usize> = (0..n).collect();
        let (train, test) = split_dataset(&items, frac, seed).unwrap();
        prop_assert_eq!(train.len(), (n as f64 * frac).floor() as usize);
        let mut all: Vec<usize> = train.iter().chain(&test).copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, items);
    }

    #[test]
    fn mse_nonnegative_and_zero_only_when_exact(
        pts in prop::collection::vec((0.0f64..10.0, 0.0f64..17.0, -1.0f64..1.0, -1.0f64..1.0), 1..20)
    ) {
        let test: Vec<LocalizationSample> =
            pts.iter().map(|&(x, y, _, _)| LocalizationSample { features: vec![0.0], target: (x, y) }).collect();
        let exact: Vec<(f64, f64)> = pts.iter().map(|&(x, y, _, _)| (x, y)).collect();
        prop_assert_eq!(mse_of(&exact, &test), 0.0);
        let off: Vec<(f64, f64)> = pts.iter().map(|&(x, y, dx, dy)| (x + dx, y + dy)).collect();
        let m = mse_of(&off, &test);
        prop_assert!(m >= 0.0);
        let any_offset = pts.iter().any(|&(_, _, dx, dy)| dx != 0.0 || dy != 0.0);
        prop_assert_eq!(m > 0.0, any_offset);
    }

    #[test]
    fn measurement_csv_round_trip(seed in any::<u64>(), n in 1usize..12, reads in 1usize..4) {
        let room = RoomGeometry::new(5.0, 6.0, 4, 3).unwrap();
        let aps = vec![
            AccessPoint { id: "a".into(), x_m: 1.0, y_m: 1.0, tx_power_dbm: 21.0, frequency_hz: 2.4e9 },
            AccessPoint { id: "b".into(), x_m: 4.0, y_m: 5.0, tx_power_dbm: 18.0, frequency_hz: 2.4e9 },
        ];
        let truth = generate_ground_truth(&room, &aps, &PropagationParams::default(), seed).unwrap();
        let locs = sample_locations_fixed(&room, n, seed ^ 1).unwrap();
        let ms = collect_measurements(&truth, &locs, reads, 2.0, seed ^ 2).unwrap();
        let back = parse_csv(&to_csv_string(&ms), &room, &truth.ap_ids, ms.seed).unwrap();
        prop_assert_eq!(back, ms);
    }
}
