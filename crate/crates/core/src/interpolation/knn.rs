use std::cmp::Ordering;

use super::{require_observed, Diagnostics, ImputationResult, Method, SparseGrid};
use crate::error::{Error, Result};

/// Fills each missing cell with the unweighted mean of its `k` nearest
/// observed cells (cell-center distance, ties broken by `(row, col)`).
/// The mean is accumulated nearest-first.
pub fn knn_impute(g: &SparseGrid, k: usize) -> Result<ImputationResult> {
    if k == 0 {
        return Err(Error::domain("k must be at least 1"));
    }
    let obs = require_observed(g, k, "k-NN imputation")?;
    let mut completed = g.values.clone();
    let mut scratch: Vec<(f64, usize, usize, f64)> = Vec::with_capacity(obs.len());
    for r in 0..g.rows() {
        for c in 0..g.cols() {
            if g.mask[(r, c)] {
                continue;
            }
            scratch.clear();
            scratch.extend(obs.iter().map(|&(or, oc, v)| (g.squared_distance((r, c), (or, oc)), or, oc, v)));
            let by_rank = |a: &(f64, usize, usize, f64), b: &(f64, usize, usize, f64)| {
                a.0.partial_cmp(&b.0).unwrap_or(Ordering::Equal).then((a.1, a.2).cmp(&(b.1, b.2)))
            };
            if k < scratch.len() {
                scratch.select_nth_unstable_by(k - 1, by_rank);
            }
            let nearest = &mut scratch[..k];
            nearest.sort_unstable_by(by_rank);
            completed[(r, c)] = nearest.iter().map(|e| e.3).sum::<f64>() / k as f64;
        }
    }
    Ok(ImputationResult {
        completed,
        observed: g.mask.clone(),
        method: Method::Knn,
        iterations: 0,
        diagnostics: Diagnostics::default(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    fn grid(rows: usize, cols: usize, obs: &[(usize, usize, f64)]) -> SparseGrid {
        let mut values = DMatrix::zeros(rows, cols);
        let mut mask = DMatrix::from_element(rows, cols, false);
        for &(r, c, v) in obs {
            values[(r, c)] = v;
            mask[(r, c)] = true;
        }
        SparseGrid::unit(values, mask).unwrap()
    }

    #[test]
    fn single_source_fills_everything() {
        let out = knn_impute(&grid(4, 3, &[(2, 1, -47.5)]), 1).unwrap();
        assert!(out.completed.iter().all(|&v| v == -47.5));
    }

    #[test]
    fn equidistant_pair_averages() {
        let out = knn_impute(&grid(1, 3, &[(0, 0, 10.0), (0, 2, 20.0)]), 2).unwrap();
        assert_eq!(out.completed[(0, 1)], 15.0);
    }

    #[test]
    fn ties_prefer_lexicographic_cells() {
        // (1,1) is equidistant from (0,1) and (1,0); (0,1) wins the tie for k=1.
        let out = knn_impute(&grid(2, 2, &[(0, 1, 1.0), (1, 0, 2.0)]), 1).unwrap();
        assert_eq!(out.completed[(1, 1)], 1.0);
        assert_eq!(out.completed[(0, 0)], 1.0);
    }

    #[test]
    fn too_few_observed() {
        assert!(matches!(knn_impute(&grid(3, 3, &[(0, 0, 1.0)]), 2), Err(Error::Domain(_))));
        assert!(knn_impute(&grid(3, 3, &[(0, 0, 1.0)]), 0).is_err());
    }

    #[test]
    fn metric_cell_size_changes_neighbours() {
        let mut g = grid(3, 3, &[(0, 1, 1.0), (1, 0, 2.0)]);
        // Rows far apart: (1,1)'s nearest is (1,0) in the same row.
        g.cell_size = (10.0, 1.0);
        assert_eq!(knn_impute(&g, 1).unwrap().completed[(1, 1)], 2.0);
    }
}
