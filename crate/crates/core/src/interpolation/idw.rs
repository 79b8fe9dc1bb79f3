use super::{require_observed, Diagnostics, ImputationResult, Method, SparseGrid};
use crate::error::{Error, Result};

/// Shepard interpolation: each missing cell becomes `sum(w_k q_k) / sum(w_k)`
/// over all observed cells, with `w_k = 1 / (d_k + epsilon)^p` and `q_k` the
/// observed value.
pub fn idw_interpolate(g: &SparseGrid, power_p: f64, epsilon_m: f64) -> Result<ImputationResult> {
    if !(power_p > 0.0 && power_p.is_finite()) {
        return Err(Error::domain(format!("IDW power must be positive, got {power_p}")));
    }
    if !(epsilon_m > 0.0 && epsilon_m.is_finite()) {
        return Err(Error::domain(format!("IDW epsilon must be positive, got {epsilon_m}")));
    }
    let obs = require_observed(g, 1, "IDW interpolation")?;
    let mut completed = g.values.clone();
    for r in 0..g.rows() {
        for c in 0..g.cols() {
            if g.mask[(r, c)] {
                continue;
            }
            let (mut num, mut den) = (0.0, 0.0);
            for &(or, oc, q) in &obs {
                let d = g.squared_distance((r, c), (or, oc)).sqrt();
                let w = (d + epsilon_m).powf(-power_p);
                num += w * q;
                den += w;
            }
            completed[(r, c)] = num / den;
        }
    }
    Ok(ImputationResult {
        completed,
        observed: g.mask.clone(),
        method: Method::Idw,
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
    fn constant_field() {
        let out = idw_interpolate(&grid(5, 4, &[(1, 1, -60.0)]), 2.0, 1e-6).unwrap();
        assert!(out.completed.iter().all(|&v| (v + 60.0).abs() < 1e-12));
    }

    #[test]
    fn equidistant_pair_is_mean_for_any_power() {
        for p in [0.5, 1.0, 2.0, 3.7] {
            let out = idw_interpolate(&grid(1, 3, &[(0, 0, -40.0), (0, 2, -70.0)]), p, 1e-6).unwrap();
            assert!((out.completed[(0, 1)] + 55.0).abs() < 1e-12);
        }
    }

    #[test]
    fn matches_direct_formula_on_6x6() {
        let obs = [(0, 0, -40.0), (5, 5, -70.0), (2, 4, -55.0), (4, 1, -62.0)];
        let out = idw_interpolate(&grid(6, 6, &obs), 2.0, 1e-6).unwrap();
        // Direct evaluation at (3, 3): distances sqrt(18), sqrt(8), sqrt(2), sqrt(5).
        let d = [18f64.sqrt(), 8f64.sqrt(), 2f64.sqrt(), 5f64.sqrt()];
        let w: Vec<f64> = d.iter().map(|d| 1.0 / (d + 1e-6).powi(2)).collect();
        let expect = w.iter().zip(&obs).map(|(w, o)| w * o.2).sum::<f64>() / w.iter().sum::<f64>();
        assert!((out.completed[(3, 3)] - expect).abs() < 1e-12);
        for &(r, c, v) in &obs {
            assert_eq!(out.completed[(r, c)], v);
        }
    }

    #[test]
    fn rejects_empty_and_bad_params() {
        assert!(idw_interpolate(&grid(2, 2, &[]), 2.0, 1e-6).is_err());
        assert!(idw_interpolate(&grid(2, 2, &[(0, 0, 1.0)]), 0.0, 1e-6).is_err());
        assert!(idw_interpolate(&grid(2, 2, &[(0, 0, 1.0)]), 2.0, 0.0).is_err());
    }
}
