//! Multiple imputation by chained equations with linear regression models.
//!
//! Missing entries start at their column means. Each sweep visits the
//! incomplete columns (fewest missing first) and refits that column on all
//! others by ordinary least squares over the rows where it is observed,
//! using the current fill of the predictors, then re-predicts its missing
//! entries. Sweeps stop once no imputed entry moves by `tol` or more.

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};

use super::{sparse_grid_to_table, Diagnostics, ImputationResult, Method, SparseGrid};
use crate::error::{Error, Result};
use crate::seed;

const RANK_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MiceOptions {
    pub max_iter: usize,
    pub tol: f64,
    /// Independent chains averaged into the point estimate.
    pub chains: usize,
    /// Adds Gaussian residual noise to every prediction (the stochastic variant).
    pub posterior_noise: bool,
}

impl Default for MiceOptions {
    fn default() -> Self {
        MiceOptions { max_iter: 50, tol: 1e-6, chains: 1, posterior_noise: false }
    }
}

/// Deterministic single-chain imputation of `table`; `mask` is `true` where observed.
pub fn mice_impute(table: &DMatrix<f64>, mask: &DMatrix<bool>, max_iter: usize, tol: f64, seed: u64) -> Result<ImputationResult> {
    mice_impute_with(table, mask, &MiceOptions { max_iter, tol, ..Default::default() }, seed)
}

pub fn mice_impute_with(table: &DMatrix<f64>, mask: &DMatrix<bool>, opts: &MiceOptions, seed: u64) -> Result<ImputationResult> {
    let (n, p) = table.shape();
    if mask.shape() != (n, p) {
        return Err(Error::domain("table and mask dimensions differ"));
    }
    if p < 2 {
        return Err(Error::domain(format!("MICE needs at least 2 columns, got {p}")));
    }
    if opts.max_iter == 0 || !(opts.tol > 0.0) || opts.chains == 0 {
        return Err(Error::domain("MICE needs max_iter >= 1, tol > 0 and chains >= 1"));
    }
    for j in 0..p {
        let observed = mask.column(j).iter().filter(|&&m| m).count();
        if observed < 2 {
            return Err(Error::domain(format!("column {j} has {observed} observed entries, need at least 2")));
        }
        if mask.column(j).iter().zip(table.column(j).iter()).any(|(&m, v)| m && !v.is_finite()) {
            return Err(Error::domain(format!("column {j} has non-finite observed values")));
        }
    }

    let mut order: Vec<(usize, usize)> = (0..p)
        .map(|j| (mask.column(j).iter().filter(|&&m| !m).count(), j))
        .filter(|&(missing, _)| missing > 0)
        .collect();
    order.sort();
    let order: Vec<usize> = order.into_iter().map(|(_, j)| j).collect();

    if order.is_empty() {
        return Ok(ImputationResult {
            completed: table.clone(),
            observed: mask.clone(),
            method: Method::Mice,
            iterations: 0,
            diagnostics: Diagnostics::default(),
        });
    }

    let mut sum = DMatrix::<f64>::zeros(n, p);
    let mut first: Option<(usize, Diagnostics)> = None;
    for chain in 0..opts.chains {
        let chain_seed = seed::derive_seed(seed, &format!("mice-chain-{chain}"));
        let (filled, iterations, diag) = run_chain(table, mask, &order, opts, chain_seed);
        sum += filled;
        if first.is_none() {
            first = Some((iterations, diag));
        }
    }
    let mut completed = sum / opts.chains as f64;
    // Averaging chains must not perturb observed entries.
    for i in 0..n {
        for j in 0..p {
            if mask[(i, j)] {
                completed[(i, j)] = table[(i, j)];
            }
        }
    }
    let (iterations, diagnostics) = first.expect("at least one chain");
    Ok(ImputationResult { completed, observed: mask.clone(), method: Method::Mice, iterations, diagnostics })
}

fn run_chain(
    table: &DMatrix<f64>,
    mask: &DMatrix<bool>,
    order: &[usize],
    opts: &MiceOptions,
    seed: u64,
) -> (DMatrix<f64>, usize, Diagnostics) {
    let (n, p) = table.shape();
    let mut rng = seed::rng(seed);
    let mut data = table.clone();
    let mut col_mean = vec![0.0; p];
    for j in 0..p {
        let (mut s, mut k) = (0.0, 0usize);
        for i in 0..n {
            if mask[(i, j)] {
                s += table[(i, j)];
                k += 1;
            }
        }
        col_mean[j] = s / k as f64;
        for i in 0..n {
            if !mask[(i, j)] {
                data[(i, j)] = col_mean[j];
            }
        }
    }

    let mut diag = Diagnostics::default();
    let mut iterations = 0;
    for sweep in 0..opts.max_iter {
        iterations = sweep + 1;
        let mut max_change = 0.0f64;
        for &j in order {
            let fit_rows: Vec<usize> = (0..n).filter(|&i| mask[(i, j)]).collect();
            let miss_rows: Vec<usize> = (0..n).filter(|&i| !mask[(i, j)]).collect();
            let predictors: Vec<usize> = (0..p).filter(|&k| k != j).collect();
            let design = |rows: &[usize]| {
                DMatrix::from_fn(rows.len(), predictors.len() + 1, |r, c| {
                    if c == 0 {
                        1.0
                    } else {
                        data[(rows[r], predictors[c - 1])]
                    }
                })
            };
            let x = design(&fit_rows);
            let y = DVector::from_iterator(fit_rows.len(), fit_rows.iter().map(|&i| data[(i, j)]));
            let fit = ols(&x, &y);
            let predictions: Vec<f64> = match &fit {
                Some((beta, resid_sd)) => {
                    let xm = design(&miss_rows);
                    let pred = xm * beta;
                    pred.iter()
                        .map(|v| {
                            if opts.posterior_noise {
                                let z: f64 = StandardNormal.sample(&mut rng);
                                v + resid_sd * z
                            } else {
                                *v
                            }
                        })
                        .collect()
                }
                None => {
                    diag.mean_fallbacks.push((sweep, j));
                    vec![col_mean[j]; miss_rows.len()]
                }
            };
            for (&i, v) in miss_rows.iter().zip(predictions) {
                max_change = max_change.max((v - data[(i, j)]).abs());
                data[(i, j)] = v;
            }
        }
        diag.max_change_per_sweep.push(max_change);
        if max_change < opts.tol {
            break;
        }
    }
    (data, iterations, diag)
}

/// Least squares with rank check. Returns the coefficients and the residual
/// standard deviation, or `None` when the design is singular.
fn ols(x: &DMatrix<f64>, y: &DVector<f64>) -> Option<(DVector<f64>, f64)> {
    if x.nrows() < x.ncols() {
        return None;
    }
    let svd = x.clone().svd(true, true);
    let smax = svd.singular_values.max();
    if !(smax > 0.0) || svd.singular_values.min() <= RANK_TOL * smax {
        return None;
    }
    let beta = svd.solve(y, RANK_TOL * smax).ok()?;
    if beta.iter().any(|b| !b.is_finite()) {
        return None;
    }
    let resid = x * &beta - y;
    let dof = (x.nrows() - x.ncols()).max(1);
    Some((beta, (resid.norm_squared() / dof as f64).sqrt()))
}

/// Imputes co-registered layers jointly through their table view
/// `(x, y, rss_1..rss_M)` and returns one completed layer per input.
pub fn mice_impute_grids(layers: &[SparseGrid], opts: &MiceOptions, seed: u64) -> Result<Vec<ImputationResult>> {
    let table = sparse_grid_to_table(layers)?;
    let result = mice_impute_with(&table.values, &table.mask, opts, seed)?;
    let (rows, cols) = (table.rows, table.cols);
    Ok(layers
        .iter()
        .enumerate()
        .map(|(a, layer)| ImputationResult {
            completed: DMatrix::from_fn(rows, cols, |r, c| result.completed[(r * cols + c, 2 + a)]),
            observed: layer.mask.clone(),
            method: Method::Mice,
            iterations: result.iterations,
            diagnostics: result.diagnostics.clone(),
        })
        .collect())
}
