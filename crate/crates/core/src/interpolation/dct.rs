//! Orthonormal 2-D DCT-II and least-squares reconstruction from a truncated
//! low-frequency basis.

use nalgebra::{DMatrix, DVector};

use super::{require_observed, Diagnostics, ImputationResult, Method, SparseGrid};
use crate::error::{Error, Result};

/// Singular values below this fraction of the largest mark the design as rank deficient.
const RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DctConvention {
    OrthonormalDctII,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DctSpectrum {
    pub coefficients: DMatrix<f64>,
    pub convention: DctConvention,
}

/// `basis[(k, n)] = a_k cos(pi (n + 1/2) k / N)`, with `a_0 = sqrt(1/N)` and
/// `a_k = sqrt(2/N)` otherwise. Rows are orthonormal.
pub fn dct_basis(n: usize) -> DMatrix<f64> {
    let nf = n as f64;
    DMatrix::from_fn(n, n, |k, i| {
        let scale = if k == 0 { (1.0 / nf).sqrt() } else { (2.0 / nf).sqrt() };
        scale * (std::f64::consts::PI * (i as f64 + 0.5) * k as f64 / nf).cos()
    })
}

pub fn dct2_forward(x: &DMatrix<f64>) -> Result<DctSpectrum> {
    if x.is_empty() {
        return Err(Error::domain("DCT of an empty matrix"));
    }
    let c1 = dct_basis(x.nrows());
    let c2 = dct_basis(x.ncols());
    Ok(DctSpectrum { coefficients: &c1 * x * c2.transpose(), convention: DctConvention::OrthonormalDctII })
}

pub fn dct2_inverse(s: &DctSpectrum) -> Result<DMatrix<f64>> {
    let x = &s.coefficients;
    if x.is_empty() {
        return Err(Error::domain("inverse DCT of an empty spectrum"));
    }
    let c1 = dct_basis(x.nrows());
    let c2 = dct_basis(x.ncols());
    Ok(c1.transpose() * x * c2)
}

/// All `(k1, k2)` frequency pairs ordered by `k1 + k2`, ties by `k1`.
pub fn zigzag_order(n1: usize, n2: usize) -> Vec<(usize, usize)> {
    let mut pairs: Vec<(usize, usize)> = (0..n1).flat_map(|a| (0..n2).map(move |b| (a, b))).collect();
    pairs.sort_by_key(|&(a, b)| (a + b, a));
    pairs
}

/// Fits the `num_coeffs` lowest-frequency basis functions to the observed
/// cells, evaluates the expansion everywhere, then restores observed values.
pub fn dct_interpolate(g: &SparseGrid, num_coeffs: usize) -> Result<ImputationResult> {
    let (n1, n2) = (g.rows(), g.cols());
    if num_coeffs == 0 || num_coeffs > n1 * n2 {
        return Err(Error::domain(format!("num_coeffs must be in 1..={}, got {num_coeffs}", n1 * n2)));
    }
    let obs = require_observed(g, num_coeffs, "DCT fit")?;
    let c1 = dct_basis(n1);
    let c2 = dct_basis(n2);
    let freqs: Vec<(usize, usize)> = zigzag_order(n1, n2).into_iter().take(num_coeffs).collect();

    let design = DMatrix::from_fn(obs.len(), num_coeffs, |i, j| {
        let (r, c, _) = obs[i];
        let (k1, k2) = freqs[j];
        c1[(k1, r)] * c2[(k2, c)]
    });
    let target = DVector::from_iterator(obs.len(), obs.iter().map(|o| o.2));

    let svd = design.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if !(smax > 0.0) || smin <= RANK_TOL * smax {
        return Err(Error::IllPosed(format!(
            "DCT design with {num_coeffs} coefficients over {} observations is rank deficient",
            obs.len()
        )));
    }
    let coeffs = svd
        .solve(&target, RANK_TOL * smax)
        .map_err(|e| Error::IllPosed(format!("least-squares solve failed: {e}")))?;
    let residual = &design * &coeffs - &target;
    let fit_rms = (residual.norm_squared() / obs.len() as f64).sqrt();

    let mut spectrum = DMatrix::zeros(n1, n2);
    for (&(k1, k2), &a) in freqs.iter().zip(coeffs.iter()) {
        spectrum[(k1, k2)] = a;
    }
    let mut completed = c1.transpose() * spectrum * &c2;
    for &(r, c, v) in &obs {
        completed[(r, c)] = v;
    }
    Ok(ImputationResult {
        completed,
        observed: g.mask.clone(),
        method: Method::Dct,
        iterations: 0,
        diagnostics: Diagnostics { fit_rms: Some(fit_rms), ..Default::default() },
    })
}
