use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::neuralnet::clamp_probability;

/// Normalized nonnegative mass over a shared, indexed support.
#[derive(Debug, Clone, PartialEq)]
pub struct Distribution {
    weights: Vec<f64>,
}

impl Distribution {
    /// Normalizes `weights` to unit mass.
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::domain("distribution weights must be finite and nonnegative"));
        }
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) {
            return Err(Error::domain("distribution has no mass"));
        }
        Ok(Distribution { weights: weights.into_iter().map(|w| w / total).collect() })
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Equal-width histogram of `samples` over `[lo, hi]`; values outside are
    /// counted in the edge bins.
    pub fn histogram(samples: &[f64], lo: f64, hi: f64, bins: usize) -> Result<Self> {
        if bins == 0 || !(hi > lo) {
            return Err(Error::domain(format!("histogram needs bins >= 1 and hi > lo, got {bins} over [{lo}, {hi}]")));
        }
        let mut counts = vec![0.0; bins];
        let width = (hi - lo) / bins as f64;
        for &s in samples {
            let b = ((s - lo) / width).floor();
            let idx = if b.is_nan() { 0 } else { (b.max(0.0) as usize).min(bins - 1) };
            counts[idx] += 1.0;
        }
        Self::new(counts)
    }
}

fn same_support(a: &Distribution, b: &Distribution) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::domain(format!("supports differ: {} vs {} bins", a.len(), b.len())));
    }
    Ok(())
}

/// `KL(q || p)` in nats, with `0 ln(0/p) = 0`. Returns `f64::INFINITY` when
/// `q` puts mass where `p` has none.
pub fn kl_divergence(q: &Distribution, p: &Distribution) -> Result<f64> {
    same_support(q, p)?;
    let mut total = 0.0;
    for (&qi, &pi) in q.weights.iter().zip(&p.weights) {
        if qi == 0.0 {
            continue;
        }
        if pi == 0.0 {
            return Ok(f64::INFINITY);
        }
        total += qi * (qi / pi).ln();
    }
    Ok(total.max(0.0))
}

/// Jensen-Shannon divergence in nats, bounded by `ln 2`.
pub fn js_divergence(p: &Distribution, q: &Distribution) -> Result<f64> {
    same_support(p, q)?;
    let m = Distribution { weights: p.weights.iter().zip(&q.weights).map(|(a, b)| 0.5 * (a + b)).collect() };
    let js = 0.5 * kl_divergence(p, &m)? + 0.5 * kl_divergence(q, &m)?;
    Ok(js.min(std::f64::consts::LN_2))
}

/// JS divergence between `bins`-bin histograms of two sample sets over
/// their joint range.
pub fn sample_js(a: &[f64], b: &[f64], bins: usize) -> Result<f64> {
    let (lo, hi) = a
        .iter()
        .chain(b)
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    if !(lo.is_finite() && hi.is_finite()) {
        return Err(Error::domain("samples must be finite and nonempty"));
    }
    if hi == lo {
        return Ok(0.0);
    }
    js_divergence(&Distribution::histogram(a, lo, hi, bins)?, &Distribution::histogram(b, lo, hi, bins)?)
}

/// Mean of per-column [`sample_js`] over two sample matrices.
pub fn marginal_js(a: &DMatrix<f64>, b: &DMatrix<f64>, bins: usize) -> Result<f64> {
    if a.ncols() != b.ncols() || a.ncols() == 0 {
        return Err(Error::domain("sample matrices must share a nonzero column count"));
    }
    let mut total = 0.0;
    for j in 0..a.ncols() {
        let ca: Vec<f64> = a.column(j).iter().copied().collect();
        let cb: Vec<f64> = b.column(j).iter().copied().collect();
        total += sample_js(&ca, &cb, bins)?;
    }
    Ok(total / a.ncols() as f64)
}

/// Empirical minimax value `mean(ln D(x)) + mean(ln(1 - D(G(z))))`, with
/// probabilities clamped away from 0 and 1.
pub fn value_function(d_real: &[f64], d_fake: &[f64]) -> f64 {
    let mean = |xs: &mut dyn Iterator<Item = f64>, n: usize| if n == 0 { 0.0 } else { xs.sum::<f64>() / n as f64 };
    mean(&mut d_real.iter().map(|&p| clamp_probability(p).ln()), d_real.len())
        + mean(&mut d_fake.iter().map(|&p| (1.0 - clamp_probability(p)).ln()), d_fake.len())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;
    use proptest::prelude::*;
    use rand::Rng;

    fn dist(w: &[f64]) -> Distribution {
        Distribution::new(w.to_vec()).unwrap()
    }

    #[test]
    fn kl_fixtures() {
        let p = dist(&[0.25, 0.75]);
        assert_eq!(kl_divergence(&p, &p).unwrap(), 0.0);
        // 0.5 ln(0.5/0.25) + 0.5 ln(0.5/0.75)
        let kl = kl_divergence(&dist(&[0.5, 0.5]), &p).unwrap();
        assert!((kl - 0.1438).abs() < 1e-4, "{kl}");
        assert!(kl_divergence(&dist(&[1.0, 0.0]), &dist(&[0.0, 1.0])).unwrap().is_infinite());
        assert!(kl_divergence(&p, &dist(&[1.0, 1.0, 1.0])).is_err());
    }

    #[test]
    fn kl_is_asymmetric() {
        let a = dist(&[0.5, 0.5]);
        let b = dist(&[0.1, 0.9]);
        assert!((kl_divergence(&a, &b).unwrap() - kl_divergence(&b, &a).unwrap()).abs() > 1e-3);
    }

    #[test]
    fn js_fixtures() {
        let p = dist(&[0.2, 0.3, 0.5]);
        assert_eq!(js_divergence(&p, &p).unwrap(), 0.0);
        let js = js_divergence(&dist(&[1.0, 0.0]), &dist(&[0.0, 1.0])).unwrap();
        assert!((js - std::f64::consts::LN_2).abs() < 1e-9);
        assert!(js_divergence(&p, &dist(&[1.0])).is_err());
    }

    #[test]
    fn distribution_rejects_bad_mass() {
        assert!(Distribution::new(vec![0.0, 0.0]).is_err());
        assert!(Distribution::new(vec![1.0, -0.5]).is_err());
        let d = dist(&[3.0, 1.0]);
        assert!((d.weights().iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn value_function_fixtures() {
        let half = vec![0.5; 16];
        assert!((value_function(&half, &half) - 2.0 * 0.5f64.ln()).abs() < 1e-6);
        assert!((value_function(&half, &half) + 1.3863).abs() < 1e-4);
        let v = value_function(&[1.0 - 1e-12; 4], &[1e-12; 4]);
        assert!(v < 0.0 && v > -1e-6);
        let a = [0.9, 0.2, 0.6];
        let b = [0.1, 0.4, 0.7];
        let (ra, rb) = ([0.6, 0.9, 0.2], [0.7, 0.1, 0.4]);
        assert!((value_function(&a, &b) - value_function(&ra, &rb)).abs() < 1e-15);
    }

    #[test]
    fn histogram_js_of_same_sampler_is_small() {
        let mut rng = seed::rng(1);
        let a: Vec<f64> = (0..5000).map(|_| rng.random::<f64>()).collect();
        let b: Vec<f64> = (0..5000).map(|_| rng.random::<f64>()).collect();
        assert!(sample_js(&a, &b, 30).unwrap() < 0.01);
        let shifted: Vec<f64> = b.iter().map(|v| v + 2.0).collect();
        assert!(sample_js(&a, &shifted, 30).unwrap() > 0.69);
    }

    fn weights() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(0.0f64..1.0, 6).prop_filter("mass", |w| w.iter().sum::<f64>() > 1e-3)
    }

    proptest! {
        #[test]
        fn gibbs_inequality(a in weights(), b in weights()) {
            let q = dist(&a);
            let p = dist(&b.iter().map(|v| v + 1e-3).collect::<Vec<_>>());
            let kl = kl_divergence(&q, &p).unwrap();
            prop_assert!(kl >= 0.0);
            prop_assert!(kl_divergence(&q, &q).unwrap().abs() < 1e-12);
        }

        #[test]
        fn js_bounded_and_symmetric(a in weights(), b in weights()) {
            let (p, q) = (dist(&a), dist(&b));
            let pq = js_divergence(&p, &q).unwrap();
            let qp = js_divergence(&q, &p).unwrap();
            prop_assert!((0.0..=std::f64::consts::LN_2).contains(&pq));
            prop_assert!((pq - qp).abs() < 1e-12);
        }
    }
}
