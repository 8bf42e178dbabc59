//! Error bars and goodness-of-fit: batch means, autocorrelation time, chi-square.

use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::{Error, Result};

/// Default number of batches for batch-means error bars.
pub const DEFAULT_BATCHES: usize = 256;
/// Fewest batches (and samples) accepted.
pub const MIN_BATCHES: usize = 32;

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance.
pub fn variance(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64
}

/// `(mean, stderr)` from `min(DEFAULT_BATCHES, n)` contiguous batches. Leading samples
/// that do not fill a batch are dropped from the error bar but kept in the mean.
pub fn batch_means(xs: &[f64]) -> Result<(f64, f64)> {
    batch_means_with(xs, DEFAULT_BATCHES)
}

pub fn batch_means_with(xs: &[f64], batches: usize) -> Result<(f64, f64)> {
    if xs.len() < MIN_BATCHES {
        return Err(Error::BudgetTooSmall(format!("{} samples, need at least {MIN_BATCHES}", xs.len())));
    }
    let nb = batches.max(MIN_BATCHES).min(xs.len());
    let size = xs.len() / nb;
    let skip = xs.len() - nb * size;
    let bm: Vec<f64> = xs[skip..].chunks_exact(size).map(mean).collect();
    let m = mean(xs);
    let se = (variance(&bm) / nb as f64).sqrt();
    Ok((m, se))
}

/// Integrated autocorrelation time with Sokal's self-consistent window (c = 6).
/// Returns 0.5 for an uncorrelated or constant series.
pub fn integrated_autocorrelation_time(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n < 4 {
        return 0.5;
    }
    let m = mean(xs);
    let c0: f64 = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n as f64;
    if c0 <= 0.0 {
        return 0.5;
    }
    let mut tau = 0.5;
    for t in 1..n / 2 {
        let ct: f64 = (0..n - t).map(|i| (xs[i] - m) * (xs[i + t] - m)).sum::<f64>() / n as f64;
        tau += ct / c0;
        if (t as f64) >= 6.0 * tau {
            break;
        }
    }
    tau.max(0.5)
}

/// Outcome of a chi-square goodness-of-fit test.
#[derive(Clone, Debug, PartialEq)]
pub struct ChiSquare {
    pub statistic: f64,
    pub dof: usize,
    pub critical: f64,
    pub passed: bool,
}

/// Pearson test of `observed` counts against `expected` probabilities at level `alpha`.
/// Bins with expected count below 5 are pooled into one bin (merged into the smallest
/// regular bin if the pool itself stays below 5).
pub fn chi_square(observed: &[u64], expected: &[f64], alpha: f64) -> Result<ChiSquare> {
    if observed.len() != expected.len() || observed.is_empty() {
        return Err(Error::InvalidParameter("observed and expected differ in length".into()));
    }
    let n: u64 = observed.iter().sum();
    let total_p: f64 = expected.iter().sum();
    let nf = n as f64;
    let mut bins: Vec<(f64, f64)> = Vec::new();
    let (mut pool_o, mut pool_e) = (0.0, 0.0);
    for (&o, &p) in observed.iter().zip(expected) {
        let e = nf * p / total_p;
        if e < 5.0 {
            pool_o += o as f64;
            pool_e += e;
        } else {
            bins.push((o as f64, e));
        }
    }
    if pool_e > 0.0 || pool_o > 0.0 {
        if pool_e >= 5.0 || bins.is_empty() {
            bins.push((pool_o, pool_e));
        } else {
            let i = (0..bins.len()).min_by(|&a, &b| bins[a].1.total_cmp(&bins[b].1)).unwrap();
            bins[i].0 += pool_o;
            bins[i].1 += pool_e;
        }
    }
    if bins.len() < 2 {
        return Ok(ChiSquare { statistic: 0.0, dof: 0, critical: 0.0, passed: true });
    }
    let statistic: f64 = bins
        .iter()
        .map(|&(o, e)| if e > 0.0 { (o - e) * (o - e) / e } else if o > 0.0 { f64::INFINITY } else { 0.0 })
        .sum();
    let dof = bins.len() - 1;
    let dist = ChiSquared::new(dof as f64).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let critical = dist.inverse_cdf(1.0 - alpha);
    Ok(ChiSquare { statistic, dof, critical, passed: statistic <= critical })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_series_has_zero_error() {
        let xs = vec![1.0; 1000];
        let (m, s) = batch_means(&xs).unwrap();
        assert_eq!((m, s), (1.0, 0.0));
        assert_eq!(integrated_autocorrelation_time(&xs), 0.5);
    }

    #[test]
    fn too_few_samples() {
        assert!(batch_means(&[0.0; 31]).is_err());
    }

    #[test]
    fn chi_square_critical_value() {
        // 1 - 1e-3 quantile of chi-square with one degree of freedom.
        let r = chi_square(&[50, 50], &[0.5, 0.5], 1e-3).unwrap();
        assert!((r.critical - 10.827566).abs() < 1e-4);
        assert!(r.passed && r.statistic == 0.0);
        let bad = chi_square(&[100, 0], &[0.5, 0.5], 1e-3).unwrap();
        assert!(!bad.passed);
    }
}
