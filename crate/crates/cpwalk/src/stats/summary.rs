//! Replica-level summaries. One CI policy everywhere: normal approximation
//! on replica means, percentile bootstrap below 50 replicas.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const Z95: f64 = 1.959963984540054;

#[derive(Clone, Copy, Debug, serde::Serialize)]
pub struct Summary {
    pub mean: f64,
    pub se: f64,
    pub ci95: (f64, f64),
    pub n: u64,
}

const BOOTSTRAP_RESAMPLES: usize = 2000;
const BOOTSTRAP_SEED: u64 = 0x9e3779b97f4a7c15;

pub fn summarize(xs: &[f64]) -> Summary {
    let n = xs.len();
    assert!(n > 0, "empty sample");
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return Summary {
            mean,
            se: f64::INFINITY,
            ci95: (f64::NEG_INFINITY, f64::INFINITY),
            n: 1,
        };
    }
    if n >= 50 {
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let se = (var / n as f64).sqrt();
        return Summary {
            mean,
            se,
            ci95: (mean - Z95 * se, mean + Z95 * se),
            n: n as u64,
        };
    }
    // percentile bootstrap, deterministic
    let mut rng = ChaCha8Rng::seed_from_u64(BOOTSTRAP_SEED ^ n as u64);
    let mut means = Vec::with_capacity(BOOTSTRAP_RESAMPLES);
    for _ in 0..BOOTSTRAP_RESAMPLES {
        let mut s = 0.0;
        for _ in 0..n {
            s += xs[rng.gen_range(0..n)];
        }
        means.push(s / n as f64);
    }
    means.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let var = means.iter().map(|m| (m - mean).powi(2)).sum::<f64>() / means.len() as f64;
    Summary {
        mean,
        se: var.sqrt(),
        ci95: (
            means[(0.025 * BOOTSTRAP_RESAMPLES as f64) as usize],
            means[(0.975 * BOOTSTRAP_RESAMPLES as f64) as usize],
        ),
        n: n as u64,
    }
}

/// Ratio estimator `sum(num) / sum(den)` with a delta-method standard error.
pub fn ratio_estimate(num: &[f64], den: &[f64]) -> (f64, f64) {
    assert_eq!(num.len(), den.len());
    let n = num.len() as f64;
    let mean_num = num.iter().sum::<f64>() / n;
    let mean_den = den.iter().sum::<f64>() / n;
    let ratio = mean_num / mean_den;
    if num.len() < 2 {
        return (ratio, f64::INFINITY);
    }
    // variance of (num_i - ratio * den_i) / mean_den
    let resid_var = num
        .iter()
        .zip(den)
        .map(|(&w, &t)| (w - ratio * t).powi(2))
        .sum::<f64>()
        / (n - 1.0);
    let se = (resid_var / n).sqrt() / mean_den;
    (ratio, se)
}

/// Two estimates agree within their combined interval at `z` standard errors.
pub fn agree_within(a: f64, se_a: f64, b: f64, se_b: f64, z: f64) -> bool {
    (a - b).abs() <= z * (se_a * se_a + se_b * se_b).sqrt()
}

pub fn pearson_correlation(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut va = 0.0;
    let mut vb = 0.0;
    for (&x, &y) in a.iter().zip(b) {
        cov += (x - ma) * (y - mb);
        va += (x - ma).powi(2);
        vb += (y - mb).powi(2);
    }
    cov / (va * vb).sqrt().max(1e-300)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normal_ci_covers_mean() {
        let xs: Vec<f64> = (0..200).map(|i| (i % 7) as f64).collect();
        let s = summarize(&xs);
        assert!(s.ci95.0 < s.mean && s.mean < s.ci95.1);
        assert!(s.se > 0.0);
    }

    #[test]
    fn bootstrap_kicks_in_below_fifty() {
        let xs: Vec<f64> = (0..20).map(|i| i as f64).collect();
        let a = summarize(&xs);
        let b = summarize(&xs);
        assert_eq!(a.ci95, b.ci95, "bootstrap must be deterministic");
        assert!(a.ci95.0 < a.mean && a.mean < a.ci95.1);
    }

    #[test]
    fn ratio_estimator_recovers_constant_ratio() {
        let den: Vec<f64> = (1..300).map(|i| 1.0 + (i % 5) as f64).collect();
        let num: Vec<f64> = den.iter().map(|d| 2.5 * d).collect();
        let (r, se) = ratio_estimate(&num, &den);
        assert!((r - 2.5).abs() < 1e-12);
        assert!(se < 1e-12);
    }

    #[test]
    fn correlation_of_identical_series_is_one() {
        let a: Vec<f64> = (0..50).map(|i| i as f64).collect();
        assert!((pearson_correlation(&a, &a) - 1.0).abs() < 1e-12);
    }
}
