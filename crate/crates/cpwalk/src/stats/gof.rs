//! Goodness-of-fit machinery: Kolmogorov–Smirnov tests, chi-square fits on
//! integer counts, a least-squares line for tail plots, and the closed-form
//! Cramér rate of a homogeneous ±1 compound-Poisson walk.

use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Complementary CDF of the Kolmogorov distribution.
fn kolmogorov_sf(x: f64) -> f64 {
    if x < 1e-3 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..200 {
        let term = (-2.0 * (k as f64 * x).powi(2)).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-14 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

fn ks_p_from_d(d: f64, n_eff: f64) -> f64 {
    let s = n_eff.sqrt();
    kolmogorov_sf((s + 0.12 + 0.11 / s) * d)
}

#[derive(Clone, Copy, Debug, serde::Serialize)]
pub struct KsReport {
    pub d: f64,
    pub p_value: f64,
    pub n: u64,
}

/// One-sample KS test of `xs` against the continuous CDF `cdf`.
pub fn ks_one_sample<F: Fn(f64) -> f64>(xs: &[f64], cdf: F) -> KsReport {
    assert!(!xs.is_empty());
    let mut sorted = xs.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = sorted.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in sorted.iter().enumerate() {
        let f = cdf(x);
        d = d.max(f - i as f64 / n).max((i + 1) as f64 / n - f);
    }
    KsReport {
        d,
        p_value: ks_p_from_d(d, n),
        n: sorted.len() as u64,
    }
}

/// Two-sample KS test.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> KsReport {
    assert!(!a.is_empty() && !b.is_empty());
    let mut sa = a.to_vec();
    let mut sb = b.to_vec();
    sa.sort_by(|x, y| x.partial_cmp(y).unwrap());
    sb.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let (n, m) = (sa.len(), sb.len());
    let mut i = 0;
    let mut j = 0;
    let mut d: f64 = 0.0;
    while i < n && j < m {
        let x = sa[i].min(sb[j]);
        while i < n && sa[i] <= x {
            i += 1;
        }
        while j < m && sb[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / n as f64 - j as f64 / m as f64).abs());
    }
    let n_eff = (n * m) as f64 / (n + m) as f64;
    KsReport {
        d,
        p_value: ks_p_from_d(d, n_eff),
        n: n_eff as u64,
    }
}

pub fn std_normal_cdf(x: f64) -> f64 {
    0.5 * (1.0 + erf(x / std::f64::consts::SQRT_2))
}

// Abramowitz–Stegun 7.1.26, |error| < 1.5e-7; plenty for KS distances.
fn erf(x: f64) -> f64 {
    let sign = x.signum();
    let x = x.abs();
    let t = 1.0 / (1.0 + 0.3275911 * x);
    let y = 1.0
        - (((((1.061405429 * t - 1.453152027) * t) + 1.421413741) * t - 0.284496736) * t
            + 0.254829592)
            * t
            * (-x * x).exp();
    sign * y
}

pub fn exponential_cdf(rate: f64) -> impl Fn(f64) -> f64 {
    move |x| if x <= 0.0 { 0.0 } else { 1.0 - (-rate * x).exp() }
}

#[derive(Clone, Debug, serde::Serialize)]
pub struct ChiSquareReport {
    pub chi2: f64,
    pub df: u64,
    pub p_value: f64,
    pub bins: u64,
}

/// Chi-square fit of an integer sample against a pmf on `min_value..`.
/// Adjacent values are pooled until each bin expects at least five counts;
/// the right tail is pooled into the last bin. `fitted_params` reduces the
/// degrees of freedom.
pub fn chi_square_fit<F: Fn(u64) -> f64>(
    sample: &[u64],
    min_value: u64,
    pmf: F,
    fitted_params: u64,
) -> ChiSquareReport {
    assert!(!sample.is_empty());
    let n = sample.len() as f64;
    let max_obs = *sample.iter().max().unwrap();
    let mut counts = vec![0u64; (max_obs - min_value + 1) as usize];
    for &x in sample {
        counts[(x.max(min_value) - min_value) as usize] += 1;
    }
    // walk the support, pooling until expected mass reaches 5
    let mut edges: Vec<(f64, u64)> = Vec::new(); // (expected, observed) per bin
    let mut exp_acc = 0.0;
    let mut obs_acc = 0u64;
    let mut cum = 0.0;
    let mut v = min_value;
    loop {
        let p = pmf(v);
        cum += p;
        exp_acc += n * p;
        obs_acc += counts.get((v - min_value) as usize).copied().unwrap_or(0);
        if exp_acc >= 5.0 {
            edges.push((exp_acc, obs_acc));
            exp_acc = 0.0;
            obs_acc = 0;
        }
        if v >= max_obs && 1.0 - cum < 1e-9 {
            break;
        }
        if 1.0 - cum < 1e-12 && v >= max_obs {
            break;
        }
        v += 1;
        if v > max_obs + 10_000 {
            break;
        }
    }
    // remaining tail mass and observations go to the last bin
    let tail_exp = exp_acc + n * (1.0 - cum).max(0.0);
    if tail_exp > 0.0 || obs_acc > 0 {
        if let Some(last) = edges.last_mut() {
            last.0 += tail_exp;
            last.1 += obs_acc;
        } else {
            edges.push((tail_exp.max(1e-12), obs_acc));
        }
    }
    let chi2: f64 = edges
        .iter()
        .map(|&(e, o)| (o as f64 - e).powi(2) / e)
        .sum();
    let df = (edges.len() as u64).saturating_sub(1 + fitted_params).max(1);
    let p_value = 1.0 - ChiSquared::new(df as f64).unwrap().cdf(chi2);
    ChiSquareReport {
        chi2,
        df,
        p_value,
        bins: edges.len() as u64,
    }
}

/// Fit `GEO(kappa)` on `{1, 2, ...}` by maximum likelihood and test the fit.
pub fn geometric_fit(ks: &[u64]) -> (f64, ChiSquareReport) {
    assert!(!ks.is_empty());
    let mean = ks.iter().sum::<u64>() as f64 / ks.len() as f64;
    let kappa = 1.0 / mean;
    let report = chi_square_fit(
        ks,
        1,
        |k| kappa * (1.0 - kappa).powi(k as i32 - 1),
        1,
    );
    (kappa, report)
}

/// Cramér rate function of `W_t`, a compound Poisson process with rate
/// `gamma` and ±1 jumps with up-probability `p_up`, at empirical speed `x`.
pub fn cramer_rate_pm1(gamma: f64, p_up: f64, x: f64) -> f64 {
    let q = 1.0 - p_up;
    if p_up <= 0.0 || q <= 0.0 {
        return f64::INFINITY;
    }
    let r = x / gamma;
    let u = (r + (r * r + 4.0 * p_up * q).sqrt()) / (2.0 * p_up);
    let theta = u.ln();
    theta * x - gamma * (p_up * u + q / u - 1.0)
}

/// Least-squares line through `(x, y)` pairs, with its coefficient of
/// determination.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    assert_eq!(xs.len(), ys.len());
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (&x, &y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx).powi(2);
        syy += (y - my).powi(2);
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    (slope, intercept, r2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn ks_accepts_its_own_distribution() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let xs: Vec<f64> = (0..800).map(|_| -(1.0 - rng.gen::<f64>()).ln() / 2.0).collect();
        let r = ks_one_sample(&xs, exponential_cdf(2.0));
        assert!(r.p_value > 0.01, "p = {}", r.p_value);
        let bad = ks_one_sample(&xs, exponential_cdf(3.0));
        assert!(bad.p_value < 0.01, "p = {}", bad.p_value);
    }

    #[test]
    fn two_sample_ks_separates_shifted_samples() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a: Vec<f64> = (0..500).map(|_| rng.gen::<f64>()).collect();
        let b: Vec<f64> = (0..400).map(|_| rng.gen::<f64>()).collect();
        let c: Vec<f64> = (0..400).map(|_| rng.gen::<f64>() + 0.2).collect();
        assert!(ks_two_sample(&a, &b).p_value > 0.01);
        assert!(ks_two_sample(&a, &c).p_value < 1e-6);
    }

    #[test]
    fn chi_square_accepts_exact_geometric() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let kappa = 0.35;
        let ks: Vec<u64> = (0..1500)
            .map(|_| {
                let mut k = 1;
                while rng.gen::<f64>() > kappa {
                    k += 1;
                }
                k
            })
            .collect();
        let (fit, report) = geometric_fit(&ks);
        assert!((fit - kappa).abs() < 0.05, "fit {fit}");
        assert!(report.p_value > 0.01, "{report:?}");
    }

    #[test]
    fn cramer_rate_zero_at_mean_and_positive_away() {
        let v = 1.0 * (0.7 - 0.3); // gamma (p - q)
        assert!(cramer_rate_pm1(1.0, 0.7, v).abs() < 1e-12);
        assert!(cramer_rate_pm1(1.0, 0.7, v + 0.3) > 0.0);
        assert!(cramer_rate_pm1(1.0, 0.7, v - 0.3) > 0.0);
        // symmetric walk: I(x) = I(-x)
        let i1 = cramer_rate_pm1(2.0, 0.5, 0.8);
        let i2 = cramer_rate_pm1(2.0, 0.5, -0.8);
        assert!((i1 - i2).abs() < 1e-12);
    }

    #[test]
    fn linear_fit_recovers_line() {
        let xs: Vec<f64> = (0..20).map(|i| i as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 - 0.5 * x).collect();
        let (slope, intercept, r2) = linear_fit(&xs, &ys);
        assert!((slope + 0.5).abs() < 1e-12);
        assert!((intercept - 3.0).abs() < 1e-12);
        assert!((r2 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn std_normal_cdf_values() {
        assert!((std_normal_cdf(0.0) - 0.5).abs() < 1e-9);
        assert!((std_normal_cdf(1.96) - 0.975).abs() < 1e-4);
    }
}
