//! Small statistical toolkit for the checks: two-sample tests, combination of
//! p-values, and bootstrap intervals.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Unbiased sample variance.
pub fn variance(x: &[f64]) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (x.len() as f64 - 1.0)
}

/// Pearson correlation.
pub fn correlation(x: &[f64], y: &[f64]) -> f64 {
    let (mx, my) = (mean(x), mean(y));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx).powi(2);
        syy += (b - my).powi(2);
    }
    sxy / (sxx * syy).sqrt()
}

/// Kendall's tau-a between the sequence and its index; negative for a decreasing trend.
pub fn kendall_trend(x: &[f64]) -> f64 {
    let n = x.len();
    let mut s = 0i64;
    for i in 0..n {
        for j in i + 1..n {
            s += match x[j].partial_cmp(&x[i]) {
                Some(std::cmp::Ordering::Greater) => 1,
                Some(std::cmp::Ordering::Less) => -1,
                _ => 0,
            };
        }
    }
    s as f64 / (n * (n - 1) / 2) as f64
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub statistic: f64,
    pub p_value: f64,
}

fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

fn energy_from_matrix(d: &[f64], n: usize, labels: &[bool]) -> f64 {
    // labels[i] = true for the first sample
    let total = labels.len();
    let (mut xy, mut xx, mut yy) = (0.0, 0.0, 0.0);
    for i in 0..total {
        let row = &d[i * total..(i + 1) * total];
        for j in i + 1..total {
            match (labels[i], labels[j]) {
                (true, true) => xx += row[j],
                (false, false) => yy += row[j],
                _ => xy += row[j],
            }
        }
    }
    let m = total - n;
    let (n, m) = (n as f64, m as f64);
    2.0 * xy / (n * m) - 2.0 * xx / (n * n) - 2.0 * yy / (m * m)
}

/// Energy-distance two-sample test with `permutations` label shuffles.
pub fn energy_test<R: Rng + ?Sized>(x: &[Vec<f64>], y: &[Vec<f64>], permutations: usize, rng: &mut R) -> TestResult {
    let pooled: Vec<&Vec<f64>> = x.iter().chain(y).collect();
    let total = pooled.len();
    let mut d = vec![0.0; total * total];
    for i in 0..total {
        for j in i + 1..total {
            let v = euclid(pooled[i], pooled[j]);
            d[i * total + j] = v;
            d[j * total + i] = v;
        }
    }
    let mut labels: Vec<bool> = (0..total).map(|i| i < x.len()).collect();
    let observed = energy_from_matrix(&d, x.len(), &labels);
    let mut exceed = 0;
    for _ in 0..permutations {
        labels.shuffle(rng);
        if energy_from_matrix(&d, x.len(), &labels) >= observed {
            exceed += 1;
        }
    }
    TestResult {
        statistic: observed,
        p_value: (1 + exceed) as f64 / (1 + permutations) as f64,
    }
}

/// Fisher's method for independent p-values.
pub fn fisher_combine(p: &[f64]) -> f64 {
    let stat: f64 = p.iter().map(|v| -2.0 * v.max(f64::MIN_POSITIVE).ln()).sum();
    let chi = ChiSquared::new(2.0 * p.len() as f64).expect("positive degrees of freedom");
    1.0 - chi.cdf(stat)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockedTest {
    pub blocks: Vec<TestResult>,
    pub combined_p: f64,
}

/// Energy tests on disjoint blocks of `block` points per sample, combined by Fisher's method.
pub fn blocked_energy_test<R: Rng + ?Sized>(
    x: &[Vec<f64>],
    y: &[Vec<f64>],
    block: usize,
    permutations: usize,
    rng: &mut R,
) -> BlockedTest {
    let blocks: Vec<TestResult> = x
        .chunks(block)
        .zip(y.chunks(block))
        .filter(|(a, b)| a.len() > 1 && b.len() > 1)
        .map(|(a, b)| energy_test(a, b, permutations, rng))
        .collect();
    let p: Vec<f64> = blocks.iter().map(|b| b.p_value).collect();
    BlockedTest {
        combined_p: fisher_combine(&p),
        blocks,
    }
}

/// Survival function of the Kolmogorov distribution.
pub fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut s = 0.0;
    for k in 1..=100 {
        let k = k as f64;
        let term = (-2.0 * k * k * lambda * lambda).exp();
        s += if k as i64 % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * s).clamp(0.0, 1.0)
}

/// One-sample Kolmogorov–Smirnov test against a continuous CDF.
pub fn ks_one_sample(data: &[f64], cdf: impl Fn(f64) -> f64) -> TestResult {
    let mut v = data.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    let d = v
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max);
    let sn = n.sqrt();
    TestResult {
        statistic: d,
        p_value: kolmogorov_sf((sn + 0.12 + 0.11 / sn) * d),
    }
}

/// Two-sample Kolmogorov–Smirnov test.
pub fn ks_two_sample(x: &[f64], y: &[f64]) -> TestResult {
    let mut a = x.to_vec();
    let mut b = y.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (n, m) = (a.len(), b.len());
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < n && j < m {
        let t = a[i].min(b[j]);
        while i < n && a[i] <= t {
            i += 1;
        }
        while j < m && b[j] <= t {
            j += 1;
        }
        d = d.max((i as f64 / n as f64 - j as f64 / m as f64).abs());
    }
    let ne = (n * m) as f64 / (n + m) as f64;
    let s = ne.sqrt();
    TestResult {
        statistic: d,
        p_value: kolmogorov_sf((s + 0.12 + 0.11 / s) * d),
    }
}

/// Moving-block bootstrap percentile interval for the mean of a dependent series.
pub fn block_bootstrap_ci<R: Rng + ?Sized>(x: &[f64], block: usize, resamples: usize, level: f64, rng: &mut R) -> (f64, f64) {
    let n = x.len();
    let block = block.clamp(1, n);
    let starts = n - block + 1;
    let mut means: Vec<f64> = (0..resamples)
        .map(|_| {
            let mut s = 0.0;
            let mut k = 0;
            while k < n {
                let st = rng.random_range(0..starts);
                for v in &x[st..(st + block).min(st + n - k)] {
                    s += v;
                    k += 1;
                }
            }
            s / n as f64
        })
        .collect();
    means.sort_by(f64::total_cmp);
    let q = |p: f64| means[((p * (resamples - 1) as f64).round() as usize).min(resamples - 1)];
    let a = (1.0 - level) / 2.0;
    (q(a), q(1.0 - a))
}

pub fn intervals_overlap(a: (f64, f64), b: (f64, f64)) -> bool {
    a.0 <= b.1 && b.0 <= a.1
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use rand_distr::{Distribution, Normal, StandardNormal};

    #[test]
    fn moments() {
        let x = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(mean(&x), 2.5);
        assert!((variance(&x) - 5.0 / 3.0).abs() < 1e-15);
        assert!((correlation(&x, &[2.0, 4.0, 6.0, 8.0]) - 1.0).abs() < 1e-15);
        assert_eq!(kendall_trend(&[4.0, 3.0, 2.0, 1.0]), -1.0);
    }

    #[test]
    fn kolmogorov_values() {
        // standard table: P(K > 1.36) ≈ 0.0494, P(K > 1.0) ≈ 0.2700
        assert!((kolmogorov_sf(1.36) - 0.0494).abs() < 5e-4);
        assert!((kolmogorov_sf(1.0) - 0.2700).abs() < 5e-4);
    }

    #[test]
    fn fisher_values() {
        assert!((fisher_combine(&[0.5]) - 0.5).abs() < 1e-12);
        // two p-values of 0.05: statistic 11.98 on 4 degrees of freedom
        assert!((fisher_combine(&[0.05, 0.05]) - 0.01747).abs() < 1e-4);
    }

    #[test]
    fn tests_detect_shift_and_accept_null() {
        let mut rng = stream(1, "stats");
        let n = Normal::new(0.0, 1.0).unwrap();
        let a: Vec<f64> = (0..400).map(|_| n.sample(&mut rng)).collect();
        let b: Vec<f64> = (0..400).map(|_| n.sample(&mut rng)).collect();
        let c: Vec<f64> = (0..400).map(|_| n.sample(&mut rng) + 0.5).collect();
        assert!(ks_two_sample(&a, &b).p_value > 0.01);
        assert!(ks_two_sample(&a, &c).p_value < 1e-4);
        assert!(ks_one_sample(&a, |x| 0.5 * (1.0 + statrs::function::erf::erf(x / 2f64.sqrt()))).p_value > 0.01);
        let v = |s: &[f64]| s.iter().map(|x| vec![*x]).collect::<Vec<_>>();
        assert!(energy_test(&v(&a[..200]), &v(&b[..200]), 99, &mut rng).p_value > 0.01);
        assert!(energy_test(&v(&a[..200]), &v(&c[..200]), 99, &mut rng).p_value <= 0.01);
        let bt = blocked_energy_test(&v(&a), &v(&b), 100, 49, &mut rng);
        assert_eq!(bt.blocks.len(), 4);
        assert!(bt.combined_p > 0.01);
    }

    #[test]
    fn bootstrap_covers_mean() {
        let mut rng = stream(2, "boot");
        let x: Vec<f64> = (0..2000).map(|_| StandardNormal.sample(&mut rng)).collect();
        let (lo, hi) = block_bootstrap_ci(&x, 20, 500, 0.95, &mut rng);
        assert!(lo < 0.0 && 0.0 < hi && hi - lo < 0.2);
        assert!(intervals_overlap((0.0, 1.0), (0.5, 2.0)));
        assert!(!intervals_overlap((0.0, 1.0), (1.5, 2.0)));
    }
}
