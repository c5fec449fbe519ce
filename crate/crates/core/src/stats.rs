//! Small statistics helpers shared by the Monte-Carlo checks.

use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Sum after sorting, so the result does not depend on input order.
pub fn order_free_sum(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v.iter().sum()
}

/// Sample mean and standard error of the mean (n - 1 denominator).
/// Insensitive to the order of `values`.
pub fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = order_free_sum(values) / n as f64;
    if n < 2 {
        return (mean, f64::NAN);
    }
    let sq: Vec<f64> = values.iter().map(|v| (v - mean) * (v - mean)).collect();
    let var = order_free_sum(&sq) / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// Sample variance with the n - 1 denominator.
pub fn sample_variance(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = order_free_sum(values) / n;
    let sq: Vec<f64> = values.iter().map(|v| (v - mean) * (v - mean)).collect();
    order_free_sum(&sq) / (n - 1.0)
}

/// Sample covariance of paired values together with its standard error,
/// estimated from the spread of the centred products.
pub fn covariance_with_se(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len().min(y.len());
    let mx = order_free_sum(&x[..n]) / n as f64;
    let my = order_free_sum(&y[..n]) / n as f64;
    let prods: Vec<f64> = x[..n]
        .iter()
        .zip(&y[..n])
        .map(|(a, b)| (a - mx) * (b - my))
        .collect();
    let (m, se) = mean_and_se(&prods);
    (m * n as f64 / (n as f64 - 1.0), se)
}

/// Upper tail probability of a chi-square statistic. Zero degrees of
/// freedom means a single cell, which cannot disagree: p = 1.
pub fn chi_square_sf(stat: f64, df: usize) -> f64 {
    if df == 0 {
        return 1.0;
    }
    let dist = ChiSquared::new(df as f64).expect("df > 0");
    dist.sf(stat).clamp(0.0, 1.0)
}

/// Poisson probabilities `P(N = k)` for `k < len`, computed by recurrence.
pub fn poisson_pmf(mean: f64, len: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(len);
    let mut p = (-mean).exp();
    for k in 0..len {
        if k > 0 {
            p *= mean / k as f64;
        }
        out.push(p);
    }
    out
}

/// Smallest `k` with `P(Poisson(mean) <= k) >= level`.
pub fn poisson_quantile(mean: f64, level: f64) -> u64 {
    let mut p = (-mean).exp();
    let mut cdf = p;
    let mut k = 0u64;
    while cdf < level && k < 100_000 {
        k += 1;
        p *= mean / k as f64;
        cdf += p;
    }
    k
}

/// `P(Poisson(mean) > k)`, summed from the upper tail for accuracy.
pub fn poisson_upper_tail(mean: f64, k: u64) -> f64 {
    let mut p = (-mean).exp();
    for j in 1..=k + 1 {
        p *= mean / j as f64;
    }
    let mut total = 0.0;
    let mut j = k + 1;
    while (j as f64) <= mean || p > total * 1e-17 {
        total += p;
        j += 1;
        p *= mean / j as f64;
    }
    total
}

/// Chi-square test of homogeneity between two samples of counts. Cells are
/// merged from the upper end until every expected frequency is at least 5.
pub fn two_sample_count_test(a: &[u64], b: &[u64]) -> f64 {
    let top = a.iter().chain(b).copied().max().unwrap_or(0) as usize;
    let mut ha = vec![0f64; top + 1];
    let mut hb = vec![0f64; top + 1];
    for &c in a {
        ha[c as usize] += 1.0;
    }
    for &c in b {
        hb[c as usize] += 1.0;
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let n = na + nb;
    let min_share = |cell: f64| cell * na.min(nb) / n;
    // merge cells left to right, then fold a short last cell backwards
    let mut cells: Vec<(f64, f64)> = Vec::new();
    let mut acc = (0.0, 0.0);
    for k in 0..=top {
        acc.0 += ha[k];
        acc.1 += hb[k];
        if min_share(acc.0 + acc.1) >= 5.0 {
            cells.push(acc);
            acc = (0.0, 0.0);
        }
    }
    if acc.0 + acc.1 > 0.0 {
        match cells.last_mut() {
            Some(last) => {
                last.0 += acc.0;
                last.1 += acc.1;
            }
            None => cells.push(acc),
        }
    }
    if cells.len() < 2 {
        return 1.0;
    }
    let stat: f64 = cells
        .iter()
        .map(|&(oa, ob)| {
            let tot = oa + ob;
            let ea = tot * na / n;
            let eb = tot * nb / n;
            (oa - ea).powi(2) / ea + (ob - eb).powi(2) / eb
        })
        .sum();
    chi_square_sf(stat, cells.len() - 1)
}
