//! Small empirical-statistics helpers shared by the estimators.

use std::cmp::Ordering;

/// Inverse empirical cdf of an ascending-sorted slice: the smallest order
/// statistic `x_(k)` with `k/n >= p`, i.e. `k = max(1, ceil(n p))`.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    sorted[quantile_index(sorted.len(), p)]
}

/// Zero-based index of the type-1 (inverse ecdf) quantile.
pub fn quantile_index(n: usize, p: f64) -> usize {
    let k = (p * n as f64).ceil() as usize;
    k.clamp(1, n) - 1
}

/// Type-1 quantile of unsorted data in expected linear time.
pub fn quantile_unsorted(data: &[f64], p: f64) -> f64 {
    let mut buf = data.to_vec();
    let idx = quantile_index(buf.len(), p);
    let (_, v, _) = buf.select_nth_unstable_by(idx, f64::total_cmp);
    *v
}

pub fn mean(data: &[f64]) -> f64 {
    data.iter().sum::<f64>() / data.len() as f64
}

/// Ranks `1..=n` with ties replaced by their average rank.
pub fn average_ranks(data: &[f64]) -> Vec<f64> {
    let n = data.len();
    let mut keyed: Vec<(f64, usize)> = data.iter().copied().zip(0..n).collect();
    keyed.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i + 1;
        while j < n && keyed[j].0.total_cmp(&keyed[i].0) == Ordering::Equal {
            j += 1;
        }
        // positions i..j (zero-based) share ranks i+1..=j
        let avg = (i + 1 + j) as f64 / 2.0;
        for &(_, k) in &keyed[i..j] {
            ranks[k] = avg;
        }
        i = j;
    }
    ranks
}

/// Ordinary least squares of `y` on `x`, returning `(slope, intercept)`.
pub fn ols(x: &[f64], y: &[f64]) -> (f64, f64) {
    let mx = mean(x);
    let my = mean(y);
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// Kolmogorov–Smirnov statistic of a sample against a continuous cdf.
pub fn ks_statistic(sample: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut s = sample.to_vec();
    s.sort_unstable_by(f64::total_cmp);
    let n = s.len() as f64;
    s.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max)
}

/// Two-sample Kolmogorov–Smirnov statistic.
pub fn ks_two_sample_statistic(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_unstable_by(f64::total_cmp);
    b.sort_unstable_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// Asymptotic p-value of a KS statistic `d` with effective sample size `ne`.
pub fn ks_pvalue(d: f64, ne: f64) -> f64 {
    let sq = ne.sqrt();
    let lambda = (sq + 0.12 + 0.11 / sq) * d;
    kolmogorov_sf(lambda)
}

/// `Pr{K > λ}` for the Kolmogorov distribution.
pub fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for k in 1..=100 {
        let term = (-2.0 * (k as f64 * lambda).powi(2)).exp();
        sum += sign * term;
        if term < 1e-16 {
            break;
        }
        sign = -sign;
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_of_three() {
        assert_eq!(quantile_sorted(&[1.0, 2.0, 3.0], 0.5), 2.0);
        assert_eq!(quantile_unsorted(&[3.0, 1.0, 2.0], 0.5), 2.0);
        assert_eq!(quantile_sorted(&[1.0, 2.0, 3.0], 0.0), 1.0);
        assert_eq!(quantile_sorted(&[1.0, 2.0, 3.0], 1.0), 3.0);
    }

    #[test]
    fn ties_get_average_rank() {
        let r = average_ranks(&[10.0, 20.0, 10.0, 30.0]);
        assert_eq!(r, vec![1.5, 3.0, 1.5, 4.0]);
    }

    #[test]
    fn ols_exact_line() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y: Vec<f64> = x.iter().map(|v| 2.5 * v - 1.0).collect();
        let (s, c) = ols(&x, &y);
        assert!((s - 2.5).abs() < 1e-12 && (c + 1.0).abs() < 1e-12);
    }

    #[test]
    fn kolmogorov_reference_points() {
        // Pr{K > 1.36} ≈ 0.049, Pr{K > 1.63} ≈ 0.010
        assert!((kolmogorov_sf(1.36) - 0.0494).abs() < 1e-3);
        assert!((kolmogorov_sf(1.63) - 0.0098).abs() < 1e-3);
    }

    #[test]
    fn two_sample_identical_is_zero() {
        let a = [0.3, 0.1, 0.2];
        assert_eq!(ks_two_sample_statistic(&a, &a), 0.0);
    }
}
