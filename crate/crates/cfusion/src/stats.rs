//! Goodness-of-fit tests and summary statistics used by the harness and the
//! test suites.

/// Survival function of the Kolmogorov distribution, `P(K > x)`.
pub fn kolmogorov_sf(x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    if x < 1.18 {
        // theta-function form converges fast for small x
        let y = (-std::f64::consts::PI.powi(2) / (8.0 * x * x)).exp();
        let pre = (2.0 * std::f64::consts::PI).sqrt() / x;
        let s: f64 = (1..=7).map(|k| y.powi((2 * k - 1) * (2 * k - 1))).sum();
        return (1.0 - pre * s).clamp(0.0, 1.0);
    }
    let s: f64 = (1..=50).map(|k| {
        let k = k as f64;
        let sign = if k as u64 % 2 == 1 { 1.0 } else { -1.0 };
        sign * (-2.0 * k * k * x * x).exp()
    }).sum();
    (2.0 * s).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
}

/// One-sample Kolmogorov–Smirnov test against `cdf`, with Stephens'
/// small-sample correction of the asymptotic p-value.
pub fn ks_one_sample<F: Fn(f64) -> f64>(sample: &[f64], cdf: F) -> KsResult {
    let mut x = sample.to_vec();
    x.sort_by(f64::total_cmp);
    let n = x.len() as f64;
    let mut d = 0.0f64;
    for (i, v) in x.iter().enumerate() {
        let f = cdf(*v);
        d = d.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n);
    }
    let en = n.sqrt();
    KsResult { statistic: d, p_value: kolmogorov_sf((en + 0.12 + 0.11 / en) * d) }
}

pub fn ks_two_sample(a: &[f64], b: &[f64]) -> KsResult {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < a.len() && j < b.len() {
        let v = a[i].min(b[j]);
        while i < a.len() && a[i] <= v {
            i += 1;
        }
        while j < b.len() && b[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    let en = (na * nb / (na + nb)).sqrt();
    KsResult { statistic: d, p_value: kolmogorov_sf((en + 0.12 + 0.11 / en) * d) }
}

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Unbiased sample variance.
pub fn variance(x: &[f64]) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (x.len() as f64 - 1.0)
}

pub fn covariance(x: &[f64], y: &[f64]) -> f64 {
    let (mx, my) = (mean(x), mean(y));
    x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum::<f64>() / (x.len() as f64 - 1.0)
}

/// Standard error of the sample covariance of i.i.d. pairs, from the
/// variance of the centred products. With `x = y` this covers the variance.
pub fn covariance_se(x: &[f64], y: &[f64]) -> f64 {
    let (mx, my) = (mean(x), mean(y));
    let prods: Vec<f64> = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).collect();
    (variance(&prods) / x.len() as f64).sqrt()
}

pub fn lag_autocorrelation(x: &[f64], lag: usize) -> f64 {
    let m = mean(x);
    let c0: f64 = x.iter().map(|v| (v - m) * (v - m)).sum();
    if c0 == 0.0 {
        return 1.0;
    }
    x.iter().zip(&x[lag..]).map(|(a, b)| (a - m) * (b - m)).sum::<f64>() / c0
}

/// Effective sample size of a scalar chain by Geyer's initial positive
/// sequence. Never below 1.
pub fn ess_scalar(x: &[f64]) -> f64 {
    let n = x.len();
    let m = mean(x);
    let c0: f64 = x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n as f64;
    if c0 <= 0.0 || n < 4 {
        return 1.0;
    }
    let rho = |k: usize| x.iter().zip(&x[k..]).map(|(a, b)| (a - m) * (b - m)).sum::<f64>() / (n as f64 * c0);
    let mut tau = -1.0;
    let mut k = 0;
    while k + 1 < n {
        let pair = if k == 0 { 1.0 } else { rho(k) } + rho(k + 1);
        if pair <= 0.0 {
            break;
        }
        tau += 2.0 * pair;
        k += 2;
    }
    (n as f64 / tau.max(1e-12)).clamp(1.0, n as f64)
}

/// Average per-coordinate ESS of a chain of vectors.
pub fn ess(chain: &[Vec<f64>]) -> f64 {
    let d = chain.first().map_or(0, Vec::len);
    if d == 0 {
        return 0.0;
    }
    (0..d)
        .map(|k| ess_scalar(&chain.iter().map(|v| v[k]).collect::<Vec<_>>()))
        .sum::<f64>()
        / d as f64
}

/// Empirical quantile by linear interpolation between order statistics.
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kolmogorov_branches_agree() {
        for x in [1.1, 1.15, 1.18, 1.2, 1.25] {
            let y = (-std::f64::consts::PI.powi(2) / (8.0 * x * x)).exp();
            let pre = (2.0 * std::f64::consts::PI).sqrt() / x;
            let small = 1.0 - pre * (1..=7).map(|k| y.powi((2 * k - 1) * (2 * k - 1))).sum::<f64>();
            let big = 2.0 * (1..=50).map(|k| (-1f64).powi(k - 1) * (-2.0 * (k * k) as f64 * x * x).exp()).sum::<f64>();
            assert!((small - big).abs() < 1e-12);
        }
        // 5% critical value
        assert!((kolmogorov_sf(1.3581) - 0.05).abs() < 1e-4);
    }

    #[test]
    fn constant_chain_floors_at_one() {
        assert_eq!(ess_scalar(&[2.0; 500]), 1.0);
    }
}
