//! Digamma and its first three derivatives, plus a few numerically stable
//! helpers used by the densities.
//!
//! Polygamma values are computed by upward recurrence to `x >= 12` followed by
//! the Bernoulli asymptotic expansion. Absolute error is below 1e-10 for
//! every `x > 0` that is representable without overflow of `x^-(n+1)`.

pub use statrs::function::gamma::ln_gamma;

const SHIFT: f64 = 12.0;

// B_2, B_4, ..., B_16
const BERNOULLI: [f64; 8] = [
    1.0 / 6.0,
    -1.0 / 30.0,
    1.0 / 42.0,
    -1.0 / 30.0,
    5.0 / 66.0,
    -691.0 / 2730.0,
    7.0 / 6.0,
    -3617.0 / 510.0,
];

fn factorial(n: u32) -> f64 {
    (1..=n).fold(1.0, |acc, k| acc * k as f64)
}

/// `n`-th derivative of the digamma function, `n <= 3`.
pub fn polygamma(n: u32, x: f64) -> f64 {
    assert!(n <= 3, "polygamma order {n} not supported");
    if !(x > 0.0) {
        return f64::NAN;
    }
    let sign = if n % 2 == 0 { -1.0 } else { 1.0 };
    let nfact = factorial(n);
    let mut acc = 0.0;
    let mut z = x;
    // psi^(n)(z) = psi^(n)(z + 1) - (-1)^n n! / z^(n+1)
    while z < SHIFT {
        acc += sign * nfact / z.powi(n as i32 + 1);
        z += 1.0;
    }
    acc + asymptotic(n, z)
}

fn asymptotic(n: u32, z: f64) -> f64 {
    let inv = 1.0 / z;
    let inv2 = inv * inv;
    if n == 0 {
        let mut s = 0.0;
        let mut p = inv2;
        for (k, b) in BERNOULLI.iter().enumerate() {
            let two_k = 2.0 * (k as f64 + 1.0);
            s += b / (two_k * 1.0) * p;
            p *= inv2;
        }
        return z.ln() - 0.5 * inv - s;
    }
    // (-1)^(n+1) [ (n-1)!/z^n + n!/(2 z^(n+1)) + sum_k B_2k (2k+n-1)!/((2k)! z^(2k+n)) ]
    let nf = n as i32;
    let mut s = factorial(n - 1) * inv.powi(nf) + 0.5 * factorial(n) * inv.powi(nf + 1);
    for (k, b) in BERNOULLI.iter().enumerate() {
        let two_k = 2 * (k as u32 + 1);
        s += b * factorial(two_k + n - 1) / factorial(two_k) * inv.powi(two_k as i32 + nf);
    }
    if n % 2 == 1 {
        s
    } else {
        -s
    }
}

pub fn digamma(x: f64) -> f64 {
    polygamma(0, x)
}

pub fn trigamma(x: f64) -> f64 {
    polygamma(1, x)
}

/// `ln(1 + e^z)` without overflow.
pub fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// Logistic function `1 / (1 + e^-z)`.
pub fn logistic(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `ln(sum exp(v))` over a slice.
pub fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// `ln I₀(x)` for `x >= 0`: power series below 30, the large-argument
/// expansion above (both accurate to a few ulps there).
pub fn log_bessel_i0(x: f64) -> f64 {
    let x = x.abs();
    if x < 30.0 {
        let q = 0.25 * x * x;
        let mut term = 1.0;
        let mut sum = 1.0;
        let mut k = 1.0;
        while term > 1e-17 * sum {
            term *= q / (k * k);
            sum += term;
            k += 1.0;
        }
        return sum.ln();
    }
    // e^x / sqrt(2πx) Σ ((2k−1)!!)² / (k! (8x)^k)
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..40 {
        let kf = k as f64;
        term *= (2.0 * kf - 1.0) * (2.0 * kf - 1.0) / (kf * 8.0 * x);
        sum += term;
        if term < 1e-17 * sum {
            break;
        }
    }
    x - 0.5 * (2.0 * std::f64::consts::PI * x).ln() + sum.ln()
}
