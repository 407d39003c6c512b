//! von Mises–Fisher sampling and normalising constants on unit spheres.

use rand::{Rng, RngCore};
use rand_distr::{Beta, Distribution, StandardNormal};

use crate::quadrature::integrate_scalar;
use crate::special::{ln_gamma, log_bessel_i0};

/// Draw a unit vector from vMF(`mu`, `kappa`) on the sphere in `ℝ^p`,
/// `p = mu.len() >= 2`. `mu` must be a unit vector.
pub fn sample_vmf(mu: &[f64], kappa: f64, rng: &mut dyn RngCore, out: &mut [f64]) {
    let p = mu.len();
    let w = sample_cosine(p, kappa, rng);
    // tangent direction uniform on the sphere orthogonal to e1
    let mut tangent = vec![0.0; p - 1];
    let mut norm: f64 = 0.0;
    while norm < 1e-300 {
        norm = 0.0;
        for v in tangent.iter_mut() {
            *v = StandardNormal.sample(rng);
            norm += *v * *v;
        }
    }
    let norm = norm.sqrt();
    let s = (1.0 - w * w).max(0.0).sqrt();
    out[0] = w;
    for i in 1..p {
        out[i] = s * tangent[i - 1] / norm;
    }
    reflect_e1_to(mu, out);
}

/// Apply the Householder reflection that swaps `e1` and the unit vector `mu`.
fn reflect_e1_to(mu: &[f64], x: &mut [f64]) {
    let p = mu.len();
    let mut v: Vec<f64> = mu.iter().map(|m| -m).collect();
    v[0] += 1.0;
    let vv: f64 = v.iter().map(|a| a * a).sum();
    if vv < 1e-30 {
        return;
    }
    let dot: f64 = v.iter().zip(x.iter()).map(|(a, b)| a * b).sum();
    let f = 2.0 * dot / vv;
    for i in 0..p {
        x[i] -= f * v[i];
    }
}

/// Cosine `⟨x, mu⟩` of a vMF draw.
pub fn sample_cosine(p: usize, kappa: f64, rng: &mut dyn RngCore) -> f64 {
    if p == 3 {
        let u: f64 = rng.random();
        if kappa < 1e-12 {
            return 2.0 * u - 1.0;
        }
        // inverse CDF of the density ∝ e^{κw} on [−1, 1]
        let w = 1.0 + ((1.0 - u) * (-2.0 * kappa).exp_m1()).ln_1p() / kappa;
        return w.clamp(-1.0, 1.0);
    }
    let d = (p - 1) as f64;
    let half = 0.5 * d;
    let beta = Beta::new(half, half).unwrap();
    if kappa < 1e-12 {
        return 1.0 - 2.0 * beta.sample(rng);
    }
    // envelope rejection with a transformed beta proposal
    let b = d / (2.0 * kappa + (4.0 * kappa * kappa + d * d).sqrt());
    let x0 = (1.0 - b) / (1.0 + b);
    let c = kappa * x0 + d * (1.0 - x0 * x0).ln();
    loop {
        let z: f64 = beta.sample(rng);
        let w = (1.0 - (1.0 + b) * z) / (1.0 - (1.0 - b) * z);
        let u: f64 = rng.random();
        if kappa * w + d * (1.0 - x0 * w).ln() - c >= u.ln() {
            return w;
        }
    }
}

/// Surface area of the unit sphere in `ℝ^p`, as a logarithm.
pub fn log_sphere_area(p: usize) -> f64 {
    let h = 0.5 * p as f64;
    (2.0f64).ln() + h * std::f64::consts::PI.ln() - ln_gamma(h)
}

/// `ln ∫_{S^{p−1}} exp(κ ⟨θ, e1⟩) dθ`, the log reciprocal of the vMF
/// normalising constant.
pub fn log_vmf_partition(p: usize, kappa: f64) -> f64 {
    assert!(p >= 2);
    if kappa == 0.0 {
        return log_sphere_area(p);
    }
    if p == 2 {
        return (2.0 * std::f64::consts::PI).ln() + log_bessel_i0(kappa);
    }
    if p == 3 {
        // 4π sinh(κ)/κ
        let k = kappa;
        return (4.0 * std::f64::consts::PI).ln() + k + (-(-2.0 * k).exp_m1()).ln() - (2.0 * k).ln();
    }
    // ∫_{S^{p−1}} = |S^{p−2}| ∫_0^π e^{κ cos φ} sin^{p−2} φ dφ
    let m = (p - 2) as f64;
    let log_g = |phi: f64| -2.0 * kappa * (0.5 * phi).sin().powi(2) + if m > 0.0 { m * phi.sin().ln() } else { 0.0 };
    // peak of the integrand
    let cpk = if m == 0.0 { 1.0 } else { (-m + (m * m + 4.0 * kappa * kappa).sqrt()) / (2.0 * kappa) };
    let phi_pk = cpk.clamp(-1.0, 1.0).acos();
    let peak = if phi_pk > 0.0 { log_g(phi_pk) } else { 0.0 };
    // beyond this angle the integrand is below e^{-60} of its peak
    let mut cut = std::f64::consts::PI;
    let one_minus = (60.0 + peak.abs() + m) / kappa;
    if one_minus < 2.0 {
        cut = (1.0 - one_minus).acos().max(phi_pk);
        while cut < std::f64::consts::PI && log_g(cut) - peak > -60.0 {
            cut = (cut * 1.5).min(std::f64::consts::PI);
        }
    }
    let v = integrate_scalar(|phi| (log_g(phi) - peak).exp(), 0.0, cut, 1e-13).unwrap_or(f64::NAN);
    log_sphere_area(p - 1) + kappa + peak + v.ln()
}

/// vMF log-density at unit vector `x` with respect to surface measure.
pub fn vmf_log_density(x: &[f64], mu: &[f64], kappa: f64) -> f64 {
    let dot: f64 = x.iter().zip(mu).map(|(a, b)| a * b).sum();
    kappa * dot - log_vmf_partition(mu.len(), kappa)
}
