//! Component densities and their φ-function machinery.
//!
//! Each factor `f` of the product target exposes its log-density, the
//! gradient and Laplacian of the log-density, the drift floor `l` and bounds
//! on
//!
//! ```text
//! φ(u) = ½(‖∇log f(u)‖² + Δ log f(u)) − l  ≥ 0.
//! ```
//!
//! `l` is always the exact infimum of the first term, so φ touches zero.
//! Densities must satisfy the usual martingale regularity of the Langevin
//! bridge construction; this is assumed, not checked.

use std::fmt;

use rand::{Rng, RngCore};
use rand_distr::{Distribution, Gamma, StandardNormal, StudentT as StudentTDist};
use statrs::distribution::{ContinuousCDF, Normal, StudentsT};
use statrs::function::beta::beta_reg;

use crate::error::{Error, Result};
use crate::optim::nelder_mead;
use crate::special::{ln_gamma, logistic, polygamma, softplus};

/// One factor of the product density.
pub trait ComponentDensity: Send + Sync + fmt::Debug {
    fn dim(&self) -> usize;

    /// Normalised log-density.
    fn log_density(&self, u: &[f64]) -> f64;

    fn grad_log_density(&self, u: &[f64], grad: &mut [f64]);

    /// Laplacian of the log-density.
    fn div_grad(&self, u: &[f64]) -> f64;

    /// The constant `l` subtracted inside φ.
    fn drift_floor(&self) -> f64;

    /// Supremum of φ over the whole space when finite.
    fn phi_global_bound(&self) -> Option<f64>;

    /// Upper bound of φ over the box `[lower, upper]`.
    fn phi_interval_bound(&self, lower: &[f64], upper: &[f64]) -> f64;

    fn sample(&self, rng: &mut dyn RngCore, out: &mut [f64]);

    fn phi(&self, u: &[f64]) -> f64 {
        let mut g = vec![0.0; self.dim()];
        self.grad_log_density(u, &mut g);
        let sq: f64 = g.iter().map(|v| v * v).sum();
        (0.5 * (sq + self.div_grad(u)) - self.drift_floor()).max(0.0)
    }

    /// Per-coordinate mean and variance, when both are finite.
    fn moments(&self) -> Option<(Vec<f64>, Vec<f64>)> {
        None
    }

    /// Quantile of a one-dimensional density.
    fn quantile(&self, _p: f64) -> Option<f64> {
        None
    }
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::Parameter(format!("{name} must be positive and finite, got {v}")))
    }
}

/// Product of independent normals `N(mean_k, sd_k^2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Gaussian {
    mean: Vec<f64>,
    sd: Vec<f64>,
    log_norm: f64,
    floor: f64,
}

impl Gaussian {
    pub fn new(mean: f64, sd: f64) -> Result<Self> {
        Self::diagonal(vec![mean], vec![sd])
    }

    pub fn standard() -> Self {
        Self::new(0.0, 1.0).unwrap()
    }

    pub fn diagonal(mean: Vec<f64>, sd: Vec<f64>) -> Result<Self> {
        if mean.is_empty() || mean.len() != sd.len() {
            return Err(Error::Parameter("mean and sd must be non-empty and of equal length".into()));
        }
        for &s in &sd {
            check_positive("sd", s)?;
        }
        let log_norm = -sd
            .iter()
            .map(|s| s.ln() + 0.5 * (2.0 * std::f64::consts::PI).ln())
            .sum::<f64>();
        let floor = -0.5 * sd.iter().map(|s| 1.0 / (s * s)).sum::<f64>();
        Ok(Self { mean, sd, log_norm, floor })
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn sd(&self) -> &[f64] {
        &self.sd
    }
}

impl ComponentDensity for Gaussian {
    fn dim(&self) -> usize {
        self.mean.len()
    }

    fn log_density(&self, u: &[f64]) -> f64 {
        let q: f64 = u
            .iter()
            .zip(&self.mean)
            .zip(&self.sd)
            .map(|((x, m), s)| ((x - m) / s).powi(2))
            .sum();
        self.log_norm - 0.5 * q
    }

    fn grad_log_density(&self, u: &[f64], grad: &mut [f64]) {
        for k in 0..u.len() {
            grad[k] = -(u[k] - self.mean[k]) / (self.sd[k] * self.sd[k]);
        }
    }

    fn div_grad(&self, _u: &[f64]) -> f64 {
        2.0 * self.floor
    }

    fn drift_floor(&self) -> f64 {
        self.floor
    }

    fn phi_global_bound(&self) -> Option<f64> {
        None
    }

    fn phi(&self, u: &[f64]) -> f64 {
        u.iter()
            .zip(&self.mean)
            .zip(&self.sd)
            .map(|((x, m), s)| 0.5 * (x - m).powi(2) / s.powi(4))
            .sum()
    }

    fn phi_interval_bound(&self, lower: &[f64], upper: &[f64]) -> f64 {
        (0..self.mean.len())
            .map(|k| {
                let d = (lower[k] - self.mean[k]).abs().max((upper[k] - self.mean[k]).abs());
                0.5 * d * d / self.sd[k].powi(4)
            })
            .sum()
    }

    fn sample(&self, rng: &mut dyn RngCore, out: &mut [f64]) {
        for k in 0..self.mean.len() {
            let z: f64 = StandardNormal.sample(rng);
            out[k] = self.mean[k] + self.sd[k] * z;
        }
    }

    fn moments(&self) -> Option<(Vec<f64>, Vec<f64>)> {
        Some((self.mean.clone(), self.sd.iter().map(|s| s * s).collect()))
    }

    fn quantile(&self, p: f64) -> Option<f64> {
        if self.mean.len() != 1 {
            return None;
        }
        Normal::new(self.mean[0], self.sd[0]).ok().map(|n| n.inverse_cdf(p))
    }
}

/// Location-scale Student-T with density proportional to
/// `(1 + (x−μ)²/(νσ²))^(−(ν+1)/2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct StudentTParams {
    pub mu: f64,
    pub sigma: f64,
    pub nu: f64,
}

#[derive(Debug, Clone)]
pub struct StudentT {
    params: StudentTParams,
    // ν σ²
    s: f64,
    log_norm: f64,
    floor: f64,
    sup: f64,
    dist: StudentTDist<f64>,
}

impl StudentT {
    pub fn new(mu: f64, sigma: f64, nu: f64) -> Result<Self> {
        check_positive("sigma", sigma)?;
        check_positive("nu", nu)?;
        if !mu.is_finite() {
            return Err(Error::Parameter("mu must be finite".into()));
        }
        let s = nu * sigma * sigma;
        let log_norm = ln_gamma(0.5 * (nu + 1.0))
            - ln_gamma(0.5 * nu)
            - 0.5 * (nu * std::f64::consts::PI).ln()
            - sigma.ln();
        let floor = -(nu + 1.0) / (2.0 * s);
        let sup = (nu + 1.0) * (nu + 4.0).powi(2) / (8.0 * s * (nu + 3.0));
        let dist = StudentTDist::new(nu).map_err(|e| Error::Parameter(e.to_string()))?;
        Ok(Self { params: StudentTParams { mu, sigma, nu }, s, log_norm, floor, sup, dist })
    }

    /// Unit-scale T with `nu` degrees of freedom centred at `mu`.
    pub fn shifted(mu: f64, nu: f64) -> Result<Self> {
        Self::new(mu, 1.0, nu)
    }

    pub fn params(&self) -> &StudentTParams {
        &self.params
    }

    fn phi_sq(&self, v: f64) -> f64 {
        // closed form of φ in terms of v = (x − μ)²
        let nu = self.params.nu;
        let s = self.s;
        (nu + 1.0) * v * (s * (nu + 4.0) + v) / (2.0 * s * (s + v).powi(2))
    }

    pub fn cdf(&self, x: f64) -> f64 {
        let p = &self.params;
        StudentsT::new(p.mu, p.sigma, p.nu).map(|d| d.cdf(x)).unwrap_or(f64::NAN)
    }
}

impl ComponentDensity for StudentT {
    fn dim(&self) -> usize {
        1
    }

    fn log_density(&self, u: &[f64]) -> f64 {
        let w = u[0] - self.params.mu;
        self.log_norm - 0.5 * (self.params.nu + 1.0) * (w * w / self.s).ln_1p()
    }

    fn grad_log_density(&self, u: &[f64], grad: &mut [f64]) {
        let w = u[0] - self.params.mu;
        grad[0] = -(self.params.nu + 1.0) * w / (self.s + w * w);
    }

    fn div_grad(&self, u: &[f64]) -> f64 {
        let w = u[0] - self.params.mu;
        let d = self.s + w * w;
        -(self.params.nu + 1.0) * (self.s - w * w) / (d * d)
    }

    fn drift_floor(&self) -> f64 {
        self.floor
    }

    fn phi_global_bound(&self) -> Option<f64> {
        Some(self.sup)
    }

    fn phi(&self, u: &[f64]) -> f64 {
        let w = u[0] - self.params.mu;
        self.phi_sq(w * w)
    }

    fn phi_interval_bound(&self, lower: &[f64], upper: &[f64]) -> f64 {
        let a = lower[0] - self.params.mu;
        let b = upper[0] - self.params.mu;
        let vmax = (a * a).max(b * b);
        let vmin = if a <= 0.0 && b >= 0.0 { 0.0 } else { (a * a).min(b * b) };
        let nu = self.params.nu;
        let vstar = (nu + 4.0) * self.s / (nu + 2.0);
        self.phi_sq(vstar.clamp(vmin, vmax))
    }

    fn sample(&self, rng: &mut dyn RngCore, out: &mut [f64]) {
        let t: f64 = self.dist.sample(rng);
        out[0] = self.params.mu + self.params.sigma * t;
    }

    fn moments(&self) -> Option<(Vec<f64>, Vec<f64>)> {
        let p = &self.params;
        if p.nu > 2.0 {
            Some((vec![p.mu], vec![p.sigma * p.sigma * p.nu / (p.nu - 2.0)]))
        } else {
            None
        }
    }

    fn quantile(&self, q: f64) -> Option<f64> {
        let p = &self.params;
        StudentsT::new(p.mu, p.sigma, p.nu).ok().map(|d| d.inverse_cdf(q))
    }
}

/// Parameters of the generalized logistic law `γ log(G_α / G_β) + C` with
/// `G_a ~ Gamma(a, 1)` independent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GenLogParams {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub location: f64,
}

impl GenLogParams {
    pub fn new(alpha: f64, beta: f64, gamma: f64, location: f64) -> Result<Self> {
        check_positive("alpha", alpha)?;
        check_positive("beta", beta)?;
        check_positive("gamma", gamma)?;
        if !location.is_finite() {
            return Err(Error::Parameter("location must be finite".into()));
        }
        Ok(Self { alpha, beta, gamma, location })
    }

    /// Location that makes the law mean zero.
    pub fn centred_location(alpha: f64, beta: f64, gamma: f64) -> f64 {
        -gamma * (polygamma(0, alpha) - polygamma(0, beta))
    }

    pub fn shifted(&self, by: f64) -> Self {
        Self { location: self.location + by, ..*self }
    }
}

/// First four cumulants of a generalized logistic law.
///
/// The log-ratio of two gammas has cumulants `ψ⁽ⁿ⁻¹⁾(α) + (−1)ⁿ ψ⁽ⁿ⁻¹⁾(β)`,
/// so the fourth cumulant carries a plus sign and is always positive.
pub fn genlog_cumulants(p: &GenLogParams) -> Result<[f64; 4]> {
    GenLogParams::new(p.alpha, p.beta, p.gamma, p.location)?;
    let (a, b, g) = (p.alpha, p.beta, p.gamma);
    Ok([
        p.location + g * (polygamma(0, a) - polygamma(0, b)),
        g * g * (polygamma(1, a) + polygamma(1, b)),
        g.powi(3) * (polygamma(2, a) - polygamma(2, b)),
        g.powi(4) * (polygamma(3, a) + polygamma(3, b)),
    ])
}

#[derive(Debug, Clone)]
enum LogGammaSampler {
    Direct(Gamma<f64>),
    // shape < 1: log G(a) = log G(a + 1) + log(U) / a
    Boosted(Gamma<f64>, f64),
}

impl LogGammaSampler {
    fn new(shape: f64) -> Self {
        if shape >= 1.0 {
            Self::Direct(Gamma::new(shape, 1.0).unwrap())
        } else {
            Self::Boosted(Gamma::new(shape + 1.0, 1.0).unwrap(), shape)
        }
    }

    fn sample(&self, rng: &mut dyn RngCore) -> f64 {
        match self {
            Self::Direct(g) => g.sample(rng).ln(),
            Self::Boosted(g, a) => {
                let u: f64 = rng.random::<f64>();
                g.sample(rng).ln() + (1.0 - u).ln() / a
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct GenLog {
    params: GenLogParams,
    log_norm: f64,
    floor: f64,
    // S(S + 1) / (2γ²) and the vertex p* of the quadratic in p
    curvature: f64,
    pstar: f64,
    sup: f64,
    ga: LogGammaSampler,
    gb: LogGammaSampler,
}

impl GenLog {
    pub fn new(params: GenLogParams) -> Result<Self> {
        let GenLogParams { alpha: a, beta: b, gamma: g, location } = params;
        GenLogParams::new(a, b, g, location)?;
        let s = a + b;
        let log_norm = ln_gamma(s) - ln_gamma(a) - ln_gamma(b) - g.ln();
        let pstar = (2.0 * a + 1.0) / (2.0 * (s + 1.0));
        let q_min = a * a - s * (2.0 * a + 1.0).powi(2) / (4.0 * (s + 1.0));
        let floor = q_min / (2.0 * g * g);
        let curvature = s * (s + 1.0) / (2.0 * g * g);
        let sup = curvature * pstar.max(1.0 - pstar).powi(2);
        Ok(Self {
            params,
            log_norm,
            floor,
            curvature,
            pstar,
            sup,
            ga: LogGammaSampler::new(a),
            gb: LogGammaSampler::new(b),
        })
    }

    pub fn params(&self) -> &GenLogParams {
        &self.params
    }

    fn z(&self, x: f64) -> f64 {
        (x - self.params.location) / self.params.gamma
    }

    pub fn cdf(&self, x: f64) -> f64 {
        let z = self.z(x);
        if z > 0.0 {
            return 1.0 - self.sf(x);
        }
        let p = logistic(z);
        if p <= 0.0 {
            0.0
        } else {
            beta_reg(self.params.alpha, self.params.beta, p)
        }
    }

    /// Upper tail `1 − F(x)`, accurate far into the right tail.
    pub fn sf(&self, x: f64) -> f64 {
        let z = self.z(x);
        if z <= 0.0 {
            return 1.0 - self.cdf(x);
        }
        let q = logistic(-z);
        if q <= 0.0 {
            0.0
        } else {
            beta_reg(self.params.beta, self.params.alpha, q)
        }
    }

    pub fn cumulants(&self) -> [f64; 4] {
        genlog_cumulants(&self.params).unwrap()
    }
}

impl ComponentDensity for GenLog {
    fn dim(&self) -> usize {
        1
    }

    fn log_density(&self, u: &[f64]) -> f64 {
        let z = self.z(u[0]);
        self.log_norm - self.params.alpha * softplus(-z) - self.params.beta * softplus(z)
    }

    fn grad_log_density(&self, u: &[f64], grad: &mut [f64]) {
        let p = logistic(self.z(u[0]));
        let GenLogParams { alpha, beta, gamma, .. } = self.params;
        grad[0] = (alpha - (alpha + beta) * p) / gamma;
    }

    fn div_grad(&self, u: &[f64]) -> f64 {
        let p = logistic(self.z(u[0]));
        let GenLogParams { alpha, beta, gamma, .. } = self.params;
        -(alpha + beta) * p * (1.0 - p) / (gamma * gamma)
    }

    fn drift_floor(&self) -> f64 {
        self.floor
    }

    fn phi_global_bound(&self) -> Option<f64> {
        Some(self.sup)
    }

    fn phi(&self, u: &[f64]) -> f64 {
        let p = logistic(self.z(u[0]));
        self.curvature * (p - self.pstar).powi(2)
    }

    fn phi_interval_bound(&self, lower: &[f64], upper: &[f64]) -> f64 {
        let lo = logistic(self.z(lower[0])) - self.pstar;
        let hi = logistic(self.z(upper[0])) - self.pstar;
        self.curvature * (lo * lo).max(hi * hi)
    }

    fn sample(&self, rng: &mut dyn RngCore, out: &mut [f64]) {
        let la = self.ga.sample(rng);
        let lb = self.gb.sample(rng);
        out[0] = self.params.gamma * (la - lb) + self.params.location;
    }

    fn moments(&self) -> Option<(Vec<f64>, Vec<f64>)> {
        let k = self.cumulants();
        Some((vec![k[0]], vec![k[1]]))
    }

    fn quantile(&self, p: f64) -> Option<f64> {
        if !(p > 0.0 && p < 1.0) {
            return None;
        }
        let k = self.cumulants();
        let sd = k[1].sqrt();
        // compare on whichever tail keeps precision
        let below = |x: f64| if p <= 0.5 { self.cdf(x) < p } else { self.sf(x) > 1.0 - p };
        let mut lo = k[0] - sd;
        let mut hi = k[0] + sd;
        while !below(lo) {
            lo -= 2.0 * (hi - lo);
        }
        while below(hi) {
            hi += 2.0 * (hi - lo);
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if below(mid) {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-12 * (1.0 + mid.abs()) {
                break;
            }
        }
        Some(0.5 * (lo + hi))
    }
}

/// Sample variance, third and fourth cumulants (moment estimators).
pub fn sample_cumulants(x: &[f64]) -> [f64; 4] {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for v in x {
        let d = v - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    m2 /= n;
    m3 /= n;
    m4 /= n;
    [mean, m2, m3, m4 - 3.0 * m2 * m2]
}

/// Fit a zero-mean generalized logistic law to regression residuals by
/// matching the second to fourth cumulants under an L2 penalty
/// `λ1 (α² + β²) + λ2 γ²`.
///
/// Cumulant gaps are scaled by powers of the sample variance. The shapes are
/// kept in `[MIN_FIT_SHAPE, MAX_FIT_SHAPE]`: at either end the law tends to a
/// limit (asymmetric Laplace, log-gamma) whose φ bound grows without limit.
pub const MIN_FIT_SHAPE: f64 = 0.1;
pub const MAX_FIT_SHAPE: f64 = 20.0;

pub fn fit_genlog(residuals: &[f64], lambda1: f64, lambda2: f64) -> Result<GenLogParams> {
    if residuals.len() < 8 {
        return Err(Error::Parameter("at least 8 residuals are required".into()));
    }
    if !(lambda1 >= 0.0 && lambda2 >= 0.0) {
        return Err(Error::Parameter("penalties must be non-negative".into()));
    }
    let [_, k2, k3, k4] = sample_cumulants(residuals);
    if !(k2 > 0.0) {
        return Err(Error::Parameter("residuals have zero variance".into()));
    }
    let k4 = k4.max(0.0);

    let objective = |theta: &[f64]| -> f64 {
        let (a, b, g) = (theta[0].exp(), theta[1].exp(), theta[2].exp());
        if !(a.is_finite() && b.is_finite() && g.is_finite()) || !(MIN_FIT_SHAPE..=MAX_FIT_SHAPE).contains(&a) || !(MIN_FIT_SHAPE..=MAX_FIT_SHAPE).contains(&b) {
            return f64::INFINITY;
        }
        let c2 = g * g * (polygamma(1, a) + polygamma(1, b));
        let c3 = g.powi(3) * (polygamma(2, a) - polygamma(2, b));
        let c4 = g.powi(4) * (polygamma(3, a) + polygamma(3, b));
        ((c2 - k2) / k2).powi(2)
            + ((c3 - k3) / k2.powf(1.5)).powi(2)
            + ((c4 - k4) / (k2 * k2)).powi(2)
            + lambda1 * (a * a + b * b)
            + lambda2 * g * g
    };

    // Logistic-scale start, skewed towards the sign of the third cumulant.
    let scale0 = (k2 / (2.0 * polygamma(1, 1.0))).sqrt();
    let mut best: Option<(Vec<f64>, f64)> = None;
    for &(a0, b0) in &[(1.0, 1.0), (3.0, 0.5), (0.5, 3.0), (5.0, 5.0)] {
        let g0 = (k2 / (polygamma(1, a0) + polygamma(1, b0))).sqrt().max(1e-3 * scale0);
        let start = [f64::ln(a0), f64::ln(b0), g0.ln()];
        let (x, fx) = nelder_mead(&objective, &start, 0.5, 4000, 1e-14);
        if fx.is_finite() && best.as_ref().is_none_or(|(_, fb)| fx < *fb) {
            best = Some((x, fx));
        }
    }
    let (x, _) = best.ok_or_else(|| Error::Optimizer("no finite objective value found".into()))?;
    let (a, b, g) = (x[0].exp(), x[1].exp(), x[2].exp());
    GenLogParams::new(a, b, g, GenLogParams::centred_location(a, b, g))
        .map_err(|e| Error::Optimizer(e.to_string()))
}

/// Draw `n` values from a density into a flat vector.
pub fn sample_many(d: &dyn ComponentDensity, n: usize, rng: &mut dyn RngCore) -> Vec<f64> {
    let k = d.dim();
    let mut out = vec![0.0; n * k];
    for chunk in out.chunks_mut(k) {
        d.sample(rng, chunk);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn fd_grad(d: &dyn ComponentDensity, x: f64) -> f64 {
        let h = 1e-5 * (1.0 + x.abs());
        (d.log_density(&[x + h]) - d.log_density(&[x - h])) / (2.0 * h)
    }

    #[test]
    fn standard_gaussian_phi_values() {
        let g = Gaussian::standard();
        assert_eq!(g.drift_floor(), -0.5);
        assert_eq!(g.phi(&[0.0]), 0.0);
        assert!((g.phi(&[2.0]) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn default_phi_matches_closed_forms() {
        let dens: Vec<Box<dyn ComponentDensity>> = vec![
            Box::new(StudentT::new(1.0, 0.6, 9.0).unwrap()),
            Box::new(GenLog::new(GenLogParams::new(3.0, 0.4, 2.0, -5.0).unwrap()).unwrap()),
        ];
        for d in &dens {
            for i in 0..50 {
                let x = -10.0 + 0.4 * i as f64;
                let mut g = [0.0];
                d.grad_log_density(&[x], &mut g);
                let generic = 0.5 * (g[0] * g[0] + d.div_grad(&[x])) - d.drift_floor();
                assert!((generic - d.phi(&[x])).abs() < 1e-10, "{d:?} at {x}");
            }
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        let t = StudentT::new(-2.0, 1.5, 2.01).unwrap();
        let gl = GenLog::new(GenLogParams::new(0.7, 2.5, 1.3, 0.4).unwrap()).unwrap();
        for d in [&t as &dyn ComponentDensity, &gl] {
            for i in 0..40 {
                let x = -6.0 + 0.3 * i as f64;
                let mut g = [0.0];
                d.grad_log_density(&[x], &mut g);
                let fd = fd_grad(d, x);
                assert!((g[0] - fd).abs() <= 1e-5 * fd.abs().max(1e-3), "{x}: {} vs {fd}", g[0]);
            }
        }
    }

    #[test]
    fn genlog_drift_floor_is_attained() {
        let d = GenLog::new(GenLogParams::new(1.0, 1.0, 1.0, 0.0).unwrap()).unwrap();
        // symmetric case: p* = 1/2 at x = 0
        assert!(d.phi(&[0.0]).abs() < 1e-15);
        assert!((d.drift_floor() - (-0.25)).abs() < 1e-15);
    }

    #[test]
    fn genlog_cumulants_symmetric() {
        let k = genlog_cumulants(&GenLogParams::new(1.0, 1.0, 1.0, 0.0).unwrap()).unwrap();
        assert!(k[0].abs() < 1e-14);
        assert!(k[2].abs() < 1e-14);
        let pi2 = std::f64::consts::PI.powi(2);
        assert!((k[1] - pi2 / 3.0).abs() < 1e-10);
        // logistic excess kurtosis is 6/5
        assert!((k[3] / (k[1] * k[1]) - 1.2).abs() < 1e-9);
    }

    #[test]
    fn genlog_rejects_bad_params() {
        assert!(GenLogParams::new(0.0, 1.0, 1.0, 0.0).is_err());
        assert!(genlog_cumulants(&GenLogParams { alpha: 1.0, beta: -1.0, gamma: 1.0, location: 0.0 }).is_err());
    }

    #[test]
    fn genlog_cdf_and_quantile_agree() {
        let d = GenLog::new(GenLogParams::new(3.0, 0.4, 2.0, -5.0).unwrap()).unwrap();
        for &p in &[1e-8, 0.01, 0.5, 0.9, 1.0 - 1e-8] {
            let q = d.quantile(p).unwrap();
            assert!((d.cdf(q) - p).abs() < 1e-9 * p.max(1e-3), "{p}");
        }
    }

    #[test]
    fn student_t_median_at_location() {
        let d = StudentT::shifted(5.0, 2.01).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut x = sample_many(&d, 200_001, &mut rng);
        x.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert!((x[100_000] - 5.0).abs() < 0.02);
    }

    #[test]
    fn fit_handles_negative_kurtosis() {
        // uniform residuals have negative excess kurtosis
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let r: Vec<f64> = (0..2000).map(|_| rng.random::<f64>() - 0.5).collect();
        let p = fit_genlog(&r, 1e-3, 1e-6).unwrap();
        assert!(p.alpha > 0.0 && p.beta > 0.0 && p.gamma > 0.0);
    }
}
