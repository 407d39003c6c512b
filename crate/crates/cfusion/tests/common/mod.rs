//! Independent oracles shared by the integration tests and the acceptance
//! run: discretized Brownian-bridge paths, closed-form φ per density family,
//! and simple statistics.
#![allow(dead_code)]

use std::sync::Arc;

use cfusion::bridge::{bessel_noleave_event, crossing_event, sample_layer, LayerSequence};
use cfusion::density::{ComponentDensity, GenLog, GenLogParams, Gaussian, StudentT};
use cfusion::thinning::{accept_component, ThinningMode};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use statrs::distribution::{ChiSquared, ContinuousCDF};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal(rng: &mut dyn RngCore) -> f64 {
    StandardNormal.sample(rng)
}

/// Sampler estimate against oracle estimate, each with its standard error.
#[derive(Debug, Clone, Copy)]
pub struct Comparison {
    pub sampler: f64,
    pub sampler_se: f64,
    pub oracle: f64,
    pub oracle_se: f64,
}

impl Comparison {
    pub fn z(&self) -> f64 {
        let se = (self.sampler_se.powi(2) + self.oracle_se.powi(2)).sqrt();
        if se == 0.0 {
            return if self.sampler == self.oracle { 0.0 } else { f64::INFINITY };
        }
        (self.sampler - self.oracle).abs() / se
    }
}

impl std::fmt::Display for Comparison {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:.4} ± {:.4} vs oracle {:.4} ± {:.4} (z = {:.2})", self.sampler, self.sampler_se, self.oracle, self.oracle_se, self.z())
    }
}

pub fn mean_se(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt())
}

pub fn frequency(n: usize, mut event: impl FnMut() -> bool) -> (f64, f64) {
    let k = (0..n).filter(|_| event()).count() as f64;
    let p = k / n as f64;
    (p, (p * (1.0 - p) / n as f64).sqrt().max(0.5 / n as f64))
}

// ---------------------------------------------------------------------------
// discretized Brownian bridges

/// Bridge from `x` to `y` on `[0, t]` at `steps + 1` equally spaced times,
/// by exact Gaussian transitions between grid points.
pub fn bridge_grid(t: f64, x: f64, y: f64, steps: usize, rng: &mut dyn RngCore, out: &mut Vec<f64>) {
    out.clear();
    out.push(x);
    let dt = t / steps as f64;
    let mut w = x;
    for k in 0..steps - 1 {
        let rem = t - k as f64 * dt;
        let mean = w + (y - w) * dt / rem;
        let sd = (dt * (rem - dt) / rem).sqrt();
        w = mean + sd * normal(rng);
        out.push(w);
    }
    out.push(y);
}

/// Probability that a Brownian bridge from `a` to `b` over `dt` stays
/// below `k`.
pub fn stays_below(a: f64, b: f64, k: f64, dt: f64) -> f64 {
    if a >= k || b >= k {
        0.0
    } else {
        -(-2.0 * (k - a) * (k - b) / dt).exp_m1()
    }
}

pub fn stays_above(a: f64, b: f64, k: f64, dt: f64) -> f64 {
    stays_below(-a, -b, -k, dt)
}

/// Probability that the grid path stays inside `(lo, hi)` between its grid
/// points. Double crossings inside one step are ignored (they are of order
/// `exp(−(hi − lo)²/dt)`).
pub fn stays_inside(path: &[f64], lo: f64, hi: f64, dt: f64) -> f64 {
    path.windows(2).map(|w| stays_below(w[0], w[1], hi, dt) * stays_above(w[0], w[1], lo, dt)).product()
}

/// Maximum of a Brownian bridge from `a` to `b` over `dt`.
pub fn step_max(a: f64, b: f64, dt: f64, rng: &mut dyn RngCore) -> f64 {
    let u: f64 = 1.0 - rng.random::<f64>();
    0.5 * (a + b + ((a - b).powi(2) - 2.0 * dt * u.ln()).sqrt())
}

pub fn step_min(a: f64, b: f64, dt: f64, rng: &mut dyn RngCore) -> f64 {
    -step_max(-a, -b, dt, rng)
}

pub const GRID: usize = 10_000;

/// `(T, x, y, K)` for the crossing event.
pub const CROSSING_FIXTURES: [(f64, f64, f64, f64); 3] = [(1.0, 0.0, 0.0, 1.0), (2.0, 0.3, -0.5, 1.2), (0.5, 0.8, 0.1, 1.0)];

pub fn crossing_check(fix: (f64, f64, f64, f64), exact: usize, paths: usize, seed: u64) -> Comparison {
    let (t, x, y, k) = fix;
    let mut r = rng(seed);
    let (p, se) = frequency(exact, || crossing_event(t, x, y, k, &mut r).unwrap());
    let mut path = Vec::new();
    let dt = t / GRID as f64;
    let vals: Vec<f64> = (0..paths)
        .map(|_| {
            bridge_grid(t, x, y, GRID, &mut r, &mut path);
            stays_inside(&path, -k, k, dt)
        })
        .collect();
    let (o, ose) = mean_se(&vals);
    Comparison { sampler: p, sampler_se: se, oracle: o, oracle_se: ose }
}

/// `(T, x, y, layer step)` for layer sampling.
pub const LAYER_FIXTURES: [(f64, f64, f64, f64); 2] = [(1.0, 0.0, 0.0, 0.5), (1.0, 0.4, -0.3, 0.25)];

/// Chi-square p-value of sampled layer indices against layer indices read
/// off discretized paths with exact within-step extrema.
pub fn layer_check(fix: (f64, f64, f64, f64), exact: usize, paths: usize, seed: u64) -> (f64, Vec<u64>, Vec<u64>) {
    let (t, x, y, step) = fix;
    let layers = LayerSequence::linear(step).unwrap();
    let mut r = rng(seed);
    let mut a = vec![0u64; 64];
    for _ in 0..exact {
        let i = sample_layer(t, x, y, &layers, &mut r).unwrap();
        a[i.min(63)] += 1;
    }
    let mut b = vec![0u64; 64];
    let mut path = Vec::new();
    let dt = t / GRID as f64;
    for _ in 0..paths {
        bridge_grid(t, x, y, GRID, &mut r, &mut path);
        let (mut hi, mut lo) = (f64::NEG_INFINITY, f64::INFINITY);
        for w in path.windows(2) {
            hi = hi.max(step_max(w[0], w[1], dt, &mut r));
            lo = lo.min(step_min(w[0], w[1], dt, &mut r));
        }
        let excess = (hi - x.max(y)).max(x.min(y) - lo).max(0.0);
        let i = ((excess / step).floor() as usize + 1).min(63);
        b[i] += 1;
    }
    (two_sample_chi_square(&a, &b), a, b)
}

/// Two-sample chi-square homogeneity test on binned counts; sparse bins are
/// pooled into their neighbours.
pub fn two_sample_chi_square(a: &[u64], b: &[u64]) -> f64 {
    let (na, nb) = (a.iter().sum::<u64>() as f64, b.iter().sum::<u64>() as f64);
    let mut bins: Vec<(f64, f64)> = Vec::new();
    let (mut ca, mut cb) = (0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        ca += *x as f64;
        cb += *y as f64;
        if ca + cb >= 20.0 {
            bins.push((ca, cb));
            ca = 0.0;
            cb = 0.0;
        }
    }
    if ca + cb > 0.0 {
        match bins.last_mut() {
            Some(l) => {
                l.0 += ca;
                l.1 += cb;
            }
            None => bins.push((ca, cb)),
        }
    }
    if bins.len() < 2 {
        return 1.0;
    }
    let (ka, kb) = ((nb / na).sqrt(), (na / nb).sqrt());
    let stat: f64 = bins.iter().map(|(x, y)| (ka * x - kb * y).powi(2) / (x + y)).sum();
    1.0 - ChiSquared::new((bins.len() - 1) as f64).unwrap().cdf(stat)
}

/// `(T, x, y, K, L)` for the Bessel-bridge event.
pub const BESSEL_FIXTURES: [(f64, f64, f64, f64, Option<f64>); 3] =
    [(1.0, 0.5, 0.5, 1.0, None), (0.5, 0.2, 0.8, 1.1, None), (1.0, 0.5, 0.5, 1.0, Some(1.5))];

/// A Bessel(3) bridge is a Brownian bridge conditioned to stay positive, so
/// the no-leave probability is a ratio of two Brownian no-exit
/// probabilities, both estimated on discretized paths.
pub fn bessel_check(fix: (f64, f64, f64, f64, Option<f64>), exact: usize, paths: usize, seed: u64) -> Comparison {
    let (t, x, y, k, l) = fix;
    let mut r = rng(seed);
    let (p, se) = frequency(exact, || bessel_noleave_event(t, x, y, k, l, &mut r).unwrap());
    let mut path = Vec::new();
    let dt = t / GRID as f64;
    let mut num = Vec::with_capacity(paths);
    let mut den = Vec::with_capacity(paths);
    for _ in 0..paths {
        bridge_grid(t, x, y, GRID, &mut r, &mut path);
        num.push(stays_inside(&path, 0.0, k, dt));
        den.push(match l {
            Some(l) => stays_inside(&path, 0.0, l, dt),
            None => f64::NAN,
        });
    }
    let (mn, sn) = mean_se(&num);
    let (o, ose) = match l {
        None => {
            // positivity of a Brownian bridge is known in closed form
            let d = -(-2.0 * x * y / t).exp_m1();
            (mn / d, sn / d)
        }
        Some(_) => {
            let (md, _) = mean_se(&den);
            let q = mn / md;
            let n = paths as f64;
            let resid: Vec<f64> = num.iter().zip(&den).map(|(a, b)| a - q * b).collect();
            let v = resid.iter().map(|e| e * e).sum::<f64>() / (n - 1.0);
            (q, (v / n).sqrt() / md)
        }
    };
    Comparison { sampler: p, sampler_se: se, oracle: o, oracle_se: ose }
}

// ---------------------------------------------------------------------------
// densities with φ written out by hand

#[derive(Debug, Clone, Copy)]
pub enum Family {
    Gaussian { mu: f64, sd: f64 },
    StudentT { mu: f64, sigma: f64, nu: f64 },
    GenLog { alpha: f64, beta: f64, gamma: f64, c: f64 },
}

pub const SHIPPED: [Family; 5] = [
    Family::Gaussian { mu: 0.5, sd: 0.8 },
    Family::StudentT { mu: 0.0, sigma: 1.0, nu: 3.0 },
    Family::StudentT { mu: 0.0, sigma: 0.6, nu: 9.0 },
    Family::GenLog { alpha: 3.0, beta: 0.4, gamma: 2.0, c: -5.0 },
    Family::GenLog { alpha: 1.0, beta: 1.0, gamma: 1.0, c: 0.0 },
];

impl Family {
    pub fn build(&self) -> Arc<dyn ComponentDensity> {
        match *self {
            Family::Gaussian { mu, sd } => Arc::new(Gaussian::new(mu, sd).unwrap()),
            Family::StudentT { mu, sigma, nu } => Arc::new(StudentT::new(mu, sigma, nu).unwrap()),
            Family::GenLog { alpha, beta, gamma, c } => Arc::new(GenLog::new(GenLogParams::new(alpha, beta, gamma, c).unwrap()).unwrap()),
        }
    }

    pub fn centre_scale(&self) -> (f64, f64) {
        match *self {
            Family::Gaussian { mu, sd } => (mu, sd),
            Family::StudentT { mu, sigma, .. } => (mu, sigma),
            Family::GenLog { alpha, beta, gamma, c } => (c + gamma * (alpha / beta).ln(), gamma),
        }
    }

    /// First and second derivative of the log-density.
    pub fn derivatives(&self, x: f64) -> (f64, f64) {
        match *self {
            Family::Gaussian { mu, sd } => (-(x - mu) / (sd * sd), -1.0 / (sd * sd)),
            Family::StudentT { mu, sigma, nu } => {
                let z = (x - mu) / sigma;
                let q = nu + z * z;
                (-(nu + 1.0) * z / (sigma * q), -(nu + 1.0) * (nu - z * z) / (sigma * sigma * q * q))
            }
            Family::GenLog { alpha, beta, gamma, c } => {
                let z = (x - c) / gamma;
                let s = 1.0 / (1.0 + (-z).exp());
                ((alpha - (alpha + beta) * s) / gamma, -(alpha + beta) * s * (1.0 - s) / (gamma * gamma))
            }
        }
    }

    pub fn raw_phi(&self, x: f64) -> f64 {
        let (g, h) = self.derivatives(x);
        0.5 * (g * g + h)
    }

    /// Infimum of the raw φ by a dense grid and a local refinement.
    pub fn floor(&self) -> f64 {
        let (c, s) = self.centre_scale();
        let n = 200_000;
        let (lo, hi) = (c - 60.0 * s, c + 60.0 * s);
        let h = (hi - lo) / n as f64;
        let (mut best, mut at) = (f64::INFINITY, lo);
        for i in 0..=n {
            let x = lo + h * i as f64;
            let v = self.raw_phi(x);
            if v < best {
                best = v;
                at = x;
            }
        }
        let (mut a, mut b) = (at - h, at + h);
        for _ in 0..200 {
            let (m1, m2) = (a + (b - a) / 3.0, b - (b - a) / 3.0);
            if self.raw_phi(m1) < self.raw_phi(m2) {
                b = m2;
            } else {
                a = m1;
            }
        }
        best.min(self.raw_phi(0.5 * (a + b)))
    }
}

/// Monte Carlo estimate of `E[exp(−∫₀ᵀ φ(ω_s) ds)]` over Brownian bridges
/// from `x` to `y`, trapezoid rule on a grid of [`GRID`] steps.
pub fn killing_oracle(fam: &Family, t: f64, x: f64, y: f64, paths: usize, rng: &mut dyn RngCore) -> (f64, f64) {
    let l = fam.floor();
    let dt = t / GRID as f64;
    let mut path = Vec::new();
    let vals: Vec<f64> = (0..paths)
        .map(|_| {
            bridge_grid(t, x, y, GRID, rng, &mut path);
            let phi: Vec<f64> = path.iter().map(|w| fam.raw_phi(*w) - l).collect();
            let integral = dt * (phi.iter().sum::<f64>() - 0.5 * (phi[0] + phi[GRID]));
            (-integral).exp()
        })
        .collect();
    mean_se(&vals)
}

/// Endpoint pairs for thinning checks: `x` from the density, `y` one
/// Brownian step away.
pub fn endpoint_pairs(fam: &Family, t: f64, count: usize, seed: u64) -> Vec<(f64, f64)> {
    let d = fam.build();
    let mut r = rng(seed);
    (0..count)
        .map(|_| {
            let mut x = [0.0];
            d.sample(&mut r, &mut x);
            (x[0], x[0] + t.sqrt() * normal(&mut r))
        })
        .collect()
}

/// Acceptance frequency of the thinning event against the killing oracle.
pub fn thinning_check(fam: &Family, mode: &ThinningMode, t: f64, x: f64, y: f64, exact: usize, paths: usize, seed: u64) -> Comparison {
    let d = fam.build();
    let mut r = rng(seed);
    let (p, se) = frequency(exact, || accept_component(d.as_ref(), &[x], &[y], t, mode, &mut r).unwrap().accepted);
    let (o, ose) = killing_oracle(fam, t, x, y, paths, &mut r);
    Comparison { sampler: p, sampler_se: se, oracle: o, oracle_se: ose }
}

// ---------------------------------------------------------------------------
// one-dimensional integration for reference densities

/// Composite Simpson rule on `[a, b]` with `n` (even) panels.
pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        s += f(a + h * i as f64) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

/// Integral over the real line through `x = tan θ`.
pub fn simpson_real_line(f: impl Fn(f64) -> f64, n: usize) -> f64 {
    let half = std::f64::consts::FRAC_PI_2;
    simpson(
        |th| {
            if th.abs() >= half {
                0.0
            } else {
                let c = th.cos();
                f(th.tan()) / (c * c)
            }
        },
        -half,
        half,
        n,
    )
}

/// Unnormalized target of the t₃ × t₅ toy with `x₁ + x₂ = 0`, as a function
/// of `x₁`.
pub fn toy_kernel(x: f64) -> f64 {
    (1.0 + x * x / 3.0).powi(-2) * (1.0 + x * x / 5.0).powi(-3)
}

/// CDF of the normalized toy density, tabulated once.
pub struct ToyCdf {
    grid: Vec<f64>,
    cdf: Vec<f64>,
}

impl ToyCdf {
    pub fn new() -> Self {
        let z = simpson_real_line(toy_kernel, 200_000);
        let (lo, hi, n) = (-200.0, 200.0, 400_000);
        let h = (hi - lo) / n as f64;
        let tail = simpson_real_line(|x| if x < lo { toy_kernel(x) } else { 0.0 }, 20_000);
        let mut cdf = Vec::with_capacity(n + 1);
        let mut acc = tail;
        let grid: Vec<f64> = (0..=n).map(|i| lo + h * i as f64).collect();
        cdf.push(acc / z);
        for i in 0..n {
            let (a, b) = (grid[i], grid[i + 1]);
            acc += (b - a) / 6.0 * (toy_kernel(a) + 4.0 * toy_kernel(0.5 * (a + b)) + toy_kernel(b));
            cdf.push(acc / z);
        }
        Self { grid, cdf }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        let (lo, hi) = (self.grid[0], self.grid[self.grid.len() - 1]);
        if x <= lo {
            return 0.0;
        }
        if x >= hi {
            return 1.0;
        }
        let h = self.grid[1] - self.grid[0];
        let i = (((x - lo) / h) as usize).min(self.grid.len() - 2);
        let w = (x - self.grid[i]) / h;
        self.cdf[i] * (1.0 - w) + self.cdf[i + 1] * w
    }
}

impl Default for ToyCdf {
    fn default() -> Self {
        Self::new()
    }
}
