//! Brownian bridges revealed lazily at arbitrary times, with optional layer
//! information and a decomposition at the extremum into two Bessel(3)
//! bridges.
//!
//! Coordinates of a Bessel gap are measured as the distance `b = s·(μ − X)`
//! from the recorded extremum `μ`, with `s = +1` for a maximum and `−1` for a
//! minimum, so that every Bessel segment is non-negative.

use rand::{Rng, RngCore};
use rand_distr::{Distribution, StandardNormal};

use crate::directional::sample_cosine;
use crate::error::{Error, Result};
use crate::series::{bernoulli, bernoulli_ratio, AlternatingSeries, BesselNoLeave};

const REJECTION_CAP: usize = 10_000_000;

/// Nested layer offsets `0 = a₀ < a₁ < a₂ < …`.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerSequence {
    levels: Vec<f64>,
    step: f64,
}

impl LayerSequence {
    /// `a_i = i·step`.
    pub fn linear(step: f64) -> Result<Self> {
        if !(step > 0.0 && step.is_finite()) {
            return Err(Error::Parameter(format!("layer step must be positive, got {step}")));
        }
        Ok(Self { levels: vec![step], step })
    }

    /// Default spacing `a_i = i·c·√T`.
    pub fn for_horizon(t: f64, c: f64) -> Result<Self> {
        Self::linear(c * t.sqrt())
    }

    /// Explicit `a₁ < a₂ < … < a_n`, continued with the last increment.
    pub fn explicit(levels: Vec<f64>) -> Result<Self> {
        let mut prev = 0.0;
        for &a in &levels {
            if !(a > prev && a.is_finite()) {
                return Err(Error::Parameter("layer levels must be positive and strictly increasing".into()));
            }
            prev = a;
        }
        if levels.is_empty() {
            return Err(Error::Parameter("need at least one layer level".into()));
        }
        let step = if levels.len() > 1 { levels[levels.len() - 1] - levels[levels.len() - 2] } else { levels[0] };
        Ok(Self { levels, step })
    }

    /// `a_i`, with `a₀ = 0`.
    pub fn level(&self, i: usize) -> f64 {
        if i == 0 {
            return 0.0;
        }
        let n = self.levels.len();
        if i <= n {
            self.levels[i - 1]
        } else {
            self.levels[n - 1] + (i - n) as f64 * self.step
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExtremumKind {
    Min,
    Max,
}

impl ExtremumKind {
    fn sign(self) -> f64 {
        match self {
            ExtremumKind::Max => 1.0,
            ExtremumKind::Min => -1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Extremum {
    pub time: f64,
    pub value: f64,
    pub kind: ExtremumKind,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Gap {
    Brownian,
    /// stays strictly inside `(lo, hi)`
    Confined { lo: f64, hi: f64 },
    /// Bessel coordinate stays below `cap`; with `reach` it also exceeds
    /// `reach` somewhere inside the gap
    Bessel { cap: f64, reach: Option<f64> },
}

/// A Brownian bridge on `[0, T]` from `x` to `y`, revealed at finitely many
/// times.
#[derive(Debug, Clone)]
pub struct BridgeSkeleton {
    knots: Vec<(f64, f64)>,
    gaps: Vec<Gap>,
    layer: Option<(f64, f64)>,
    extremum: Option<Extremum>,
}

impl BridgeSkeleton {
    pub fn new(horizon: f64, start: f64, end: f64) -> Result<Self> {
        if !(horizon > 0.0 && start.is_finite() && end.is_finite()) {
            return Err(Error::Parameter(format!("bad bridge: T={horizon}, x={start}, y={end}")));
        }
        Ok(Self { knots: vec![(0.0, start), (horizon, end)], gaps: vec![Gap::Brownian], layer: None, extremum: None })
    }

    /// Bridge conditioned to stay inside `(lo, hi)`.
    pub fn with_layer(horizon: f64, start: f64, end: f64, lo: f64, hi: f64) -> Result<Self> {
        let mut s = Self::new(horizon, start, end)?;
        if !(lo < start.min(end) && hi > start.max(end)) {
            return Err(Error::Parameter(format!("endpoints must lie strictly inside the layer ({lo}, {hi})")));
        }
        s.gaps[0] = Gap::Confined { lo, hi };
        s.layer = Some((lo, hi));
        Ok(s)
    }

    pub fn horizon(&self) -> f64 {
        self.knots[self.knots.len() - 1].0
    }

    pub fn start(&self) -> f64 {
        self.knots[0].1
    }

    pub fn end(&self) -> f64 {
        self.knots[self.knots.len() - 1].1
    }

    /// Interior `(time, value)` pairs in time order, including a recorded
    /// extremum.
    pub fn revealed(&self) -> &[(f64, f64)] {
        &self.knots[1..self.knots.len() - 1]
    }

    pub fn layer(&self) -> Option<(f64, f64)> {
        self.layer
    }

    pub fn extremum(&self) -> Option<Extremum> {
        self.extremum
    }

    /// Interval known to contain the whole path.
    pub fn value_bounds(&self) -> (f64, f64) {
        if let Some(e) = self.extremum {
            let reach = self
                .gaps
                .iter()
                .map(|g| match g {
                    Gap::Bessel { cap, .. } => *cap,
                    _ => f64::INFINITY,
                })
                .fold(0.0, f64::max);
            return match e.kind {
                ExtremumKind::Max => (e.value - reach, e.value),
                ExtremumKind::Min => (e.value, e.value + reach),
            };
        }
        self.layer.unwrap_or((f64::NEG_INFINITY, f64::INFINITY))
    }

    fn to_bessel(&self, v: f64) -> f64 {
        let e = self.extremum.expect("Bessel gap without extremum");
        (e.kind.sign() * (e.value - v)).max(0.0)
    }

    fn from_bessel(&self, b: f64) -> f64 {
        let e = self.extremum.expect("Bessel gap without extremum");
        e.value - e.kind.sign() * b
    }

    /// Draw the path at time `t` from its law given everything revealed so
    /// far, and record it.
    pub fn interpolate(&mut self, t: f64, rng: &mut dyn RngCore) -> Result<f64> {
        let horizon = self.horizon();
        if !(t >= 0.0 && t <= horizon) {
            return Err(Error::Parameter(format!("time {t} outside [0, {horizon}]")));
        }
        let i = self.knots.partition_point(|k| k.0 < t);
        if i < self.knots.len() && self.knots[i].0 == t {
            return Ok(self.knots[i].1);
        }
        let (t1, u) = self.knots[i - 1];
        let (t2, v) = self.knots[i];
        let (d1, d2) = (t - t1, t2 - t);
        let (w, left, right) = match self.gaps[i - 1] {
            Gap::Brownian => (brownian_marginal(u, v, d1, d2, rng), Gap::Brownian, Gap::Brownian),
            Gap::Confined { lo, hi } => {
                let c = 0.5 * (lo + hi);
                let k = 0.5 * (hi - lo);
                let mut tries = 0;
                let w = loop {
                    tries += 1;
                    if tries > REJECTION_CAP {
                        return Err(Error::NonConvergence(tries));
                    }
                    let w = brownian_marginal(u, v, d1, d2, rng);
                    if w <= lo || w >= hi {
                        continue;
                    }
                    if crossing_event(d1, u - c, w - c, k, rng)? && crossing_event(d2, w - c, v - c, k, rng)? {
                        break w;
                    }
                };
                (w, Gap::Confined { lo, hi }, Gap::Confined { lo, hi })
            }
            Gap::Bessel { cap, reach } => {
                let (bu, bv) = (self.to_bessel(u), self.to_bessel(v));
                let mut tries = 0;
                loop {
                    tries += 1;
                    if tries > REJECTION_CAP {
                        return Err(Error::NonConvergence(tries));
                    }
                    let bw = bes3_bridge_marginal(bu, bv, d1, d2, rng);
                    if bw >= cap {
                        continue;
                    }
                    if !(bessel_event(d1, bu, bw, cap, None, rng)? && bessel_event(d2, bw, bv, cap, None, rng)?) {
                        continue;
                    }
                    let labels = match reach {
                        None => (Gap::Bessel { cap, reach: None }, Gap::Bessel { cap, reach: None }),
                        Some(k) => {
                            let in1 = bessel_event(d1, bu, bw, k, Some(cap), rng)?;
                            let in2 = bessel_event(d2, bw, bv, k, Some(cap), rng)?;
                            if in1 && in2 {
                                continue;
                            }
                            let label = |inside: bool, a: f64, b: f64| {
                                if inside {
                                    Gap::Bessel { cap: k, reach: None }
                                } else if a.max(b) >= k {
                                    Gap::Bessel { cap, reach: None }
                                } else {
                                    Gap::Bessel { cap, reach: Some(k) }
                                }
                            };
                            (label(in1, bu, bw), label(in2, bw, bv))
                        }
                    };
                    break (self.from_bessel(bw), labels.0, labels.1);
                }
            }
        };
        self.knots.insert(i, (t, w));
        self.gaps[i - 1] = left;
        self.gaps.insert(i, right);
        Ok(w)
    }
}

fn brownian_marginal(u: f64, v: f64, d1: f64, d2: f64, rng: &mut dyn RngCore) -> f64 {
    let s = d1 + d2;
    let z: f64 = StandardNormal.sample(rng);
    u + (v - u) * d1 / s + (d1 * d2 / s).sqrt() * z
}

/// Marginal at an interior time of a Bessel(3) bridge from `u` to `v`,
/// realised as the norm of a three-dimensional Brownian bridge whose end
/// direction is von Mises–Fisher distributed.
pub(crate) fn bes3_bridge_marginal(u: f64, v: f64, d1: f64, d2: f64, rng: &mut dyn RngCore) -> f64 {
    let s = d1 + d2;
    let r = d1 / s;
    let kappa = u * v / s;
    let c = sample_cosine(3, kappa, rng);
    let sn = (1.0 - c * c).max(0.0).sqrt();
    let ang = std::f64::consts::TAU * rng.random::<f64>();
    let sd = (d1 * d2 / s).sqrt();
    let m = [(1.0 - r) * u + r * v * c, r * v * sn * ang.cos(), r * v * sn * ang.sin()];
    let mut n2 = 0.0;
    for mi in m {
        let z: f64 = StandardNormal.sample(rng);
        let w = mi + sd * z;
        n2 += w * w;
    }
    n2.sqrt()
}

/// Event that a Brownian bridge from `x` to `y` over `[0, t]` stays in
/// `(−k, k)`.
pub fn crossing_event(t: f64, x: f64, y: f64, k: f64, rng: &mut dyn RngCore) -> Result<bool> {
    let mut s = AlternatingSeries::crossing(t, x, y, k)?;
    bernoulli(rng.random(), &mut s)
}

/// Event that a Bessel(3) bridge from `x` to `y` over `[0, t]` stays below
/// `k`, optionally conditional on staying below `l > k`.
pub fn bessel_noleave_event(t: f64, x: f64, y: f64, k: f64, l: Option<f64>, rng: &mut dyn RngCore) -> Result<bool> {
    if let Some(l) = l {
        if !(l > k) {
            return Err(Error::Parameter(format!("outer level {l} must exceed {k}")));
        }
    }
    let mut num = BesselNoLeave::new(t, x, y, k)?;
    match l {
        None => bernoulli(rng.random(), &mut num),
        Some(l) => {
            let mut den = BesselNoLeave::new(t, x, y, l)?;
            bernoulli_ratio(rng.random(), &mut num, &mut den)
        }
    }
}

// as above, but an endpoint at or beyond `k` is a certain exit
fn bessel_event(t: f64, x: f64, y: f64, k: f64, l: Option<f64>, rng: &mut dyn RngCore) -> Result<bool> {
    if x.max(y) >= k {
        return Ok(false);
    }
    bessel_noleave_event(t, x, y, k, l, rng)
}

/// Index `I ≥ 1` of the smallest layer `[min(x,y) − a_I, max(x,y) + a_I]`
/// containing the whole bridge.
pub fn sample_layer(t: f64, x: f64, y: f64, layers: &LayerSequence, rng: &mut dyn RngCore) -> Result<usize> {
    let u: f64 = rng.random();
    let h = 0.5 * (x - y);
    for i in 1..=crate::series::TERM_CAP {
        let k = h.abs() + layers.level(i);
        let mut s = AlternatingSeries::crossing(t, h, -h, k)?;
        if bernoulli(u, &mut s)? {
            return Ok(i);
        }
    }
    Err(Error::NonConvergence(crate::series::TERM_CAP))
}

/// Numerically stable inverse-Gaussian draw with mean `mu` and shape `lambda`.
fn inverse_gaussian(mu: f64, lambda: f64, rng: &mut dyn RngCore) -> f64 {
    let z: f64 = StandardNormal.sample(rng);
    let y = mu * z * z;
    let r = (4.0 * lambda * y + y * y).sqrt();
    // root of the quadratic, written without cancellation
    let x = mu * 4.0 * lambda * y / ((r + y) * (r + y));
    let x = if y == 0.0 { mu } else { x };
    if rng.random::<f64>() * (mu + x) <= mu {
        x
    } else {
        mu * mu / x
    }
}

/// Maximum of a bridge from `x` to `y` over `[0, t]`, conditioned to fall in
/// `[lo, hi)` with `lo ≥ max(x, y)`, by inversion of its survival function.
fn sample_max_in_band(t: f64, x: f64, y: f64, lo: f64, hi: f64, rng: &mut dyn RngCore) -> f64 {
    let ls = |c: f64| -2.0 * (c - x) * (c - y) / t;
    let (l_lo, l_hi) = (ls(lo), ls(hi));
    let delta = l_hi - l_lo;
    let u: f64 = rng.random();
    // ln v with v uniform on (S(hi), S(lo)]
    let lv = l_lo + (delta.exp() + u * (-delta.exp_m1())).ln();
    let c = 0.5 * ((x + y) + ((x - y) * (x - y) - 2.0 * t * lv).sqrt());
    c.clamp(lo, hi)
}

/// Time at which a bridge over `[0, t]` attains its maximum `c`, given
/// `a = c − x > 0` and `b = c − y > 0`. With `V = τ/(t − τ)` inverted, the
/// conditional law is a two-component inverse-Gaussian mixture.
fn sample_argmax(t: f64, a: f64, b: f64, rng: &mut dyn RngCore) -> f64 {
    let c1 = b * b / (2.0 * t);
    let c2 = a * a / (2.0 * t);
    let ratio = (c1 / c2).sqrt();
    let v = if rng.random::<f64>() * (1.0 + ratio) < 1.0 {
        inverse_gaussian(ratio, 2.0 * c1, rng)
    } else {
        1.0 / inverse_gaussian(1.0 / ratio, 2.0 * c2, rng)
    };
    // τ = t/(1 + V)
    (t / (1.0 + v)).clamp(0.0, t)
}

/// Given a plain skeleton and its layer index `I`, draw the path extremum and
/// return the skeleton decomposed at it into two Bessel bridges.
pub fn sample_extremum_and_decompose(
    skeleton: &BridgeSkeleton,
    index: usize,
    layers: &LayerSequence,
    rng: &mut dyn RngCore,
) -> Result<BridgeSkeleton> {
    if !skeleton.revealed().is_empty() || skeleton.extremum.is_some() || index == 0 {
        return Err(Error::Parameter("decomposition needs an unrevealed skeleton and I >= 1".into()));
    }
    let (t, x, y) = (skeleton.horizon(), skeleton.start(), skeleton.end());
    let (a_prev, a_cur) = (layers.level(index - 1), layers.level(index));
    for _ in 0..REJECTION_CAP {
        let kind = if rng.random::<bool>() { ExtremumKind::Max } else { ExtremumKind::Min };
        let s = kind.sign();
        let (xt, yt) = (s * x, s * y);
        let (hi_end, lo_end) = (xt.max(yt), xt.min(yt));
        let c = sample_max_in_band(t, xt, yt, hi_end + a_prev, hi_end + a_cur, rng);
        let (b0, b1) = (c - xt, c - yt);
        if !(b0 > 0.0 && b1 > 0.0) {
            continue;
        }
        let tau = sample_argmax(t, b0, b1, rng);
        if !(tau > 0.0 && tau < t) {
            continue;
        }
        let k_out = c - (lo_end - a_cur);
        let k_in = c - (lo_end - a_prev);
        if !(bessel_event(tau, 0.0, b0, k_out, None, rng)? && bessel_event(t - tau, 0.0, b1, k_out, None, rng)?) {
            continue;
        }
        let in0 = bessel_event(tau, 0.0, b0, k_in, Some(k_out), rng)?;
        let in1 = bessel_event(t - tau, 0.0, b1, k_in, Some(k_out), rng)?;
        // paths in both the max-set and the min-set are proposed twice
        if !(in0 && in1) && rng.random::<bool>() {
            continue;
        }
        let label = |inside: bool, b: f64| {
            if inside {
                Gap::Bessel { cap: k_in, reach: None }
            } else if b >= k_in {
                Gap::Bessel { cap: k_out, reach: None }
            } else {
                Gap::Bessel { cap: k_out, reach: Some(k_in) }
            }
        };
        let mu = s * c;
        let (lo, hi) = (x.min(y) - a_cur, x.max(y) + a_cur);
        return Ok(BridgeSkeleton {
            knots: vec![(0.0, x), (tau, mu), (t, y)],
            gaps: vec![label(in0, b0), label(in1, b1)],
            layer: Some((lo, hi)),
            extremum: Some(Extremum { time: tau, value: mu, kind }),
        });
    }
    Err(Error::NonConvergence(REJECTION_CAP))
}

/// Sample the layer of a plain skeleton and decompose it at its extremum.
pub fn layer_and_decompose(skeleton: &BridgeSkeleton, layers: &LayerSequence, rng: &mut dyn RngCore) -> Result<BridgeSkeleton> {
    let i = sample_layer(skeleton.horizon(), skeleton.start(), skeleton.end(), layers, rng)?;
    sample_extremum_and_decompose(skeleton, i, layers, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn layer_levels() {
        let l = LayerSequence::explicit(vec![0.5, 1.5]).unwrap();
        assert_eq!(l.level(0), 0.0);
        assert_eq!(l.level(2), 1.5);
        assert_eq!(l.level(4), 3.5);
        assert!(LayerSequence::explicit(vec![1.0, 1.0]).is_err());
        assert!(LayerSequence::linear(0.0).is_err());
    }

    #[test]
    fn inverse_gaussian_mean_is_stable_for_extreme_shapes() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for &(mu, lam) in &[(1.0, 1.0), (3.0, 1e-3), (0.2, 50.0)] {
            let n = 200_000;
            let m: f64 = (0..n).map(|_| inverse_gaussian(mu, lam, &mut rng)).sum::<f64>() / n as f64;
            let sd = (mu * mu * mu / lam).sqrt() / (n as f64).sqrt();
            assert!((m - mu).abs() < 5.0 * sd, "{mu} {lam}: {m}");
        }
    }

    #[test]
    fn max_band_sample_stays_in_band() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..1000 {
            let c = sample_max_in_band(1.0, 0.2, -0.3, 0.7, 1.2, &mut rng);
            assert!((0.7..=1.2).contains(&c));
        }
    }

    #[test]
    fn unconditional_max_matches_reflection_law() {
        // P(max ≥ c) = exp(−2(c−x)(c−y)/T)
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (t, x, y) = (2.0, 0.0, 0.5);
        let n = 100_000;
        let c0 = 1.2;
        let hits = (0..n).filter(|_| sample_max_in_band(t, x, y, 0.5, f64::INFINITY, &mut rng) >= c0).count();
        let p = (-2.0 * (c0 - x) * (c0 - y) / t).exp();
        let se = (p * (1.0 - p) / n as f64).sqrt();
        assert!((hits as f64 / n as f64 - p).abs() < 4.0 * se);
    }

    #[test]
    fn decomposed_path_respects_extremum() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let layers = LayerSequence::linear(0.5).unwrap();
        for _ in 0..200 {
            let base = BridgeSkeleton::new(1.0, 0.3, -0.4).unwrap();
            let mut sk = layer_and_decompose(&base, &layers, &mut rng).unwrap();
            let e = sk.extremum().unwrap();
            let (lo, hi) = sk.value_bounds();
            for k in 1..10 {
                let v = sk.interpolate(k as f64 / 10.0, &mut rng).unwrap();
                assert!(v >= lo - 1e-12 && v <= hi + 1e-12);
                match e.kind {
                    ExtremumKind::Max => assert!(v <= e.value),
                    ExtremumKind::Min => assert!(v >= e.value),
                }
            }
        }
    }
}
