//! Alternating-series representations of Brownian and Bessel bridge
//! no-exit probabilities, and exact retrospective Bernoulli draws from them.
//!
//! Nothing here truncates a series at a fixed order: a Bernoulli decision is
//! only taken once the uniform is strictly separated from the bracket, or the
//! bracket has collapsed to a single floating-point value.

use crate::error::{Error, Result};

/// Maximum number of series terms before giving up.
pub const TERM_CAP: usize = 10_000;

/// Source of successively tighter brackets `[lo, hi]` around a quantity.
pub trait Bounds {
    fn refine(&mut self) -> Result<(f64, f64)>;
}

/// A quantity known in closed form.
#[derive(Debug, Clone, Copy)]
pub struct Exact(pub f64);

impl Bounds for Exact {
    fn refine(&mut self) -> Result<(f64, f64)> {
        Ok((self.0, self.0))
    }
}

#[derive(Debug, Clone, Copy)]
enum Kind {
    /// Brownian bridge from `x` to `y` over `[0, t]` staying in `(−k, k)`.
    Crossing { t: f64, x: f64, y: f64, k: f64 },
    /// Bessel(3) bridge from 0 to `y > 0` over `[0, t]` staying below `k`.
    BesselFromZero { t: f64, y: f64, k: f64 },
}

/// Partial sums `S_n = 1 − c₁ + c₂ − c₃ + …` of a probability whose terms
/// decrease from index `first_monotone` onwards, so consecutive partial sums
/// bracket the limit from there on.
#[derive(Debug, Clone)]
pub struct AlternatingSeries {
    kind: Kind,
    first_monotone: usize,
    n: usize,
    prev: f64,
    cur: f64,
    // 1 − Σ over completed (odd, even) pairs, evaluated pairwise for stability
    even_sum: f64,
    collapsed: bool,
}

impl AlternatingSeries {
    /// `p(t, x, y, k)`: probability that a Brownian bridge from `x` to `y`
    /// over `[0, t]` stays inside `(−k, k)`.
    pub fn crossing(t: f64, x: f64, y: f64, k: f64) -> Result<Self> {
        if !(t > 0.0 && k > 0.0 && x.abs() < k && y.abs() < k) {
            return Err(Error::Parameter(format!(
                "crossing series needs t > 0 and |x|, |y| < k (t={t}, x={x}, y={y}, k={k})"
            )));
        }
        Ok(Self::start(Kind::Crossing { t, x, y, k }, 1))
    }

    /// `q(t, 0, y, k)`: probability that a Bessel(3) bridge from 0 to `y`
    /// stays below `k`.
    pub fn bessel_from_zero(t: f64, y: f64, k: f64) -> Result<Self> {
        if !(t > 0.0 && y > 0.0 && k > y) {
            return Err(Error::Parameter(format!(
                "Bessel series needs t > 0 and 0 < y < k (t={t}, y={y}, k={k})"
            )));
        }
        // ζ_j ≥ ξ_j ≥ ζ_{j+1} holds once 3 j² k² ≥ t
        let j0 = ((t / (3.0 * k * k)).sqrt().ceil() as usize).max(1);
        Ok(Self::start(Kind::BesselFromZero { t, y, k }, 2 * j0 - 1))
    }

    fn start(kind: Kind, first_monotone: usize) -> Self {
        Self { kind, first_monotone, n: 0, prev: 1.0, cur: 1.0, even_sum: 1.0, collapsed: false }
    }

    /// Odd term `c_{2j−1}` and the pair difference `c_{2j−1} − c_{2j}`.
    fn pair(&self, j: usize) -> (f64, f64) {
        let jf = j as f64;
        match self.kind {
            Kind::Crossing { t, x, y, k } => {
                let sig = |x: f64, y: f64| {
                    (-(2.0 / t) * (2.0 * jf * k - (k + x)) * (2.0 * jf * k - (k + y))).exp()
                };
                let tau = |x: f64, y: f64| (-(2.0 * jf / t) * (4.0 * jf * k * k + 2.0 * k * (x - y))).exp();
                let s = sig(x, y) + sig(-x, -y);
                let ta = tau(x, y) + tau(-x, -y);
                (s, s - ta)
            }
            Kind::BesselFromZero { t, y, k } => {
                let jk = jf * k;
                let a = -2.0 * jk * jk / t;
                let b = 2.0 * jk * y / t;
                let zeta = (2.0 * jk - y) * (a + b).exp() / y;
                // (ζ − ξ)/y = 2 e^a [2jk sinh(b)/y − cosh(b)], sinh(b)/y = (2jk/t) sinh(b)/b
                let sinhc = if b.abs() < 1e-8 { 1.0 + b * b / 6.0 } else { b.sinh() / b };
                let diff = 2.0 * a.exp() * (2.0 * jk * (2.0 * jk / t) * sinhc - b.cosh());
                (zeta, diff)
            }
        }
    }

    fn push_term(&mut self) -> Result<()> {
        if self.n >= TERM_CAP {
            return Err(Error::NonConvergence(self.n));
        }
        let next = self.n + 1;
        let j = next.div_ceil(2);
        let (odd, diff) = self.pair(j);
        self.prev = self.cur;
        if next % 2 == 1 {
            self.cur = self.even_sum - odd;
            if odd == 0.0 && next >= self.first_monotone {
                self.collapsed = true;
            }
        } else {
            self.even_sum -= diff;
            self.cur = self.even_sum;
        }
        self.n = next;
        Ok(())
    }

    /// Number of terms consumed so far.
    pub fn terms(&self) -> usize {
        self.n
    }

    /// Sum the series until terms vanish; for tests and diagnostics.
    pub fn value(mut self) -> Result<f64> {
        loop {
            let (lo, hi) = self.refine()?;
            if hi - lo <= 1e-15 || self.collapsed {
                return Ok(0.5 * (lo + hi));
            }
        }
    }
}

impl Bounds for AlternatingSeries {
    fn refine(&mut self) -> Result<(f64, f64)> {
        if self.collapsed {
            let v = self.cur.clamp(0.0, 1.0);
            return Ok((v, v));
        }
        self.push_term()?;
        while self.n < self.first_monotone {
            self.push_term()?;
        }
        let lo = self.prev.min(self.cur).max(0.0);
        let hi = self.prev.max(self.cur).min(1.0);
        if self.collapsed {
            let v = self.cur.clamp(0.0, 1.0);
            return Ok((v, v));
        }
        Ok((lo, hi.max(lo)))
    }
}

/// Decide `u < num / den` by refining both brackets until separated.
pub fn bernoulli_ratio(u: f64, num: &mut dyn Bounds, den: &mut dyn Bounds) -> Result<bool> {
    loop {
        let (nl, nh) = num.refine()?;
        let (dl, dh) = den.refine()?;
        if u * dh < nl {
            return Ok(true);
        }
        if u * dl >= nh {
            return Ok(false);
        }
        if nl == nh && dl == dh {
            return Ok(u * dl < nl);
        }
    }
}

/// Decide `u < p` by refining the bracket of `p`.
pub fn bernoulli(u: f64, p: &mut dyn Bounds) -> Result<bool> {
    bernoulli_ratio(u, p, &mut Exact(1.0))
}

/// Probability that a Brownian bridge from `x` to `y` over `[0, t]` stays in
/// `(−k, k)`.
pub fn crossing_probability(t: f64, x: f64, y: f64, k: f64) -> Result<f64> {
    AlternatingSeries::crossing(t, x, y, k)?.value()
}

/// Bounds on the probability that a Bessel(3) bridge from `x ≥ 0` to `y ≥ 0`
/// over `[0, t]` stays below `k`.
pub enum BesselNoLeave {
    FromZero(AlternatingSeries),
    // Brownian bridge confined to (0, k), divided by the exact probability of
    // staying positive
    Interior(AlternatingSeries, f64),
}

impl BesselNoLeave {
    pub fn new(t: f64, x: f64, y: f64, k: f64) -> Result<Self> {
        if !(x >= 0.0 && y >= 0.0 && k > x.max(y) && t > 0.0) {
            return Err(Error::Parameter(format!(
                "Bessel no-leave needs x, y >= 0 and k > max(x, y) (x={x}, y={y}, k={k})"
            )));
        }
        if x == 0.0 || y == 0.0 {
            Ok(Self::FromZero(AlternatingSeries::bessel_from_zero(t, x.max(y), k)?))
        } else {
            let h = k / 2.0;
            let den = -(-2.0 * x * y / t).exp_m1();
            Ok(Self::Interior(AlternatingSeries::crossing(t, x - h, y - h, h)?, den))
        }
    }
}

impl Bounds for BesselNoLeave {
    fn refine(&mut self) -> Result<(f64, f64)> {
        match self {
            Self::FromZero(s) => s.refine(),
            Self::Interior(s, den) => {
                let (lo, hi) = s.refine()?;
                Ok(((lo / *den).min(1.0), (hi / *den).min(1.0)))
            }
        }
    }
}

/// Numerical value of the Bessel no-leave probability.
pub fn bessel_noleave_probability(t: f64, x: f64, y: f64, k: f64) -> Result<f64> {
    let mut b = BesselNoLeave::new(t, x, y, k)?;
    loop {
        let (lo, hi) = b.refine()?;
        if hi - lo <= 1e-15 {
            return Ok(0.5 * (lo + hi));
        }
    }
}
