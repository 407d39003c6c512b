//! Equality constraints and the constrained Gaussian endpoint proposals.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::RngCore;
use rand_distr::{Distribution, StandardNormal};

use crate::directional::{log_vmf_partition, sample_vmf};
use crate::error::{Error, Result};
use crate::optim::golden_max;

/// `{y : A y = c}` with `A` of full row rank.
#[derive(Debug, Clone)]
pub struct LinearConstraint {
    a: DMatrix<f64>,
    c: DVector<f64>,
    // thin SVD A = U S Vᵀ
    u: DMatrix<f64>,
    s: DVector<f64>,
    v: DMatrix<f64>,
}

impl LinearConstraint {
    pub fn new(a: DMatrix<f64>, c: DVector<f64>) -> Result<Self> {
        let (k, n) = a.shape();
        if k == 0 || k > n || c.len() != k {
            return Err(Error::Parameter(format!("constraint needs 1 <= k <= n and |c| = k (k={k}, n={n}, |c|={})", c.len())));
        }
        let svd = a.clone().svd(true, true);
        let s = svd.singular_values.clone();
        let smax = s.max();
        let smin = s.min();
        if !(smin > 1e-10 * smax) {
            return Err(Error::RankDeficient(smin / smax));
        }
        let u = svd.u.ok_or(Error::RankDeficient(0.0))?;
        let v = svd.v_t.ok_or(Error::RankDeficient(0.0))?.transpose();
        Ok(Self { a, c, u, s, v })
    }

    /// `Σ y = total` over `n` coordinates.
    pub fn sum(n: usize, total: f64) -> Result<Self> {
        Self::new(DMatrix::from_element(1, n, 1.0), DVector::from_element(1, total))
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn rhs(&self) -> &DVector<f64> {
        &self.c
    }

    pub fn ambient_dim(&self) -> usize {
        self.a.ncols()
    }

    pub fn residual(&self, y: &[f64]) -> DVector<f64> {
        &self.a * DVector::from_column_slice(y) - &self.c
    }

    // S⁻¹ Uᵀ (c − A x)
    fn rotated_gap(&self, x: &[f64]) -> DVector<f64> {
        let r = &self.c - &self.a * DVector::from_column_slice(x);
        let mut z = self.u.transpose() * r;
        for (zi, si) in z.iter_mut().zip(self.s.iter()) {
            *zi /= si;
        }
        z
    }

    /// Draw `y ~ N(x, T I)` conditioned on `A y = c`.
    pub fn sample_gaussian(&self, x: &[f64], t: f64, rng: &mut dyn RngCore, out: &mut [f64]) {
        let n = x.len();
        let shift = &self.v * self.rotated_gap(x);
        let xi = DVector::from_fn(n, |_, _| StandardNormal.sample(rng));
        // project the noise onto the null space of A
        let free = &xi - &self.v * (self.v.transpose() * &xi);
        let st = t.sqrt();
        for i in 0..n {
            out[i] = x[i] + shift[i] + st * free[i];
        }
    }

    /// `ln Z_H(x) − max ln Z_H = −(c − Ax)ᵀ(AAᵀ)⁻¹(c − Ax)/(2T)`.
    pub fn log_acceptance_weight(&self, x: &[f64], t: f64) -> f64 {
        -0.5 * self.rotated_gap(x).norm_squared() / t
    }
}

/// Sample `y ~ N(x, T I)` restricted to `A y = c`.
pub fn sample_gaussian_linear(x: &[f64], t: f64, constraint: &LinearConstraint, rng: &mut dyn RngCore) -> Vec<f64> {
    let mut y = vec![0.0; x.len()];
    constraint.sample_gaussian(x, t, rng, &mut y);
    y
}

/// Stage-one acceptance probability for linear constraints.
pub fn linear_acceptance_weight(x: &[f64], t: f64, constraint: &LinearConstraint) -> f64 {
    constraint.log_acceptance_weight(x, t).exp()
}

/// `{y : ‖y − c‖ = r}`, optionally restricted to the affine subspace
/// `c + span(B)` for a matrix `B` with orthonormal columns.
#[derive(Debug, Clone, PartialEq)]
pub struct SphereConstraint {
    center: Vec<f64>,
    radius: f64,
    basis: Option<DMatrix<f64>>,
}

impl SphereConstraint {
    pub fn new(center: Vec<f64>, radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) || center.len() < 2 {
            return Err(Error::Parameter("sphere needs a positive radius in at least two dimensions".into()));
        }
        Ok(Self { center, radius, basis: None })
    }

    /// Sphere of radius `r` about `c` inside `c + span(directions)`; the
    /// directions are orthonormalised and must span at least two dimensions.
    pub fn in_subspace(center: Vec<f64>, radius: f64, directions: &DMatrix<f64>) -> Result<Self> {
        let n = center.len();
        if directions.nrows() != n {
            return Err(Error::Parameter("direction vectors must live in the ambient space".into()));
        }
        let cols: Vec<Vec<f64>> = directions.column_iter().map(|c| c.iter().copied().collect()).collect();
        let basis = orthonormalise(&[], &cols, 1e-10)?;
        if basis.len() < 2 {
            return Err(Error::RankDeficient(0.0));
        }
        let mut s = Self::new(center, radius)?;
        if basis.len() < n {
            s.basis = Some(DMatrix::from_fn(n, basis.len(), |i, j| basis[j][i]));
        }
        Ok(s)
    }

    /// Intersection of the sphere `‖y − c‖ = r` with the hyperplane
    /// `⟨a, y⟩ = b`.
    pub fn plane_section(a: &[f64], b: f64, c: &[f64], r: f64) -> Result<Self> {
        let n = a.len();
        let an = a.iter().map(|v| v * v).sum::<f64>().sqrt();
        if c.len() != n || n < 3 || !(an > 0.0) {
            return Err(Error::Parameter("plane section needs n >= 3 and a non-zero normal".into()));
        }
        let unit: Vec<f64> = a.iter().map(|v| v / an).collect();
        let off = (b - dot(a, c)) / an;
        let rad2 = r * r - off * off;
        if !(rad2 > 0.0) {
            return Err(Error::Parameter(format!("plane misses the sphere (distance {} >= radius {r})", off.abs())));
        }
        let centre: Vec<f64> = c.iter().zip(&unit).map(|(ci, ui)| ci + off * ui).collect();
        let axes: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                let mut e = vec![0.0; n];
                e[i] = 1.0;
                e
            })
            .collect();
        let basis = orthonormalise(&[unit], &axes, 1e-8)?;
        let m = DMatrix::from_fn(n, n - 1, |i, j| basis[j][i]);
        Ok(Self { center: centre, radius: rad2.sqrt(), basis: Some(m) })
    }

    pub fn center(&self) -> &[f64] {
        &self.center
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// Dimension of the space the sphere spans (`p` for `S^{p−1}`).
    pub fn sphere_dim(&self) -> usize {
        self.basis.as_ref().map_or(self.center.len(), |b| b.ncols())
    }

    /// Coordinates of `x − c` within the sphere's subspace and the squared
    /// distance of `x` from that subspace.
    fn split(&self, x: &[f64]) -> (Vec<f64>, f64) {
        let d: Vec<f64> = x.iter().zip(&self.center).map(|(a, b)| a - b).collect();
        match &self.basis {
            None => (d, 0.0),
            Some(b) => {
                let coords: Vec<f64> = (0..b.ncols()).map(|j| b.column(j).iter().zip(&d).map(|(u, v)| u * v).sum()).collect();
                let total: f64 = d.iter().map(|v| v * v).sum();
                let inside: f64 = coords.iter().map(|v| v * v).sum();
                (coords, (total - inside).max(0.0))
            }
        }
    }

    fn embed(&self, dir: &[f64]) -> Vec<f64> {
        match &self.basis {
            None => self.center.iter().zip(dir).map(|(c, d)| c + self.radius * d).collect(),
            Some(b) => {
                let v = b * DVector::from_column_slice(dir);
                self.center.iter().zip(v.iter()).map(|(c, d)| c + self.radius * d).collect()
            }
        }
    }

    fn log_partition(&self, rho: f64, t: f64) -> f64 {
        -0.5 * rho * rho / t + log_vmf_partition(self.sphere_dim(), self.radius * rho / t)
    }

    /// `max_x ln Z_H(x)` for horizon `t`, attained in the subspace at a
    /// distance from the centre in `[0, r]`.
    pub fn log_weight_peak(&self, t: f64) -> f64 {
        let (_, v) = golden_max(|rho| self.log_partition(rho, t), 0.0, self.radius, 1e-9 * self.radius);
        v.max(self.log_partition(0.0, t))
    }

    /// Uniform point on the sphere.
    pub fn sample_uniform(&self, rng: &mut dyn RngCore) -> Vec<f64> {
        let q = self.sphere_dim();
        let mut dir = vec![0.0; q];
        let mut norm = 0.0;
        while norm < 1e-300 {
            dir.iter_mut().for_each(|v| *v = StandardNormal.sample(rng));
            norm = dir.iter().map(|v| v * v).sum::<f64>();
        }
        let norm = norm.sqrt();
        dir.iter_mut().for_each(|v| *v /= norm);
        self.embed(&dir)
    }

    /// Distance of `y` from the constraint set's equations.
    pub fn violation(&self, y: &[f64]) -> f64 {
        let (coords, perp) = self.split(y);
        let d = coords.iter().map(|v| v * v).sum::<f64>().sqrt();
        (d - self.radius).abs().max(perp.sqrt())
    }
}

/// Gram–Schmidt `candidates` against `fixed` (assumed orthonormal), keeping
/// vectors whose residual norm exceeds `tol`. Returns only the new vectors.
fn orthonormalise(fixed: &[Vec<f64>], candidates: &[Vec<f64>], tol: f64) -> Result<Vec<Vec<f64>>> {
    let mut all: Vec<Vec<f64>> = fixed.to_vec();
    let n = candidates.first().map_or(0, |c| c.len());
    for c in candidates {
        if all.len() >= n {
            break;
        }
        let mut v = c.clone();
        for _ in 0..2 {
            for u in &all {
                let d = dot(&v, u);
                v.iter_mut().zip(u).for_each(|(a, b)| *a -= d * b);
            }
        }
        let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if norm > tol {
            v.iter_mut().for_each(|a| *a /= norm);
            all.push(v);
        }
    }
    if all.is_empty() && !candidates.is_empty() {
        return Err(Error::RankDeficient(0.0));
    }
    Ok(all.split_off(fixed.len()))
}

/// Parameters of the proposal `y ~ N(x, T I)` restricted to a sphere, which
/// is von Mises–Fisher in the direction of `y − c`. The mean direction is
/// expressed in the sphere's subspace coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct VmfParams {
    pub mean_direction: Vec<f64>,
    pub kappa: f64,
    pub center: Vec<f64>,
    pub radius: f64,
}

impl VmfParams {
    pub fn new(x: &[f64], t: f64, sphere: &SphereConstraint) -> Result<Self> {
        let (coords, _) = sphere.split(x);
        let rho = coords.iter().map(|v| v * v).sum::<f64>().sqrt();
        if rho < 1e-12 * sphere.radius {
            return Err(Error::DegenerateCenter);
        }
        Ok(Self {
            mean_direction: coords.iter().map(|v| v / rho).collect(),
            kappa: sphere.radius * rho / t,
            center: sphere.center.clone(),
            radius: sphere.radius,
        })
    }
}

/// Stage-one log acceptance weight `ln Z_H(x) − max ln Z_H` for a sphere.
pub fn sphere_log_acceptance_weight(x: &[f64], t: f64, sphere: &SphereConstraint, log_peak: f64) -> f64 {
    let (coords, perp) = sphere.split(x);
    let rho = coords.iter().map(|v| v * v).sum::<f64>().sqrt();
    (sphere.log_partition(rho, t) - log_peak).min(0.0) - 0.5 * perp / t
}

/// Draw `y ~ N(x, T I)` restricted to the sphere and return it with the
/// stage-one log acceptance weight. `log_peak` is
/// [`SphereConstraint::log_weight_peak`] for the same `t`.
pub fn sample_vmf_endpoint(
    x: &[f64],
    t: f64,
    sphere: &SphereConstraint,
    log_peak: f64,
    rng: &mut dyn RngCore,
) -> Result<(Vec<f64>, f64)> {
    let p = VmfParams::new(x, t, sphere)?;
    let mut dir = vec![0.0; p.mean_direction.len()];
    sample_vmf(&p.mean_direction, p.kappa, rng, &mut dir);
    Ok((sphere.embed(&dir), sphere_log_acceptance_weight(x, t, sphere, log_peak)))
}

type VecMap = dyn Fn(&[f64], &mut [f64]) + Send + Sync;
type JacMap = dyn Fn(&[f64], &mut DMatrix<f64>) + Send + Sync;
type Sampler = dyn Fn(&mut dyn RngCore, &mut [f64]) + Send + Sync;

/// `{y : h(y) = 0}` for smooth `h: ℝⁿ → ℝᵏ` with surjective derivative.
#[derive(Clone)]
pub struct GeneralConstraint {
    n: usize,
    k: usize,
    h: Arc<VecMap>,
    jac: Arc<JacMap>,
    tolerance: f64,
    seed: Vec<f64>,
    exact: Option<Arc<Sampler>>,
}

impl fmt::Debug for GeneralConstraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GeneralConstraint")
            .field("n", &self.n)
            .field("k", &self.k)
            .field("tolerance", &self.tolerance)
            .field("exact_uniform", &self.exact.is_some())
            .finish()
    }
}

impl GeneralConstraint {
    /// `h` writes `k` values, `jac` fills a `k × n` matrix; `seed` is a point
    /// near the manifold from which a feasible start is found.
    pub fn new<H, J>(n: usize, k: usize, h: H, jac: J, seed: Vec<f64>) -> Result<Self>
    where
        H: Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
        J: Fn(&[f64], &mut DMatrix<f64>) + Send + Sync + 'static,
    {
        if k == 0 || k >= n || seed.len() != n {
            return Err(Error::Parameter(format!("general constraint needs 0 < k < n and a seed of length n (k={k}, n={n})")));
        }
        Ok(Self { n, k, h: Arc::new(h), jac: Arc::new(jac), tolerance: 1e-9, seed, exact: None })
    }

    pub fn with_tolerance(mut self, tol: f64) -> Self {
        self.tolerance = tol;
        self
    }

    /// Attach an exact sampler of the uniform law on the manifold.
    pub fn with_exact_uniform<S>(mut self, s: S) -> Self
    where
        S: Fn(&mut dyn RngCore, &mut [f64]) + Send + Sync + 'static,
    {
        self.exact = Some(Arc::new(s));
        self
    }

    /// Intersection of the hyperplane `⟨a, y⟩ = b` with the sphere
    /// `‖y − c‖ = r`, a round sphere of dimension `n − 2` inside the plane,
    /// with an exact uniform sampler attached.
    pub fn plane_sphere(a: Vec<f64>, b: f64, c: Vec<f64>, r: f64) -> Result<Self> {
        let n = a.len();
        if c.len() != n || n < 3 {
            return Err(Error::Parameter("plane-sphere constraint needs n >= 3".into()));
        }
        let an = a.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !(an > 0.0 && r > 0.0) {
            return Err(Error::Parameter("plane normal and radius must be non-zero".into()));
        }
        let unit: Vec<f64> = a.iter().map(|v| v / an).collect();
        let off = (b - dot(&a, &c)) / an;
        let rad2 = r * r - off * off;
        if !(rad2 > 0.0) {
            return Err(Error::Parameter(format!("plane misses the sphere (distance {} >= radius {r})", off.abs())));
        }
        let centre: Vec<f64> = c.iter().zip(&unit).map(|(ci, ui)| ci + off * ui).collect();
        let rho = rad2.sqrt();
        let seed: Vec<f64> = {
            // any unit vector orthogonal to the normal
            let mut e = vec![0.0; n];
            let j = (0..n).min_by(|&i, &k| unit[i].abs().total_cmp(&unit[k].abs())).unwrap_or(0);
            e[j] = 1.0;
            let d = dot(&e, &unit);
            let mut e: Vec<f64> = e.iter().zip(&unit).map(|(ei, ui)| ei - d * ui).collect();
            let en = e.iter().map(|v| v * v).sum::<f64>().sqrt();
            e.iter_mut().for_each(|v| *v /= en);
            centre.iter().zip(&e).map(|(m, ei)| m + rho * ei).collect()
        };
        let (a1, c1, a2, c2) = (a.clone(), c.clone(), a, c);
        let (u_s, centre_s) = (unit, centre);
        Ok(Self::new(
            n,
            2,
            move |y, out| {
                out[0] = dot(&a1, y) - b;
                out[1] = y.iter().zip(&c1).map(|(yi, ci)| (yi - ci) * (yi - ci)).sum::<f64>() - r * r;
            },
            move |y, j| {
                for i in 0..y.len() {
                    j[(0, i)] = a2[i];
                    j[(1, i)] = 2.0 * (y[i] - c2[i]);
                }
            },
            seed,
        )?
        .with_exact_uniform(move |rng, out| {
            let mut norm = 0.0;
            while norm < 1e-300 {
                for v in out.iter_mut() {
                    *v = StandardNormal.sample(rng);
                }
                let d = dot(out, &u_s);
                out.iter_mut().zip(&u_s).for_each(|(v, ui)| *v -= d * ui);
                norm = out.iter().map(|v| v * v).sum::<f64>();
            }
            let s = rho / norm.sqrt();
            out.iter_mut().zip(&centre_s).for_each(|(v, m)| *v = m + s * *v);
        }))
    }

    pub fn ambient_dim(&self) -> usize {
        self.n
    }

    pub fn codim(&self) -> usize {
        self.k
    }

    pub fn tolerance(&self) -> f64 {
        self.tolerance
    }

    pub fn seed(&self) -> &[f64] {
        &self.seed
    }

    pub fn has_exact_uniform(&self) -> bool {
        self.exact.is_some()
    }

    pub fn sample_exact_uniform(&self, rng: &mut dyn RngCore, out: &mut [f64]) -> bool {
        match &self.exact {
            Some(s) => {
                s(rng, out);
                true
            }
            None => false,
        }
    }

    pub fn eval(&self, y: &[f64], out: &mut [f64]) {
        (self.h)(y, out)
    }

    pub fn jacobian(&self, y: &[f64]) -> DMatrix<f64> {
        let mut j = DMatrix::zeros(self.k, self.n);
        (self.jac)(y, &mut j);
        j
    }

    pub fn violation(&self, y: &[f64]) -> f64 {
        let mut h = vec![0.0; self.k];
        self.eval(y, &mut h);
        h.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Gauss–Newton projection of `start` onto the manifold along the rows of
    /// the Jacobian.
    pub fn project(&self, start: &[f64], max_iter: usize) -> Result<Vec<f64>> {
        let mut y = start.to_vec();
        let mut h = vec![0.0; self.k];
        for _ in 0..max_iter {
            self.eval(&y, &mut h);
            if h.iter().all(|v| v.abs() <= self.tolerance) {
                return Ok(y);
            }
            let j = self.jacobian(&y);
            let g = &j * j.transpose();
            let lam = g.lu().solve(&DVector::from_column_slice(&h)).ok_or(Error::ProjectionFailure)?;
            let step = j.transpose() * lam;
            for i in 0..self.n {
                y[i] -= step[i];
            }
        }
        Err(Error::ProjectionFailure)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// The constraint set `H` of a fusion problem.
#[derive(Debug, Clone)]
pub enum Constraint {
    Linear(LinearConstraint),
    Sphere(SphereConstraint),
    General(GeneralConstraint),
}

impl Constraint {
    pub fn ambient_dim(&self) -> usize {
        match self {
            Constraint::Linear(c) => c.ambient_dim(),
            Constraint::Sphere(s) => s.center().len(),
            Constraint::General(g) => g.ambient_dim(),
        }
    }

    /// Largest absolute equation residual at `y`.
    pub fn violation(&self, y: &[f64]) -> f64 {
        match self {
            Constraint::Linear(c) => c.residual(y).amax(),
            Constraint::Sphere(s) => s.violation(y),
            Constraint::General(g) => g.violation(y),
        }
    }
}
