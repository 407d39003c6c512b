//! Constrained Hamiltonian Monte Carlo on `{h = 0}` with a RATTLE integrator
//! and a per-step reverse projection check.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, RngCore};
use rand_distr::{Distribution, StandardNormal};

use crate::constraint::GeneralConstraint;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChmcConfig {
    pub step_size: f64,
    pub leapfrog_steps: usize,
    pub newton_tol: f64,
    pub newton_max_iter: usize,
}

impl Default for ChmcConfig {
    fn default() -> Self {
        Self { step_size: 0.1, leapfrog_steps: 10, newton_tol: 1e-9, newton_max_iter: 50 }
    }
}

impl ChmcConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.step_size > 0.0 && self.leapfrog_steps >= 1 && self.newton_tol > 0.0 && self.newton_max_iter >= 1) {
            return Err(Error::Parameter(format!("invalid CHMC configuration {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ChmcDiagnostics {
    pub steps: u64,
    pub accepted: u64,
    pub reverse_failures: u64,
    pub projection_failures: u64,
}

impl ChmcDiagnostics {
    pub fn acceptance_rate(&self) -> f64 {
        if self.steps == 0 {
            0.0
        } else {
            self.accepted as f64 / self.steps as f64
        }
    }
}

/// Potential energy `U` (negative log target with respect to the surface
/// measure) and its gradient.
pub trait Potential: Sync {
    fn value(&self, y: &[f64]) -> f64;
    fn gradient(&self, y: &[f64], grad: &mut [f64]);
}

/// The zero potential, whose equilibrium is the uniform law on the manifold.
#[derive(Debug, Clone, Copy, Default)]
pub struct Flat;

impl Potential for Flat {
    fn value(&self, _y: &[f64]) -> f64 {
        0.0
    }
    fn gradient(&self, _y: &[f64], grad: &mut [f64]) {
        grad.iter_mut().for_each(|g| *g = 0.0);
    }
}

/// Potential given by a pair of closures.
pub struct FnPotential<V, G> {
    pub value: V,
    pub gradient: G,
}

impl<V, G> Potential for FnPotential<V, G>
where
    V: Fn(&[f64]) -> f64 + Sync,
    G: Fn(&[f64], &mut [f64]) + Sync,
{
    fn value(&self, y: &[f64]) -> f64 {
        (self.value)(y)
    }
    fn gradient(&self, y: &[f64], grad: &mut [f64]) {
        (self.gradient)(y, grad)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChmcState {
    pub position: Vec<f64>,
    pub potential: f64,
    pub diagnostics: ChmcDiagnostics,
}

impl ChmcState {
    pub fn new(position: Vec<f64>, potential: &dyn Potential) -> Self {
        let u = potential.value(&position);
        Self { position, potential: u, diagnostics: ChmcDiagnostics::default() }
    }
}

enum StepFailure {
    Projection,
    Reverse,
}

/// Solve `h(q̃ − J₀ᵀ μ) = 0` for `μ` by Newton's method.
fn project_along(c: &GeneralConstraint, q_tilde: &[f64], j0: &DMatrix<f64>, cfg: &ChmcConfig) -> Option<Vec<f64>> {
    let n = q_tilde.len();
    let k = c.codim();
    let mut mu = DVector::zeros(k);
    let mut q = q_tilde.to_vec();
    let mut h = vec![0.0; k];
    let mut converged = false;
    for _ in 0..cfg.newton_max_iter {
        c.eval(&q, &mut h);
        let small = h.iter().all(|v| v.abs() <= cfg.newton_tol);
        if small && converged {
            return Some(q);
        }
        // one extra iteration once inside tolerance
        converged = small;
        let j = c.jacobian(&q);
        let g = &j * j0.transpose();
        let delta = g.lu().solve(&DVector::from_column_slice(&h))?;
        mu += delta;
        let shift = j0.transpose() * &mu;
        for i in 0..n {
            q[i] = q_tilde[i] - shift[i];
        }
        if !q.iter().all(|v| v.is_finite()) {
            return None;
        }
    }
    c.eval(&q, &mut h);
    if h.iter().all(|v| v.abs() <= cfg.newton_tol) {
        Some(q)
    } else {
        None
    }
}

/// Project `p` onto the tangent space `ker J(q)`.
fn tangent_project(c: &GeneralConstraint, q: &[f64], p: &mut [f64]) -> Option<()> {
    let j = c.jacobian(q);
    let pv = DVector::from_column_slice(p);
    let lam = (&j * j.transpose()).lu().solve(&(&j * &pv))?;
    let corr = j.transpose() * lam;
    for i in 0..p.len() {
        p[i] -= corr[i];
    }
    Some(())
}

// one RATTLE step; returns the new position and momentum
fn rattle(
    c: &GeneralConstraint,
    u: &dyn Potential,
    q0: &[f64],
    p0: &[f64],
    cfg: &ChmcConfig,
    grad: &mut [f64],
) -> std::result::Result<(Vec<f64>, Vec<f64>), StepFailure> {
    let n = q0.len();
    let eps = cfg.step_size;
    let advance = |q: &[f64], p: &[f64], grad: &mut [f64]| -> Option<Vec<f64>> {
        u.gradient(q, grad);
        let qt: Vec<f64> = (0..n).map(|i| q[i] + eps * (p[i] - 0.5 * eps * grad[i])).collect();
        project_along(c, &qt, &c.jacobian(q), cfg)
    };
    let q1 = advance(q0, p0, grad).ok_or(StepFailure::Projection)?;
    let mut p1: Vec<f64> = (0..n).map(|i| (q1[i] - q0[i]) / eps).collect();
    u.gradient(&q1, grad);
    for i in 0..n {
        p1[i] -= 0.5 * eps * grad[i];
    }
    tangent_project(c, &q1, &mut p1).ok_or(StepFailure::Projection)?;
    // the same map from (q1, −p1) must land back on q0
    let back: Vec<f64> = p1.iter().map(|v| -v).collect();
    let q_back = advance(&q1, &back, grad).ok_or(StepFailure::Reverse)?;
    let err = q_back.iter().zip(q0).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    if err > 10.0 * cfg.newton_tol.max(1e-12) * (1.0 + q0.iter().fold(0.0f64, |m, v| m.max(v.abs()))) {
        return Err(StepFailure::Reverse);
    }
    Ok((q1, p1))
}

/// One CHMC transition: fresh tangent momentum, `L` RATTLE steps, then a
/// Metropolis test on the Hamiltonian. Failed projections or reverse checks
/// reject the move and are counted.
pub fn chmc_step(
    state: &mut ChmcState,
    potential: &dyn Potential,
    constraint: &GeneralConstraint,
    cfg: &ChmcConfig,
    rng: &mut dyn RngCore,
) -> Result<bool> {
    let n = state.position.len();
    state.diagnostics.steps += 1;
    let mut p: Vec<f64> = (0..n).map(|_| StandardNormal.sample(rng)).collect();
    tangent_project(constraint, &state.position, &mut p).ok_or(Error::ProjectionFailure)?;
    let h0 = state.potential + 0.5 * p.iter().map(|v| v * v).sum::<f64>();
    let mut q = state.position.clone();
    let mut grad = vec![0.0; n];
    for _ in 0..cfg.leapfrog_steps {
        match rattle(constraint, potential, &q, &p, cfg, &mut grad) {
            Ok((q1, p1)) => {
                q = q1;
                p = p1;
            }
            Err(StepFailure::Projection) => {
                state.diagnostics.projection_failures += 1;
                return Ok(false);
            }
            Err(StepFailure::Reverse) => {
                state.diagnostics.reverse_failures += 1;
                return Ok(false);
            }
        }
    }
    let u1 = potential.value(&q);
    let h1 = u1 + 0.5 * p.iter().map(|v| v * v).sum::<f64>();
    let accept = rng.random::<f64>().ln() < h0 - h1;
    if accept {
        state.position = q;
        state.potential = u1;
        state.diagnostics.accepted += 1;
    }
    Ok(accept)
}

/// Adjust the step size by doubling or halving until a short pilot has an
/// acceptance rate in `[0.7, 0.9]`.
pub fn tune_step_size(
    state: &mut ChmcState,
    potential: &dyn Potential,
    constraint: &GeneralConstraint,
    mut cfg: ChmcConfig,
    pilot: usize,
    rng: &mut dyn RngCore,
) -> Result<ChmcConfig> {
    let (mut lo, mut hi) = (0.0f64, f64::INFINITY);
    for _ in 0..30 {
        let mut acc = 0;
        for _ in 0..pilot {
            if chmc_step(state, potential, constraint, &cfg, rng)? {
                acc += 1;
            }
        }
        let rate = acc as f64 / pilot as f64;
        if rate > 0.9 {
            lo = cfg.step_size;
        } else if rate < 0.7 {
            hi = cfg.step_size;
        } else {
            break;
        }
        cfg.step_size = match (lo > 0.0, hi.is_finite()) {
            (true, true) => (lo * hi).sqrt(),
            (true, false) => 2.0 * lo,
            _ => 0.5 * hi,
        };
    }
    Ok(cfg)
}

/// Run a flat-potential CHMC chain from the projected seed of `constraint`
/// and return `count` states taken every `thin` steps after `burn_in`.
pub fn uniform_on_manifold(
    constraint: &GeneralConstraint,
    cfg: &ChmcConfig,
    burn_in: usize,
    thin: usize,
    count: usize,
    rng: &mut dyn RngCore,
) -> Result<(Vec<Vec<f64>>, ChmcDiagnostics)> {
    cfg.validate()?;
    let start = constraint.project(constraint.seed(), 100)?;
    let mut state = ChmcState::new(start, &Flat);
    for _ in 0..burn_in {
        chmc_step(&mut state, &Flat, constraint, cfg, rng)?;
    }
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        for _ in 0..thin.max(1) {
            chmc_step(&mut state, &Flat, constraint, cfg, rng)?;
        }
        out.push(state.position.clone());
    }
    Ok((out, state.diagnostics))
}
