//! The constrained fusion rejection samplers.
//!
//! Both variants propose `x⁽ⁱ⁾ ~ fᵢ` independently and an endpoint `y` on the
//! constraint set, accept `(x, y)` with probability proportional to
//! `exp(−‖y − x‖²/(2T))` integrated (case 1) or evaluated (case 2), and then
//! accept each component's Langevin bridge from `x⁽ⁱ⁾` to `y⁽ⁱ⁾` by Poisson
//! thinning. An accepted `y` is an exact draw from `∏ fᵢ(yᵢ)` restricted to
//! the constraint set.

use std::fmt;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::chmc::{chmc_step, ChmcConfig, ChmcState, Flat};
use crate::constraint::{sample_vmf_endpoint, sphere_log_acceptance_weight, Constraint, GeneralConstraint};
use crate::density::ComponentDensity;
use crate::error::{Error, Result};
use crate::thinning::{accept_component, ThinningMode};

/// `m` component densities of common dimension `d`, a constraint on the
/// stacked vector `(y⁽¹⁾, …, y⁽ᵐ⁾) ∈ ℝ^{md}` and the bridge horizon `T`.
#[derive(Debug, Clone)]
pub struct FusionProblem {
    components: Vec<Arc<dyn ComponentDensity>>,
    constraint: Constraint,
    horizon: f64,
}

impl FusionProblem {
    pub fn new(components: Vec<Arc<dyn ComponentDensity>>, constraint: Constraint, horizon: f64) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::Parameter("need at least one component".into()));
        }
        let d = components[0].dim();
        if components.iter().any(|c| c.dim() != d) {
            return Err(Error::Parameter("all components must share one dimension".into()));
        }
        if constraint.ambient_dim() != d * components.len() {
            return Err(Error::Parameter(format!(
                "constraint acts on {} coordinates but the components stack to {}",
                constraint.ambient_dim(),
                d * components.len()
            )));
        }
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::Parameter(format!("horizon must be positive, got {horizon}")));
        }
        Ok(Self { components, constraint, horizon })
    }

    pub fn components(&self) -> &[Arc<dyn ComponentDensity>] {
        &self.components
    }

    pub fn constraint(&self) -> &Constraint {
        &self.constraint
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn with_horizon(&self, horizon: f64) -> Result<Self> {
        Self::new(self.components.clone(), self.constraint.clone(), horizon)
    }

    pub fn component_dim(&self) -> usize {
        self.components[0].dim()
    }
}

/// Attempt counts accumulated while producing one draw.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Diagnostics {
    pub attempts: u64,
    pub stage1_rejections: u64,
    pub stage2_rejections: u64,
    pub poisson_points: u64,
    pub bridge_points: u64,
}

impl Diagnostics {
    pub fn merge(&mut self, other: &Diagnostics) {
        self.attempts += other.attempts;
        self.stage1_rejections += other.stage1_rejections;
        self.stage2_rejections += other.stage2_rejections;
        self.poisson_points += other.poisson_points;
        self.bridge_points += other.bridge_points;
    }
}

impl fmt::Display for Diagnostics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} attempts, {} stage-1 and {} stage-2 rejections, {} Poisson points",
            self.attempts, self.stage1_rejections, self.stage2_rejections, self.poisson_points
        )
    }
}

/// One accepted draw on the constraint set.
#[derive(Debug, Clone, PartialEq)]
pub struct FusionDraw {
    pub y: Vec<f64>,
    /// stage-one endpoint tests, one per attempt
    pub attempts_stage1: u64,
    /// bridge thinning runs, one per stage-one success
    pub attempts_stage2: u64,
    pub diagnostics: Diagnostics,
    pub wall_time: Duration,
}

/// Where case 2 gets its uniform draws on the constraint set from.
#[derive(Debug, Clone, PartialEq)]
pub enum UniformSource {
    /// the constraint's exact sampler
    Exact,
    /// a flat-potential CHMC chain, one chain per block of draws
    Chmc { config: ChmcConfig, burn_in: usize, thin: usize, block: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct FusionConfig {
    pub attempt_budget: u64,
    pub thinning: ThinningMode,
    pub uniform: UniformSource,
}

impl Default for FusionConfig {
    fn default() -> Self {
        Self { attempt_budget: 1_000_000, thinning: ThinningMode::default(), uniform: UniformSource::Exact }
    }
}

/// Independent generator for draw (or block) `index` of a run seeded by
/// `seed`.
pub fn stream_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(index);
    r
}

/// A problem prepared for repeated sampling.
#[derive(Debug, Clone)]
pub struct FusionSampler {
    problem: FusionProblem,
    config: FusionConfig,
    sphere_peak: Option<f64>,
}

// per-attempt state of the case 2 uniform stream
enum Uniform<'a> {
    Exact(&'a GeneralConstraint),
    Chain(&'a GeneralConstraint, ChmcState, &'a ChmcConfig, usize),
}

impl Uniform<'_> {
    fn next(&mut self, rng: &mut dyn RngCore, out: &mut [f64]) -> Result<()> {
        match self {
            Uniform::Exact(g) => {
                g.sample_exact_uniform(rng, out);
                Ok(())
            }
            Uniform::Chain(g, state, cfg, thin) => {
                for _ in 0..(*thin).max(1) {
                    chmc_step(state, &Flat, g, cfg, rng)?;
                }
                out.copy_from_slice(&state.position);
                Ok(())
            }
        }
    }
}

impl FusionSampler {
    pub fn new(problem: FusionProblem, config: FusionConfig) -> Result<Self> {
        let sphere_peak = match problem.constraint() {
            Constraint::Sphere(s) => Some(s.log_weight_peak(problem.horizon())),
            Constraint::General(g) => {
                if config.uniform == UniformSource::Exact && !g.has_exact_uniform() {
                    return Err(Error::Parameter("constraint has no exact uniform sampler; configure a CHMC source".into()));
                }
                None
            }
            Constraint::Linear(_) => None,
        };
        if let UniformSource::Chmc { config: c, .. } = &config.uniform {
            c.validate()?;
        }
        Ok(Self { problem, config, sphere_peak })
    }

    pub fn problem(&self) -> &FusionProblem {
        &self.problem
    }

    pub fn config(&self) -> &FusionConfig {
        &self.config
    }

    fn start_uniform<'a>(&'a self, g: &'a GeneralConstraint, rng: &mut dyn RngCore) -> Result<Uniform<'a>> {
        match &self.config.uniform {
            UniformSource::Exact => Ok(Uniform::Exact(g)),
            UniformSource::Chmc { config, burn_in, thin, .. } => {
                let start = g.project(g.seed(), 100)?;
                let mut state = ChmcState::new(start, &Flat);
                for _ in 0..*burn_in {
                    chmc_step(&mut state, &Flat, g, config, rng)?;
                }
                Ok(Uniform::Chain(g, state, config, *thin))
            }
        }
    }

    /// One exact draw, running a fresh uniform chain if case 2 uses CHMC.
    pub fn draw(&self, rng: &mut dyn RngCore) -> Result<FusionDraw> {
        match self.problem.constraint() {
            Constraint::General(g) => {
                let mut u = self.start_uniform(g, rng)?;
                self.draw_inner(Some(&mut u), rng)
            }
            _ => self.draw_inner(None, rng),
        }
    }

    fn stage_two(&self, x: &[f64], y: &[f64], t: f64, rng: &mut dyn RngCore, diag: &mut Diagnostics) -> Result<bool> {
        let d = self.problem.component_dim();
        for (i, f) in self.problem.components().iter().enumerate() {
            let r = i * d..(i + 1) * d;
            let o = accept_component(f.as_ref(), &x[r.clone()], &y[r], t, &self.config.thinning, rng)?;
            diag.poisson_points += o.poisson_points_used;
            diag.bridge_points += o.bridge_points_revealed;
            if !o.accepted {
                return Ok(false);
            }
        }
        Ok(true)
    }

    // log stage-one weight for x, and the endpoint y written to `y`
    fn stage_one(&self, x: &[f64], y: &mut [f64], uniform: Option<&mut Uniform>, rng: &mut dyn RngCore) -> Result<f64> {
        let t = self.problem.horizon();
        match self.problem.constraint() {
            Constraint::Linear(c) => {
                let lw = c.log_acceptance_weight(x, t);
                c.sample_gaussian(x, t, rng, y);
                Ok(lw)
            }
            Constraint::Sphere(s) => {
                let peak = self.sphere_peak.unwrap_or(0.0);
                match sample_vmf_endpoint(x, t, s, peak, rng) {
                    Ok((yy, lw)) => {
                        y.copy_from_slice(&yy);
                        Ok(lw)
                    }
                    // at the exact centre the restricted Gaussian is uniform
                    Err(Error::DegenerateCenter) => {
                        y.copy_from_slice(&s.sample_uniform(rng));
                        Ok(sphere_log_acceptance_weight(x, t, s, peak))
                    }
                    Err(e) => Err(e),
                }
            }
            Constraint::General(_) => {
                uniform.ok_or_else(|| Error::Parameter("missing uniform stream".into()))?.next(rng, y)?;
                let d2: f64 = x.iter().zip(y.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
                Ok(-0.5 * d2 / t)
            }
        }
    }

    fn propose_x(&self, x: &mut [f64], rng: &mut dyn RngCore) {
        let d = self.problem.component_dim();
        for (i, f) in self.problem.components().iter().enumerate() {
            f.sample(rng, &mut x[i * d..(i + 1) * d]);
        }
    }

    fn draw_inner(&self, mut uniform: Option<&mut Uniform>, rng: &mut dyn RngCore) -> Result<FusionDraw> {
        let clock = Instant::now();
        let n = self.problem.constraint().ambient_dim();
        let t = self.problem.horizon();
        let mut x = vec![0.0; n];
        let mut y = vec![0.0; n];
        let mut diag = Diagnostics::default();
        let mut stage2 = 0;
        while diag.attempts < self.config.attempt_budget {
            diag.attempts += 1;
            self.propose_x(&mut x, rng);
            let lw = self.stage_one(&x, &mut y, uniform.as_deref_mut(), rng)?;
            if !(rng.random::<f64>().ln() <= lw) {
                diag.stage1_rejections += 1;
                continue;
            }
            stage2 += 1;
            if !self.stage_two(&x, &y, t, rng, &mut diag)? {
                diag.stage2_rejections += 1;
                continue;
            }
            return Ok(FusionDraw { y, attempts_stage1: diag.attempts, attempts_stage2: stage2, diagnostics: diag, wall_time: clock.elapsed() });
        }
        Err(Error::BudgetExhausted { budget: self.config.attempt_budget, diagnostics: diag })
    }

    /// `n` exact draws with per-draw generators derived from `seed`; the
    /// result does not depend on the number of worker threads.
    pub fn sample(&self, n: usize, seed: u64) -> Result<Vec<FusionDraw>> {
        match (&self.config.uniform, self.problem.constraint()) {
            (UniformSource::Chmc { block, .. }, Constraint::General(g)) => {
                let block = (*block).max(1);
                let nblocks = n.div_ceil(block);
                let blocks: Vec<Vec<FusionDraw>> = (0..nblocks)
                    .into_par_iter()
                    .map(|b| {
                        let mut rng = stream_rng(seed, b as u64);
                        let mut u = self.start_uniform(g, &mut rng)?;
                        let len = block.min(n - b * block);
                        (0..len).map(|_| self.draw_inner(Some(&mut u), &mut rng)).collect::<Result<Vec<_>>>()
                    })
                    .collect::<Result<_>>()?;
                Ok(blocks.into_iter().flatten().collect())
            }
            _ => (0..n)
                .into_par_iter()
                .map(|i| {
                    let mut rng = stream_rng(seed, i as u64);
                    self.draw(&mut rng)
                })
                .collect(),
        }
    }
}

/// One draw for a linear or spherical constraint.
pub fn sample_case1(problem: &FusionProblem, config: &FusionConfig, rng: &mut dyn RngCore) -> Result<FusionDraw> {
    if matches!(problem.constraint(), Constraint::General(_)) {
        return Err(Error::Parameter("case 1 needs a linear or spherical constraint".into()));
    }
    FusionSampler::new(problem.clone(), config.clone())?.draw(rng)
}

/// One draw for a general constraint, taking uniform endpoints from
/// `uniform`.
pub fn sample_case2<U>(problem: &FusionProblem, config: &FusionConfig, mut uniform: U, rng: &mut dyn RngCore) -> Result<FusionDraw>
where
    U: FnMut(&mut dyn RngCore, &mut [f64]) -> Result<()>,
{
    let sampler = FusionSampler::new(problem.clone(), FusionConfig { uniform: UniformSource::Chmc { config: ChmcConfig::default(), burn_in: 0, thin: 1, block: 1 }, ..config.clone() })?;
    let clock = Instant::now();
    let n = problem.constraint().ambient_dim();
    let t = problem.horizon();
    let mut x = vec![0.0; n];
    let mut y = vec![0.0; n];
    let mut diag = Diagnostics::default();
    let mut stage2 = 0;
    while diag.attempts < config.attempt_budget {
        diag.attempts += 1;
        sampler.propose_x(&mut x, rng);
        uniform(rng, &mut y)?;
        let d2: f64 = x.iter().zip(&y).map(|(a, b)| (a - b) * (a - b)).sum();
        if !(rng.random::<f64>().ln() <= -0.5 * d2 / t) {
            diag.stage1_rejections += 1;
            continue;
        }
        stage2 += 1;
        if !sampler.stage_two(&x, &y, t, rng, &mut diag)? {
            diag.stage2_rejections += 1;
            continue;
        }
        return Ok(FusionDraw { y, attempts_stage1: diag.attempts, attempts_stage2: stage2, diagnostics: diag, wall_time: clock.elapsed() });
    }
    Err(Error::BudgetExhausted { budget: config.attempt_budget, diagnostics: diag })
}

/// Pilot estimate of the overall acceptance probability at horizon `t`:
/// the mean of the stage-one weight times the stage-two indicator.
pub fn pilot_acceptance(problem: &FusionProblem, config: &FusionConfig, pilot: usize, seed: u64) -> Result<f64> {
    let sampler = FusionSampler::new(problem.clone(), config.clone())?;
    let mut rng = stream_rng(seed, u64::MAX);
    let n = problem.constraint().ambient_dim();
    let (mut x, mut y) = (vec![0.0; n], vec![0.0; n]);
    let mut uniform = match problem.constraint() {
        Constraint::General(g) => Some(sampler.start_uniform(g, &mut rng)?),
        _ => None,
    };
    let mut total = 0.0;
    let mut diag = Diagnostics::default();
    for _ in 0..pilot {
        sampler.propose_x(&mut x, &mut rng);
        let lw = sampler.stage_one(&x, &mut y, uniform.as_mut(), &mut rng)?;
        // stage two is skipped where it could not change the estimate
        if lw < -30.0 {
            continue;
        }
        if sampler.stage_two(&x, &y, problem.horizon(), &mut rng, &mut diag)? {
            total += lw.exp();
        }
    }
    Ok(total / pilot as f64)
}

/// Pick `T` from the dyadic grid `T₀·2^k`, `k ∈ [−6, 3]`, maximising the
/// pilot acceptance estimate. The pilot grows eightfold (up to 1024 times
/// `pilot`) until the winning estimate corresponds to ten expected
/// acceptances.
/// The returned value is then held fixed.
pub fn tune_horizon(problem: &FusionProblem, config: &FusionConfig, pilot: usize, seed: u64) -> Result<f64> {
    let pilot = pilot.max(1);
    let mut size = pilot;
    loop {
        let mut best = (problem.horizon(), -1.0);
        for k in -6..=3 {
            let t = problem.horizon() * 2f64.powi(k);
            let p = pilot_acceptance(&problem.with_horizon(t)?, config, size, seed)?;
            if p > best.1 {
                best = (t, p);
            }
        }
        if best.1 * size as f64 >= 10.0 || size >= 1024 * pilot {
            return Ok(best.0);
        }
        size *= 8;
    }
}
