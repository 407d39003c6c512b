//! Reference samplers for sum-constrained products of univariate densities,
//! the quadrature ground truth they are scored against, and the error
//! metrics.

use std::sync::Arc;

use nalgebra::DMatrix;
use rand::{Rng, RngCore};
use rand_distr::{Distribution, StandardNormal};

use crate::chmc::{chmc_step, tune_step_size, ChmcConfig, ChmcDiagnostics, ChmcState, FnPotential};
use crate::constraint::{Constraint, GeneralConstraint, LinearConstraint};
use crate::density::{ComponentDensity, GenLog, GenLogParams, Gaussian, StudentT};
use crate::error::{Error, Result};
use crate::fusion::{tune_horizon, FusionConfig, FusionDraw, FusionProblem, FusionSampler};
use crate::gaussian::condition_on_sum;
use crate::quadrature::integrate;
use crate::stats;

/// Per-component means and variances.
#[derive(Debug, Clone, PartialEq)]
pub struct Moments {
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
}

impl Moments {
    /// Sample moments of a set of points (unbiased variance).
    pub fn of(points: &[Vec<f64>]) -> Self {
        let d = points.first().map_or(0, Vec::len);
        let cols: Vec<Vec<f64>> = (0..d).map(|k| points.iter().map(|p| p[k]).collect()).collect();
        Self { mean: cols.iter().map(|c| stats::mean(c)).collect(), var: cols.iter().map(|c| stats::variance(c)).collect() }
    }
}

/// Three univariate components under `x₁ + x₂ + x₃ = s`, with the
/// constrained moments computed by quadrature.
#[derive(Debug, Clone)]
pub struct BenchmarkScenario {
    pub name: String,
    pub components: Vec<Arc<dyn ComponentDensity>>,
    pub sum: f64,
    pub truth: Moments,
    /// estimated absolute error of `truth`
    pub truth_error: f64,
}

impl BenchmarkScenario {
    pub fn new(name: &str, components: Vec<Arc<dyn ComponentDensity>>, sum: f64) -> Result<Self> {
        let (truth, truth_error) = quadrature_truth(&components, sum)?;
        Ok(Self { name: name.into(), components, sum, truth, truth_error })
    }

    /// The skewed GenLog scenario whose mean sum sits about 6 below `s = 10`.
    pub fn genlog() -> Result<Self> {
        let g = |a, b, c, d| -> Result<Arc<dyn ComponentDensity>> { Ok(Arc::new(GenLog::new(GenLogParams::new(a, b, c, d)?)?)) };
        Self::new("genlog", vec![g(3.0, 0.4, 2.0, -5.0)?, g(3.0, 0.4, 1.0, -2.0)?, g(3.0, 0.4, 1.0, -3.0)?], 10.0)
    }

    /// Shifted Student-T components with 2.01 degrees of freedom, `s = 10`.
    pub fn student_t() -> Result<Self> {
        let t = |m| -> Result<Arc<dyn ComponentDensity>> { Ok(Arc::new(StudentT::shifted(m, 2.01)?)) };
        Self::new("student_t", vec![t(-2.0)?, t(3.0)?, t(5.0)?], 10.0)
    }

    pub fn gaussian(mean: [f64; 3], sd: [f64; 3], sum: f64) -> Result<Self> {
        let comps = mean
            .iter()
            .zip(sd)
            .map(|(&m, s)| Gaussian::new(m, s).map(|g| Arc::new(g) as Arc<dyn ComponentDensity>))
            .collect::<Result<Vec<_>>>()?;
        Self::new("gaussian", comps, sum)
    }

    pub fn log_target(&self, y: &[f64]) -> f64 {
        self.components.iter().zip(y).map(|(c, v)| c.log_density(std::slice::from_ref(v))).sum()
    }

    fn grad_log_target(&self, y: &[f64], g: &mut [f64]) {
        for ((c, v), gi) in self.components.iter().zip(y).zip(g.iter_mut()) {
            let mut one = [0.0];
            c.grad_log_density(std::slice::from_ref(v), &mut one);
            *gi = one[0];
        }
    }

    /// A point on the hyperplane: the component medians shifted equally.
    pub fn feasible_start(&self) -> Vec<f64> {
        let med: Vec<f64> = self.components.iter().map(|c| c.quantile(0.5).unwrap_or(0.0)).collect();
        let shift = (self.sum - med.iter().sum::<f64>()) / med.len() as f64;
        med.iter().map(|m| m + shift).collect()
    }
}

fn univariate(components: &[Arc<dyn ComponentDensity>]) -> Result<()> {
    if components.len() != 3 || components.iter().any(|c| c.dim() != 1) {
        return Err(Error::Parameter("quadrature truth needs exactly three univariate components".into()));
    }
    Ok(())
}

/// Constrained means and variances of three univariate components under
/// `x₁ + x₂ + x₃ = s`, by nested adaptive quadrature in `(x₁, x₂)` over the
/// box spanned by the 10⁻⁸ and 1 − 10⁻⁸ marginal quantiles. Returns the
/// moments and an estimate of their absolute error, which must be below
/// 10⁻⁴.
pub fn quadrature_truth(components: &[Arc<dyn ComponentDensity>], s: f64) -> Result<(Moments, f64)> {
    univariate(components)?;
    let q = |c: &Arc<dyn ComponentDensity>, p: f64| c.quantile(p).ok_or_else(|| Error::Parameter("component has no quantile function".into()));
    let (lo1, hi1, med1) = (q(&components[0], 1e-8)?, q(&components[0], 1.0 - 1e-8)?, q(&components[0], 0.5)?);
    let (lo2, hi2, med2) = (q(&components[1], 1e-8)?, q(&components[1], 1.0 - 1e-8)?, q(&components[1], 0.5)?);
    let med3 = q(&components[2], 0.5)?;
    let ld = |k: usize, x: f64| components[k].log_density(&[x]);
    // log-density at a representative feasible point keeps values O(1)
    let shift = (s - med1 - med2 - med3) / 3.0;
    let reference = ld(0, med1 + shift) + ld(1, med2 + shift) + ld(2, med3 + shift);
    let mut failure = None;
    let (outer, outer_err) = integrate(
        |x1, out| {
            let l1 = ld(0, x1) - reference;
            let breaks = [med2, s - x1 - med3];
            let r = integrate(
                |x2, o| {
                    let x3 = s - x1 - x2;
                    let w = (l1 + ld(1, x2) + ld(2, x3)).exp();
                    o.copy_from_slice(&[w, w * x1, w * x2, w * x3, w * x1 * x1, w * x2 * x2, w * x3 * x3]);
                },
                7,
                lo2,
                hi2,
                &breaks,
                1e-14,
                1e-10,
                4000,
            );
            match r {
                Ok((v, e)) => {
                    out[..7].copy_from_slice(&v);
                    // the inner error estimate is integrated alongside
                    out[7] = e;
                }
                Err(e) => {
                    failure.get_or_insert(e);
                    out.iter_mut().for_each(|o| *o = 0.0);
                }
            }
        },
        8,
        lo1,
        hi1,
        &[med1, s - med2 - med3],
        1e-12,
        1e-10,
        4000,
    )?;
    if let Some(e) = failure {
        return Err(e);
    }
    let z = outer[0];
    if !(z > 0.0 && z.is_finite()) {
        return Err(Error::Tolerance(f64::NAN));
    }
    let mean: Vec<f64> = (1..4).map(|k| outer[k] / z).collect();
    let var: Vec<f64> = (0..3).map(|k| outer[4 + k] / z - mean[k] * mean[k]).collect();
    // crude propagation: each moment is a ratio with absolute numerator
    // and denominator errors bounded by the quadrature errors
    let scale = outer[..7].iter().fold(0.0f64, |m, v| m.max(v.abs())) / z;
    let err = (outer_err + outer[7]) / z * (1.0 + scale);
    if err > 1e-4 {
        return Err(Error::Tolerance(err));
    }
    Ok((Moments { mean, var }, err))
}

/// Self-normalised importance sample.
#[derive(Debug, Clone)]
pub struct WeightedSample {
    pub points: Vec<Vec<f64>>,
    /// normalised to sum to one
    pub weights: Vec<f64>,
    pub ess: f64,
}

impl WeightedSample {
    pub fn moments(&self) -> Moments {
        let d = self.points.first().map_or(0, Vec::len);
        let mut mean = vec![0.0; d];
        for (p, w) in self.points.iter().zip(&self.weights) {
            mean.iter_mut().zip(p).for_each(|(m, v)| *m += w * v);
        }
        let mut var = vec![0.0; d];
        for (p, w) in self.points.iter().zip(&self.weights) {
            var.iter_mut().zip(p).zip(&mean).for_each(|((s, v), m)| *s += w * (v - m) * (v - m));
        }
        Moments { mean, var }
    }

    /// Effective sample size below 10⁻³ of the particle count.
    pub fn degenerate(&self) -> bool {
        self.ess < 1e-3 * self.points.len() as f64
    }
}

/// Importance sampling from the product of moment-matched Gaussians
/// conditioned on the sum. `inflation` scales the proposal variances.
pub fn importance_sampler(scenario: &BenchmarkScenario, n: usize, inflation: f64, rng: &mut dyn RngCore) -> Result<WeightedSample> {
    let mut mean = Vec::new();
    let mut var = Vec::new();
    for c in &scenario.components {
        let (m, v) = c.moments().ok_or_else(|| Error::Parameter("component moments are not finite".into()))?;
        mean.push(m[0]);
        var.push(v[0] * inflation);
    }
    let cond = condition_on_sum(&mean, &var, scenario.sum)?;
    let d = mean.len();
    let mut points = Vec::with_capacity(n);
    let mut logw = Vec::with_capacity(n);
    for _ in 0..n {
        let mut y = vec![0.0; d];
        cond.sample(rng, &mut y);
        // the conditional proposal density on the plane is proportional to
        // the unconstrained product, so the constant cancels on normalising
        let lq: f64 = y.iter().zip(&mean).zip(&var).map(|((v, m), s)| -0.5 * (v - m) * (v - m) / s).sum();
        logw.push(scenario.log_target(&y) - lq);
        points.push(y);
    }
    let top = logw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let raw: Vec<f64> = logw.iter().map(|l| (l - top).exp()).collect();
    let total: f64 = raw.iter().sum();
    let weights: Vec<f64> = raw.iter().map(|w| w / total).collect();
    let ess = 1.0 / weights.iter().map(|w| w * w).sum::<f64>();
    Ok(WeightedSample { points, weights, ess })
}

/// A Markov chain on the hyperplane after burn-in.
#[derive(Debug, Clone)]
pub struct Chain {
    pub states: Vec<Vec<f64>>,
    pub acceptance: f64,
    pub step: f64,
}

/// Random-walk Metropolis–Hastings with Gaussian increments projected onto
/// `Σ yᵢ = 0`. The first `burn_in` states are dropped; the sum is restored
/// exactly after every move to stop rounding drift.
pub fn rw_mh_hyperplane<F>(log_target: F, start: &[f64], sum: f64, n: usize, step: f64, burn_in: usize, rng: &mut dyn RngCore) -> Chain
where
    F: Fn(&[f64]) -> f64,
{
    let d = start.len() as f64;
    let mut y = start.to_vec();
    let mut ly = log_target(&y);
    let mut z = vec![0.0; y.len()];
    let mut states = Vec::with_capacity(n);
    let mut accepted = 0usize;
    for i in 0..burn_in + n {
        for v in z.iter_mut() {
            let e: f64 = StandardNormal.sample(rng);
            *v = step * e;
        }
        let zbar = z.iter().sum::<f64>() / d;
        let mut cand: Vec<f64> = y.iter().zip(&z).map(|(a, b)| a + b - zbar).collect();
        let drift = (cand.iter().sum::<f64>() - sum) / d;
        cand.iter_mut().for_each(|v| *v -= drift);
        let lc = log_target(&cand);
        if rng.random::<f64>().ln() < lc - ly {
            y = cand;
            ly = lc;
            if i >= burn_in {
                accepted += 1;
            }
        }
        if i >= burn_in {
            states.push(y.clone());
        }
    }
    Chain { states, acceptance: accepted as f64 / n.max(1) as f64, step }
}

/// Double or halve (then bisect) the step until a pilot chain accepts
/// within `[0.37, 0.47]`.
pub fn tune_mh_step<F>(log_target: F, start: &[f64], sum: f64, pilot: usize, rng: &mut dyn RngCore) -> f64
where
    F: Fn(&[f64]) -> f64,
{
    let (mut lo, mut hi, mut step) = (0.0f64, f64::INFINITY, 1.0);
    for _ in 0..40 {
        let rate = rw_mh_hyperplane(&log_target, start, sum, pilot, step, 0, rng).acceptance;
        if rate > 0.47 {
            lo = step;
        } else if rate < 0.37 {
            hi = step;
        } else {
            break;
        }
        step = match (lo > 0.0, hi.is_finite()) {
            (true, true) => (lo * hi).sqrt(),
            (true, false) => 2.0 * lo,
            _ => 0.5 * hi,
        };
    }
    step
}

/// The sum constraint as a general manifold, for CHMC.
pub fn sum_manifold(d: usize, sum: f64, seed: Vec<f64>) -> Result<GeneralConstraint> {
    GeneralConstraint::new(
        d,
        1,
        move |y, out| out[0] = y.iter().sum::<f64>() - sum,
        |_, j: &mut DMatrix<f64>| j.fill(1.0),
        seed,
    )
}

/// CHMC with identity mass on the sum hyperplane, step size tuned to an
/// acceptance rate near 0.8, first `burn_in` states dropped.
pub fn chmc_sampler(scenario: &BenchmarkScenario, n: usize, burn_in: usize, cfg: ChmcConfig, rng: &mut dyn RngCore) -> Result<(Chain, ChmcDiagnostics)> {
    let start = scenario.feasible_start();
    let manifold = sum_manifold(start.len(), scenario.sum, start.clone())?;
    let pot = FnPotential {
        value: |y: &[f64]| -scenario.log_target(y),
        gradient: |y: &[f64], g: &mut [f64]| {
            scenario.grad_log_target(y, g);
            g.iter_mut().for_each(|v| *v = -*v);
        },
    };
    let mut state = ChmcState::new(start, &pot);
    let cfg = tune_step_size(&mut state, &pot, &manifold, cfg, 100, rng)?;
    for _ in 0..burn_in {
        chmc_step(&mut state, &pot, &manifold, &cfg, rng)?;
    }
    state.diagnostics = ChmcDiagnostics::default();
    let mut states = Vec::with_capacity(n);
    for _ in 0..n {
        chmc_step(&mut state, &pot, &manifold, &cfg, rng)?;
        states.push(state.position.clone());
    }
    let acc = state.diagnostics.acceptance_rate();
    Ok((Chain { states, acceptance: acc, step: cfg.step_size }, state.diagnostics))
}

/// Constrained-fusion draws for a scenario with a pilot-tuned horizon.
pub fn constrained_fusion(scenario: &BenchmarkScenario, n: usize, config: &FusionConfig, seed: u64) -> Result<Vec<FusionDraw>> {
    let c = Constraint::Linear(LinearConstraint::sum(scenario.components.len(), scenario.sum)?);
    let p = FusionProblem::new(scenario.components.clone(), c, 1.0)?;
    let t = tune_horizon(&p, config, 400, seed)?;
    FusionSampler::new(p.with_horizon(t)?, config.clone())?.sample(n, seed)
}

/// Percentage errors of estimated means and variances, per component and
/// summed over components.
#[derive(Debug, Clone, PartialEq)]
pub struct PercentageErrors {
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
    pub total_mean: f64,
    pub total_var: f64,
}

pub fn percentage_errors(estimate: &Moments, truth: &Moments) -> Result<PercentageErrors> {
    let pe = |e: &[f64], t: &[f64]| -> Result<Vec<f64>> {
        e.iter()
            .zip(t)
            .map(|(e, t)| if t.abs() < 1e-12 { Err(Error::DivisionGuard) } else { Ok(100.0 * (e - t).abs() / t.abs()) })
            .collect()
    };
    let mean = pe(&estimate.mean, &truth.mean)?;
    let var = pe(&estimate.var, &truth.var)?;
    Ok(PercentageErrors { total_mean: mean.iter().sum(), total_var: var.iter().sum(), mean, var })
}
