//! Two Student-T components, `t₃ × t₅`, constrained to `x₁ + x₂ = 0`. The
//! first coordinate then has density proportional to
//! `(1 + x²/3)⁻² (1 + x²/5)⁻³`.

use std::fmt::Write;
use std::sync::Arc;

use cfusion::constraint::{Constraint, LinearConstraint};
use cfusion::density::{ComponentDensity, StudentT};
use cfusion::fusion::{tune_horizon, FusionConfig, FusionProblem, FusionSampler};
use cfusion::quadrature::integrate_scalar;
use cfusion::stats::ks_one_sample;

use crate::config::ToyConfig;
use crate::{csv_table, num, Artifact, Context, Output, Result};

// far enough out that the x⁻¹⁰ tail is below double precision
const CUTOFF: f64 = 400.0;

fn density(x: f64) -> f64 {
    (1.0 + x * x / 3.0).powi(-2) * (1.0 + x * x / 5.0).powi(-3)
}

/// The numerically normalised law of `x₁`.
#[derive(Debug, Clone, Copy)]
pub struct ToyReference {
    half_mass: f64,
}

impl ToyReference {
    pub fn new() -> cfusion::Result<Self> {
        Ok(Self { half_mass: integrate_scalar(density, 0.0, CUTOFF, 1e-12)? })
    }

    pub fn pdf(&self, x: f64) -> f64 {
        density(x) / (2.0 * self.half_mass)
    }

    pub fn cdf(&self, x: f64) -> f64 {
        let a = x.abs().min(CUTOFF);
        let part = integrate_scalar(density, 0.0, a, 1e-10).unwrap_or(f64::NAN) / self.half_mass;
        0.5 + 0.5 * part.copysign(x)
    }
}

pub fn toy_problem() -> cfusion::Result<FusionProblem> {
    let comps: Vec<Arc<dyn ComponentDensity>> = vec![Arc::new(StudentT::new(0.0, 1.0, 3.0)?), Arc::new(StudentT::new(0.0, 1.0, 5.0)?)];
    FusionProblem::new(comps, Constraint::Linear(LinearConstraint::sum(2, 0.0)?), 1.0)
}

/// One replicate: draws of `x₁` and the horizon used.
pub fn toy_draws(n: usize, seed: u64, horizon: Option<f64>) -> cfusion::Result<(Vec<f64>, f64, f64)> {
    let p = toy_problem()?;
    let cfg = FusionConfig::default();
    let t = match horizon {
        Some(t) => t,
        None => tune_horizon(&p, &cfg, 400, seed)?,
    };
    let draws = FusionSampler::new(p.with_horizon(t)?, cfg)?.sample(n, seed)?;
    let attempts = draws.iter().map(|d| d.attempts_stage1).sum::<u64>() as f64 / n.max(1) as f64;
    Ok((draws.into_iter().map(|d| d.y[0]).collect(), t, attempts))
}

pub fn run(cfg: &ToyConfig, seed: u64) -> Result<Output> {
    let reference = ToyReference::new().context("normalising the toy density")?;
    let mut rows = Vec::new();
    let mut report = String::new();
    for r in 0..cfg.replicates.max(1) as u64 {
        let s = seed + r;
        let (x, t, attempts) = toy_draws(cfg.n, s, cfg.horizon).context(&format!("toy replicate with seed {s}"))?;
        let ks = ks_one_sample(&x, |v| reference.cdf(v));
        let _ = writeln!(report, "seed {s}: n = {}, T = {t}, KS D = {:.5}, p = {:.4}", cfg.n, ks.statistic, ks.p_value);
        rows.push(vec![s.to_string(), cfg.n.to_string(), num(t), num(ks.statistic), num(ks.p_value), num(attempts)]);
    }
    let contents = csv_table(&["seed", "n", "horizon", "ks_statistic", "p_value", "attempts_per_draw"], &rows)?;
    Ok(Output { artifacts: vec![Artifact { name: "toy.csv".into(), contents, deterministic: true }], report })
}
