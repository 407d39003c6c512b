//! Student-T components constrained in both their mean and their mean
//! square. For three components the constraint set is a circle.

use std::fmt::Write;
use std::sync::Arc;

use cfusion::chmc::{chmc_step, tune_step_size, ChmcConfig, ChmcState, FnPotential};
use cfusion::constraint::{Constraint, GeneralConstraint, SphereConstraint};
use cfusion::density::{ComponentDensity, StudentT};
use cfusion::fusion::{stream_rng, tune_horizon, FusionConfig, FusionProblem, FusionSampler};

use crate::config::NonlinearConfig;
use crate::{child_seed, csv_table, num, Artifact, Context, HarnessError, Output, Result};

fn components(cfg: &NonlinearConfig) -> Result<Vec<Arc<dyn ComponentDensity>>> {
    cfg.components
        .iter()
        .map(|&[mu, sigma, nu]| StudentT::new(mu, sigma, nu).map(|t| Arc::new(t) as Arc<dyn ComponentDensity>))
        .collect::<cfusion::Result<_>>()
        .context("nonlinear components")
}

/// Centre and radius of the constraint sphere inside the plane
/// `Σx = m·mean`.
fn geometry(cfg: &NonlinearConfig) -> Result<(usize, f64)> {
    let m = cfg.components.len();
    let r2 = m as f64 * (cfg.mean_square - cfg.mean * cfg.mean);
    if m < 3 || !(r2 > 0.0) {
        return Err(HarnessError::Config("nonlinear problem needs three or more components and mean_square > mean²".into()));
    }
    Ok((m, r2.sqrt()))
}

pub fn problem(cfg: &NonlinearConfig) -> Result<FusionProblem> {
    let (m, r) = geometry(cfg)?;
    let sphere = SphereConstraint::plane_section(&vec![1.0; m], m as f64 * cfg.mean, &vec![cfg.mean; m], r).context("nonlinear constraint")?;
    FusionProblem::new(components(cfg)?, Constraint::Sphere(sphere), 1.0).context("nonlinear problem")
}

pub fn log_target(comps: &[Arc<dyn ComponentDensity>], y: &[f64]) -> f64 {
    comps.iter().zip(y).map(|(c, v)| c.log_density(std::slice::from_ref(v))).sum()
}

/// Local maxima of the target along the circle, found on a grid of
/// `grid` angles (three components only).
pub fn circle_modes(cfg: &NonlinearConfig, grid: usize) -> Result<Vec<Vec<f64>>> {
    let (m, r) = geometry(cfg)?;
    if m != 3 {
        return Err(HarnessError::Config("mode search is implemented for three components".into()));
    }
    let comps = components(cfg)?;
    let e1 = [1.0 / 2f64.sqrt(), -1.0 / 2f64.sqrt(), 0.0];
    let e2 = [1.0 / 6f64.sqrt(), 1.0 / 6f64.sqrt(), -2.0 / 6f64.sqrt()];
    let point = |k: usize| -> Vec<f64> {
        let a = 2.0 * std::f64::consts::PI * k as f64 / grid as f64;
        (0..3).map(|i| cfg.mean + r * (a.cos() * e1[i] + a.sin() * e2[i])).collect()
    };
    let values: Vec<f64> = (0..grid).map(|k| log_target(&comps, &point(k))).collect();
    Ok((0..grid)
        .filter(|&k| values[k] > values[(k + grid - 1) % grid] && values[k] >= values[(k + 1) % grid])
        .map(point)
        .collect())
}

/// `n` CF draws with a pilot-tuned horizon.
pub fn draws(cfg: &NonlinearConfig, n: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    let p = problem(cfg)?;
    let fc = FusionConfig::default();
    let t = tune_horizon(&p, &fc, 400, seed).context("tuning the nonlinear horizon")?;
    let d = FusionSampler::new(p.with_horizon(t).context("nonlinear horizon")?, fc)
        .and_then(|s| s.sample(n, seed))
        .context("nonlinear sampling")?;
    Ok(d.into_iter().map(|d| d.y).collect())
}

/// CHMC on the same circle, for comparison.
pub fn chmc_chain(cfg: &NonlinearConfig, n: usize, burn_in: usize, chmc: ChmcConfig, seed: u64) -> Result<Vec<Vec<f64>>> {
    let (m, r) = geometry(cfg)?;
    let comps = components(cfg)?;
    let manifold = GeneralConstraint::plane_sphere(vec![1.0; m], m as f64 * cfg.mean, vec![cfg.mean; m], r).context("nonlinear manifold")?;
    let pot = FnPotential {
        value: |y: &[f64]| -log_target(&comps, y),
        gradient: |y: &[f64], g: &mut [f64]| {
            for ((c, v), gi) in comps.iter().zip(y).zip(g.iter_mut()) {
                let mut one = [0.0];
                c.grad_log_density(std::slice::from_ref(v), &mut one);
                *gi = -one[0];
            }
        },
    };
    let mut rng = stream_rng(seed, 0);
    let start = manifold.project(manifold.seed(), 100).context("nonlinear start")?;
    let mut state = ChmcState::new(start, &pot);
    let chmc = tune_step_size(&mut state, &pot, &manifold, chmc, 100, &mut rng).context("CHMC tuning")?;
    let mut out = Vec::with_capacity(n);
    for i in 0..burn_in + n {
        chmc_step(&mut state, &pot, &manifold, &chmc, &mut rng).context("CHMC step")?;
        if i >= burn_in {
            out.push(state.position.clone());
        }
    }
    Ok(out)
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

pub fn run(cfg: &NonlinearConfig, seed: u64) -> Result<Output> {
    let modes = circle_modes(cfg, 100_000)?;
    let comps = components(cfg)?;
    let mut report = String::new();
    let _ = writeln!(report, "{} modes on the constraint circle", modes.len());
    let mut rows = Vec::new();
    let mut draw_rows = Vec::new();
    for rep in 0..cfg.replicates.max(1) as u64 {
        let y = draws(cfg, cfg.n, child_seed(seed, rep))?;
        let mut found = 0;
        for (k, mode) in modes.iter().enumerate() {
            let near = y.iter().map(|p| dist(p, mode)).fold(f64::INFINITY, f64::min);
            let within = y.iter().filter(|p| dist(p, mode) < cfg.tolerance).count();
            if within > 0 {
                found += 1;
            }
            let mut row = vec![rep.to_string(), k.to_string()];
            row.extend(mode.iter().map(|v| num(*v)));
            row.extend([num(log_target(&comps, mode)), num(near), within.to_string()]);
            rows.push(row);
        }
        let _ = writeln!(report, "replicate {rep}: {found} of {} modes visited by {} draws", modes.len(), y.len());
        draw_rows.extend(y.iter().map(|p| {
            let mut r = vec![rep.to_string()];
            r.extend(p.iter().map(|v| num(*v)));
            r
        }));
    }
    let dims: Vec<String> = (1..=cfg.components.len()).map(|i| format!("x{i}")).collect();
    let mut mh = vec!["replicate", "mode"];
    mh.extend(dims.iter().map(String::as_str));
    mh.extend(["log_density", "nearest_distance", "draws_within_tolerance"]);
    let mut dh = vec!["replicate"];
    dh.extend(dims.iter().map(String::as_str));
    Ok(Output {
        artifacts: vec![
            Artifact { name: "nonlinear_modes.csv".into(), contents: csv_table(&mh, &rows)?, deterministic: true },
            Artifact { name: "nonlinear_draws.csv".into(), contents: csv_table(&dh, &draw_rows)?, deterministic: true },
        ],
        report,
    })
}
