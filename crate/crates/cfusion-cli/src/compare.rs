//! Error curves and cost per effective sample of the four samplers on the
//! three-component sum-constrained scenarios.

use std::fmt::Write;
use std::time::Instant;

use cfusion::baseline::{
    chmc_sampler, constrained_fusion, importance_sampler, percentage_errors, rw_mh_hyperplane, tune_mh_step, BenchmarkScenario, Moments,
};
use cfusion::chmc::ChmcConfig;
use cfusion::fusion::{stream_rng, FusionConfig};
use cfusion::stats::ess;
use rayon::prelude::*;

use crate::config::{ChmcSection, CompareConfig, NonlinearConfig, SamplerId, ScenarioId, TimingConfig};
use crate::{child_seed, csv_table, nonlinear, num, Artifact, Context, Output, Result};

pub fn scenario(id: ScenarioId) -> Result<BenchmarkScenario> {
    match id {
        ScenarioId::Genlog => BenchmarkScenario::genlog(),
        ScenarioId::StudentT => BenchmarkScenario::student_t(),
        ScenarioId::Gaussian => BenchmarkScenario::gaussian([0.0, 1.0, -1.0], [1.0, 2.0, 0.5], 3.0),
    }
    .context(&format!("quadrature truth for scenario {}", id.name()))
}

fn chmc_config(c: &ChmcSection) -> ChmcConfig {
    ChmcConfig { step_size: c.step_size, leapfrog_steps: c.leapfrog_steps, ..ChmcConfig::default() }
}

/// Moments and effective sample size of one sampler run. CF draws are
/// independent, so their count is their ESS.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplerRun {
    pub moments: Moments,
    pub ess: f64,
}

pub fn run_sampler(scn: &BenchmarkScenario, sampler: SamplerId, n: usize, burn_in: usize, is_inflation: f64, chmc: &ChmcSection, seed: u64) -> Result<SamplerRun> {
    let ctx = format!("{} sampler on scenario {}", sampler.name(), scn.name);
    let mut rng = stream_rng(seed, 0);
    Ok(match sampler {
        SamplerId::Cf => {
            let pts: Vec<Vec<f64>> = constrained_fusion(scn, n, &FusionConfig::default(), seed).context(&ctx)?.into_iter().map(|d| d.y).collect();
            SamplerRun { moments: Moments::of(&pts), ess: n as f64 }
        }
        SamplerId::Is => {
            let w = importance_sampler(scn, n, is_inflation, &mut rng).context(&ctx)?;
            SamplerRun { moments: w.moments(), ess: w.ess }
        }
        SamplerId::Mh => {
            let target = |y: &[f64]| scn.log_target(y);
            let start = scn.feasible_start();
            let step = tune_mh_step(target, &start, scn.sum, 1000, &mut rng);
            let chain = rw_mh_hyperplane(target, &start, scn.sum, n, step, burn_in, &mut rng);
            SamplerRun { moments: Moments::of(&chain.states), ess: ess(&chain.states) }
        }
        SamplerId::Chmc => {
            let (chain, _) = chmc_sampler(scn, n, burn_in, chmc_config(chmc), &mut rng).context(&ctx)?;
            SamplerRun { moments: Moments::of(&chain.states), ess: ess(&chain.states) }
        }
    })
}

/// One cell of the error-curve table.
#[derive(Debug, Clone, PartialEq)]
pub struct CompareRow {
    pub sampler: SamplerId,
    pub n: usize,
    pub pe_mean: f64,
    pub pe_var: f64,
    pub ess: f64,
}

pub fn compare_rows(scn: &BenchmarkScenario, cfg: &CompareConfig, seed: u64) -> Result<Vec<CompareRow>> {
    let cells: Vec<(usize, SamplerId, usize)> = cfg
        .samplers
        .iter()
        .flat_map(|s| cfg.grid.iter().map(move |n| (*s, *n)))
        .enumerate()
        .map(|(i, (s, n))| (i, s, n))
        .collect();
    cells
        .par_iter()
        .map(|&(i, s, n)| {
            let r = run_sampler(scn, s, n, cfg.burn_in, cfg.is_inflation, &cfg.chmc, child_seed(seed, i as u64))?;
            let pe = percentage_errors(&r.moments, &scn.truth).context("percentage errors")?;
            Ok(CompareRow { sampler: s, n, pe_mean: pe.total_mean, pe_var: pe.total_var, ess: r.ess })
        })
        .collect()
}

pub fn run_compare(cfg: &CompareConfig, seed: u64) -> Result<Output> {
    let scn = scenario(cfg.scenario)?;
    let rows = compare_rows(&scn, cfg, seed)?;
    let mut report = String::new();
    let _ = writeln!(report, "scenario {}: truth means {:?}, variances {:?}", scn.name, scn.truth.mean, scn.truth.var);
    let table: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            let _ = writeln!(report, "{:>5} N = {:>6}: PE_mean {:8.3}%  PE_var {:8.3}%", r.sampler.name(), r.n, r.pe_mean, r.pe_var);
            vec![scn.name.clone(), r.sampler.name().into(), r.n.to_string(), num(r.pe_mean), num(r.pe_var), num(r.ess)]
        })
        .collect();
    let contents = csv_table(&["scenario", "sampler", "n", "pe_mean", "pe_var", "ess"], &table)?;
    Ok(Output { artifacts: vec![Artifact { name: "compare.csv".into(), contents, deterministic: true }], report })
}

pub fn run_timing(cfg: &TimingConfig, nl: &NonlinearConfig, seed: u64) -> Result<Output> {
    let mut det = Vec::new();
    let mut wall = Vec::new();
    let mut report = String::new();
    let mut push = |scenario: &str, sampler: &str, n: usize, ess: f64, secs: f64| {
        let per = secs * 1e4 / ess.max(1.0);
        let _ = writeln!(report, "{scenario:>10} {sampler:>5}: ESS {ess:9.1} of {n}, {per:.3} s per 1e4 ESS");
        det.push(vec![scenario.into(), sampler.into(), n.to_string(), num(ess)]);
        wall.push(vec![scenario.into(), sampler.into(), num(secs), num(per)]);
    };
    // cells run one at a time so that the clock measures each alone
    for (si, id) in cfg.scenarios.iter().enumerate() {
        let scn = scenario(*id)?;
        for (ki, s) in cfg.samplers.iter().enumerate() {
            let clock = Instant::now();
            let r = run_sampler(&scn, *s, cfg.n, cfg.burn_in, 1.0, &cfg.chmc, child_seed(seed, (si * 16 + ki) as u64))?;
            push(&scn.name, s.name(), cfg.n, r.ess, clock.elapsed().as_secs_f64());
        }
    }
    if cfg.nonlinear_n > 0 {
        let clock = Instant::now();
        let draws = nonlinear::draws(nl, cfg.nonlinear_n, child_seed(seed, 1000))?;
        push("nonlinear", "cf", draws.len(), draws.len() as f64, clock.elapsed().as_secs_f64());
        let clock = Instant::now();
        let chain = nonlinear::chmc_chain(nl, cfg.n, cfg.burn_in, chmc_config(&cfg.chmc), child_seed(seed, 1001))?;
        push("nonlinear", "chmc", cfg.n, ess(&chain), clock.elapsed().as_secs_f64());
    }
    Ok(Output {
        artifacts: vec![
            Artifact { name: "timing.csv".into(), contents: csv_table(&["scenario", "sampler", "n", "ess"], &det)?, deterministic: true },
            Artifact {
                name: "timing_wall.csv".into(),
                contents: csv_table(&["scenario", "sampler", "seconds", "seconds_per_1e4_ess"], &wall)?,
                deterministic: false,
            },
        ],
        report,
    })
}
