//! Improvement in mean-squared error, deviation and variance when
//! independent predictors are conditioned on the true total.
//!
//! Predictors are centred at zero and the truth is `y = α`, so `α` is the
//! residue vector. Gaussian rows are evaluated in closed form and by Monte
//! Carlo; Student-T rows by Monte Carlo with CF draws for the constrained
//! side.

use std::fmt::Write;
use std::sync::Arc;

use cfusion::constraint::{Constraint, LinearConstraint};
use cfusion::density::{ComponentDensity, StudentT};
use cfusion::fusion::{stream_rng, tune_horizon, FusionConfig, FusionProblem, FusionSampler};
use cfusion::gaussian::{condition_on_sum, mse_improvement};
use cfusion::stats::variance;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::config::{Family, MseRow, MseTableConfig};
use crate::{child_seed, csv_table, num, Artifact, Context, HarnessError, Output, Result};

/// Per-component improvements of one evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct Improvement {
    pub mse: Vec<f64>,
    /// standard errors of `mse`; zero for closed forms
    pub mse_se: Vec<f64>,
    pub devi: Vec<f64>,
    pub var: Vec<f64>,
    pub total: f64,
    pub total_se: f64,
}

pub fn analytic(row: &MseRow) -> Result<Improvement> {
    let d = mse_improvement(&row.alpha, &row.sigma2).context("MSE decomposition")?;
    let m = row.alpha.len();
    let mse: Vec<f64> = (0..m).map(|i| row.alpha[i].powi(2) - d.corrected_residues[i].powi(2) + d.var_reduction[i]).collect();
    let devi = (0..m).map(|i| row.alpha[i].abs() - d.corrected_residues[i].abs()).collect();
    Ok(Improvement { mse, mse_se: vec![0.0; m], devi, var: d.var_reduction.clone(), total: d.total(), total_se: 0.0 })
}

// running sums over draws of both sides
#[derive(Debug, Clone, Default)]
struct Sums {
    n: f64,
    su: Vec<f64>,
    squ: Vec<f64>,
    sc: Vec<f64>,
    sqc: Vec<f64>,
    // per-component squared-error difference and its square
    sd: Vec<f64>,
    sdd: Vec<f64>,
    st: f64,
    stt: f64,
}

impl Sums {
    fn new(m: usize) -> Self {
        let z = vec![0.0; m];
        Self { su: z.clone(), squ: z.clone(), sc: z.clone(), sqc: z.clone(), sd: z.clone(), sdd: z, ..Default::default() }
    }

    fn add(&mut self, u: &[f64], c: &[f64], y: &[f64]) {
        self.n += 1.0;
        let mut t = 0.0;
        for i in 0..y.len() {
            self.su[i] += u[i];
            self.squ[i] += u[i] * u[i];
            self.sc[i] += c[i];
            self.sqc[i] += c[i] * c[i];
            let d = (u[i] - y[i]).powi(2) - (c[i] - y[i]).powi(2);
            self.sd[i] += d;
            self.sdd[i] += d * d;
            t += d;
        }
        self.st += t;
        self.stt += t * t;
    }

    fn merge(mut self, o: &Sums) -> Self {
        self.n += o.n;
        for i in 0..self.su.len() {
            self.su[i] += o.su[i];
            self.squ[i] += o.squ[i];
            self.sc[i] += o.sc[i];
            self.sqc[i] += o.sqc[i];
            self.sd[i] += o.sd[i];
            self.sdd[i] += o.sdd[i];
        }
        self.st += o.st;
        self.stt += o.stt;
        self
    }

    // standard error of a mean from sums, treating draws as paired
    fn se(&self, s: f64, ss: f64) -> f64 {
        let m = s / self.n;
        ((ss / self.n - m * m).max(0.0) / (self.n - 1.0)).sqrt()
    }

    fn improvement(&self, y: &[f64]) -> Improvement {
        let n = self.n;
        let m = y.len();
        let var = |s: f64, ss: f64| (ss - s * s / n) / (n - 1.0);
        Improvement {
            mse: (0..m).map(|i| self.sd[i] / n).collect(),
            mse_se: (0..m).map(|i| self.se(self.sd[i], self.sdd[i])).collect(),
            devi: (0..m).map(|i| (self.su[i] / n - y[i]).abs() - (self.sc[i] / n - y[i]).abs()).collect(),
            var: (0..m).map(|i| var(self.su[i], self.squ[i]) - var(self.sc[i], self.sqc[i])).collect(),
            total: self.st / n,
            total_se: self.se(self.st, self.stt),
        }
    }
}

const CHUNK: usize = 10_000;

/// Paired Monte Carlo: each unconstrained Gaussian draw is shifted along the
/// variance shares onto the constraint, which is an exact conditional draw.
pub fn gaussian_monte_carlo(row: &MseRow, draws: usize, seed: u64) -> Result<Improvement> {
    let m = row.alpha.len();
    let cond = condition_on_sum(&vec![0.0; m], &row.sigma2, row.alpha.iter().sum()).context("Gaussian conditioning")?;
    let chunks = draws.div_ceil(CHUNK);
    let sums = (0..chunks)
        .into_par_iter()
        .map(|k| {
            let mut rng = stream_rng(seed, k as u64);
            let mut s = Sums::new(m);
            let mut u = vec![0.0; m];
            for _ in 0..CHUNK.min(draws - k * CHUNK) {
                for (ui, v) in u.iter_mut().zip(&row.sigma2) {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    *ui = v.sqrt() * z;
                }
                let gap = cond.sum - u.iter().sum::<f64>();
                let c: Vec<f64> = u.iter().zip(&cond.shares).map(|(ui, l)| ui + l * gap).collect();
                s.add(&u, &c, &row.alpha);
            }
            s
        })
        .collect::<Vec<_>>()
        .iter()
        .fold(Sums::new(m), |a, b| a.merge(b));
    Ok(sums.improvement(&row.alpha))
}

/// Student-T predictors `t_ν(0, σᵢ)`; constrained draws by CF.
pub fn student_t_monte_carlo(row: &MseRow, dof: f64, draws: usize, seed: u64) -> Result<Improvement> {
    let m = row.alpha.len();
    let comps: Vec<Arc<dyn ComponentDensity>> = row
        .sigma2
        .iter()
        .map(|v| StudentT::new(0.0, v.sqrt(), dof).map(|t| Arc::new(t) as Arc<dyn ComponentDensity>))
        .collect::<cfusion::Result<_>>()
        .context("Student-T predictors")?;
    let c = LinearConstraint::sum(m, row.alpha.iter().sum()).context("sum constraint")?;
    let p = FusionProblem::new(comps.clone(), Constraint::Linear(c), 1.0).context("MSE problem")?;
    let fc = FusionConfig::default();
    let t = tune_horizon(&p, &fc, 400, seed).context("tuning")?;
    let constrained = FusionSampler::new(p.with_horizon(t).context("horizon")?, fc)
        .and_then(|s| s.sample(draws, seed))
        .context("constrained draws")?;
    let mut rng = stream_rng(seed, u64::MAX - 1);
    let mut s = Sums::new(m);
    let mut u = vec![0.0; m];
    // squared errors per component, unconstrained and constrained
    let mut eu = vec![Vec::with_capacity(draws); m];
    let mut ec = vec![Vec::with_capacity(draws); m];
    for d in &constrained {
        for (ui, comp) in u.iter_mut().zip(&comps) {
            comp.sample(&mut rng, std::slice::from_mut(ui));
        }
        s.add(&u, &d.y, &row.alpha);
        for i in 0..m {
            eu[i].push((u[i] - row.alpha[i]).powi(2));
            ec[i].push((d.y[i] - row.alpha[i]).powi(2));
        }
    }
    let mut imp = s.improvement(&row.alpha);
    // the two sides are independent, so the variances add
    let n = draws as f64;
    let vars: Vec<f64> = (0..m).map(|i| variance(&eu[i]) + variance(&ec[i])).collect();
    imp.mse_se = vars.iter().map(|v| (v / n).sqrt()).collect();
    let tu: Vec<f64> = (0..draws).map(|j| (0..m).map(|i| eu[i][j]).sum()).collect();
    let tc: Vec<f64> = (0..draws).map(|j| (0..m).map(|i| ec[i][j]).sum()).collect();
    imp.total_se = ((variance(&tu) + variance(&tc)) / n).sqrt();
    Ok(imp)
}

fn vec_str(v: &[f64]) -> String {
    v.iter().map(|x| num(*x)).collect::<Vec<_>>().join(" ")
}

pub fn run(cfg: &MseTableConfig, seed: u64) -> Result<Output> {
    let mut rows = Vec::new();
    let mut report = String::new();
    for (r, row) in cfg.rows.iter().enumerate() {
        if row.alpha.len() != row.sigma2.len() || row.alpha.is_empty() {
            return Err(HarnessError::Config(format!("mse_table row {r}: alpha and sigma2 lengths differ")));
        }
        let rs = child_seed(seed, r as u64);
        let (family, evals) = match row.family {
            Family::Gaussian => ("gaussian", vec![("analytic", analytic(row)?), ("monte_carlo", gaussian_monte_carlo(row, cfg.draws, rs)?)]),
            Family::StudentT => ("student_t", vec![("monte_carlo", student_t_monte_carlo(row, cfg.student_t_dof, cfg.cf_draws, rs)?)]),
        };
        for (method, imp) in evals {
            let _ = writeln!(
                report,
                "{family:>9} row {r} {method:>11}: MSE improv [{}] total {:.3} ± {:.3}, var improv [{}]",
                imp.mse.iter().map(|v| format!("{v:.2}")).collect::<Vec<_>>().join(", "),
                imp.total,
                imp.total_se,
                imp.var.iter().map(|v| format!("{v:.2}")).collect::<Vec<_>>().join(", "),
            );
            for i in 0..row.alpha.len() {
                rows.push(vec![
                    family.into(),
                    r.to_string(),
                    (i + 1).to_string(),
                    num(row.alpha[i]),
                    num(row.sigma2[i]),
                    method.into(),
                    num(imp.mse[i]),
                    num(imp.mse_se[i]),
                    num(imp.devi[i]),
                    num(imp.var[i]),
                ]);
            }
            rows.push(vec![
                family.into(),
                r.to_string(),
                "total".into(),
                vec_str(&row.alpha),
                vec_str(&row.sigma2),
                method.into(),
                num(imp.total),
                num(imp.total_se),
                num(imp.devi.iter().sum()),
                num(imp.var.iter().sum()),
            ]);
        }
    }
    let header = ["family", "row", "component", "alpha", "sigma2", "method", "mse_improvement", "mse_se", "devi_improvement", "var_improvement"];
    Ok(Output { artifacts: vec![Artifact { name: "mse_table.csv".into(), contents: csv_table(&header, &rows)?, deterministic: true }], report })
}
