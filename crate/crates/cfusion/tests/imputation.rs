mod common;

use cfusion::density::genlog_cumulants;
use cfusion::fusion::FusionConfig;
use cfusion::imputation::{
    impute, impute_unconstrained, ArGenLogModel, ImputationTask, ImputeConfig, SpreadCentre, StepConstraint, SyntheticConfig,
};
use common::*;

fn synthetic(cfg: &SyntheticConfig, len: usize, seed: u64) -> (ArGenLogModel, Vec<Vec<f64>>) {
    let model = cfg.model().unwrap();
    let data = cfg.generate(&model, 200, len, &mut rng(seed)).unwrap();
    (model, data)
}

fn history(data: &[Vec<f64>], upto: usize, k: usize) -> Vec<Vec<f64>> {
    data.iter().map(|s| s[upto - k..upto].to_vec()).collect()
}

fn sums(data: &[Vec<f64>], from: usize, steps: usize) -> Vec<f64> {
    (from..from + steps).map(|t| data.iter().map(|s| s[t]).sum()).collect()
}

#[test]
fn fit_recovers_the_lag_coefficients() {
    let cfg = SyntheticConfig::default();
    let (truth, data) = synthetic(&cfg, 600, 1);
    let fit = ArGenLogModel::fit(7, &data, &vec![vec![]; 600]).unwrap();
    for (f, t) in fit.series.iter().zip(&truth.series) {
        for (a, b) in f.phi.iter().zip(&t.phi) {
            assert!((a - b).abs() < 0.1, "{:?} vs {:?}", f.phi, t.phi);
        }
    }
}

#[test]
fn residuals_and_error_law_have_mean_zero() {
    let cfg = SyntheticConfig { order: 3, cycle: 1.0, ..Default::default() };
    let (_, data) = synthetic(&cfg, 500, 2);
    let cov = cfg.covariates(200, 500);
    let fit = ArGenLogModel::fit(3, &data, &cov).unwrap();
    for (i, s) in fit.series.iter().enumerate() {
        let resid: Vec<f64> = (3..500)
            .map(|t| data[i][t] - fit.predictive_mean(i, &data[i][..t], &cov[t]))
            .collect();
        let m = resid.iter().sum::<f64>() / resid.len() as f64;
        assert!(m.abs() < 1e-9, "series {i}: residual mean {m}");
        assert!(genlog_cumulants(&s.error).unwrap()[0].abs() < 1e-9);
    }
}

#[test]
fn degenerate_designs_are_rejected() {
    let cfg = SyntheticConfig { order: 2, ..Default::default() };
    let (_, data) = synthetic(&cfg, 100, 3);
    // a zero-variance column duplicates the intercept
    assert!(matches!(ArGenLogModel::fit(2, &data, &vec![vec![0.0]; 100]), Err(cfusion::Error::SingularDesign)));
    assert!(ArGenLogModel::fit(2, &data, &vec![vec![]; 99]).is_err());
    let short: Vec<Vec<f64>> = data.iter().map(|s| s[..10].to_vec()).collect();
    assert!(ArGenLogModel::fit(2, &short, &vec![vec![]; 10]).is_err());
}

#[test]
fn one_step_summaries_match_the_predictive_laws() {
    let cfg = SyntheticConfig { order: 2, ..Default::default() };
    let (model, data) = synthetic(&cfg, 50, 4);
    let h = history(&data, 50, 2);
    let task = ImputationTask { history: h.clone(), constraint: StepConstraint::Free, covariates: vec![vec![]], paths: 20_000 };
    let out = impute_unconstrained(&model, &task, &ImputeConfig { seed: 5, ..Default::default() }).unwrap();
    let k = genlog_cumulants(&model.series[0].error).unwrap();
    for s in &out.summaries {
        let mu = model.predictive_mean(s.series, &h[s.series], &[]);
        let se = (k[1] / 20_000.0).sqrt();
        assert!((s.mean - mu).abs() < 4.0 * se, "series {}: {} vs {mu}", s.series, s.mean);
        // sd of a sample variance: √((κ₄ + 2κ₂²)/n)
        let vse = ((k[3] + 2.0 * k[1] * k[1]) / 20_000.0).sqrt();
        assert!((s.var - k[1]).abs() < 4.0 * vse, "series {}: {} vs {}", s.series, s.var, k[1]);
    }
}

#[test]
fn centred_totals_leave_the_means_alone() {
    // equal error laws: given Σε = 0 each error still has mean zero
    let cfg = SyntheticConfig { order: 2, ..Default::default() };
    let (model, data) = synthetic(&cfg, 50, 6);
    let h = history(&data, 50, 2);
    let mu: Vec<f64> = (0..3).map(|i| model.predictive_mean(i, &h[i], &[])).collect();
    let task = ImputationTask { history: h, constraint: StepConstraint::Sum(vec![mu.iter().sum()]), covariates: vec![vec![]], paths: 4_000 };
    let out = impute(&model, &task, &ImputeConfig { seed: 7, ..Default::default() }).unwrap();
    for s in &out.summaries {
        let x: Vec<f64> = out.paths.iter().map(|p| p[0][s.series]).collect();
        let (m, se) = mean_se(&x);
        assert!((m - mu[s.series]).abs() < 4.0 * se, "series {}: {m} ± {se} vs {}", s.series, mu[s.series]);
    }
}

#[test]
fn every_path_conserves_the_totals() {
    let cfg = SyntheticConfig { order: 3, cycle: 0.8, ..Default::default() };
    let (model, data) = synthetic(&cfg, 40, 8);
    let s = sums(&data, 30, 10);
    let task = ImputationTask { history: history(&data, 30, 3), constraint: StepConstraint::Sum(s.clone()), covariates: cfg.covariates(230, 10), paths: 64 };
    let out = impute(&model, &task, &ImputeConfig { seed: 9, ..Default::default() }).unwrap();
    assert!(out.horizon.is_some());
    for p in &out.paths {
        assert_eq!(p.len(), 10);
        for (y, total) in p.iter().zip(&s) {
            assert!((y.iter().sum::<f64>() - total).abs() < 1e-8);
        }
    }
}

#[test]
fn sphere_steps_satisfy_both_equations() {
    let cfg = SyntheticConfig { order: 2, ..Default::default() };
    let (model, data) = synthetic(&cfg, 40, 10);
    let s = sums(&data, 34, 6);
    for centre in [SpreadCentre::Total, SpreadCentre::Mean] {
        let spreads: Vec<f64> = (34..40)
            .enumerate()
            .map(|(k, t)| {
                let c = match centre {
                    SpreadCentre::Total => s[k],
                    SpreadCentre::Mean => s[k] / 3.0,
                };
                data.iter().map(|x| (x[t] - c).powi(2)).sum()
            })
            .collect();
        let task = ImputationTask {
            history: history(&data, 34, 2),
            constraint: StepConstraint::SumAndSpread { sums: s.clone(), spreads: spreads.clone(), centre },
            covariates: vec![vec![]; 6],
            paths: 32,
        };
        let out = impute(&model, &task, &ImputeConfig { seed: 11, ..Default::default() }).unwrap();
        for p in &out.paths {
            for (k, y) in p.iter().enumerate() {
                let c = match centre {
                    SpreadCentre::Total => s[k],
                    SpreadCentre::Mean => s[k] / 3.0,
                };
                assert!((y.iter().sum::<f64>() - s[k]).abs() < 1e-8);
                let spread: f64 = y.iter().map(|v| (v - c).powi(2)).sum();
                assert!((spread - spreads[k]).abs() < 1e-8 * (1.0 + spreads[k]), "{centre:?} step {k}");
            }
        }
    }
}

#[test]
fn future_constraints_do_not_change_the_past() {
    let cfg = SyntheticConfig { order: 2, ..Default::default() };
    let (model, data) = synthetic(&cfg, 40, 12);
    let s = sums(&data, 30, 8);
    let run = |steps: usize| {
        let task = ImputationTask {
            history: history(&data, 30, 2),
            constraint: StepConstraint::Sum(s[..steps].to_vec()),
            covariates: vec![vec![]; steps],
            paths: 16,
        };
        impute(&model, &task, &ImputeConfig { seed: 13, ..Default::default() }).unwrap()
    };
    let short = run(3);
    let long = run(8);
    for (a, b) in short.paths.iter().zip(&long.paths) {
        assert_eq!(a[..], b[..3]);
    }
}

#[test]
fn free_constraint_is_the_unconstrained_pipeline() {
    let cfg = SyntheticConfig { order: 2, ..Default::default() };
    let (model, data) = synthetic(&cfg, 40, 14);
    let s = sums(&data, 30, 5);
    let task = ImputationTask { history: history(&data, 30, 2), constraint: StepConstraint::Sum(s), covariates: vec![vec![]; 5], paths: 50 };
    let free = ImputationTask { constraint: StepConstraint::Free, ..task.clone() };
    let cfg = ImputeConfig { seed: 15, ..Default::default() };
    assert_eq!(impute(&model, &free, &cfg).unwrap(), impute_unconstrained(&model, &task, &cfg).unwrap());
}

#[test]
fn unconstrained_spread_grows_with_the_horizon() {
    let cfg = SyntheticConfig { order: 2, ..Default::default() };
    let (model, data) = synthetic(&cfg, 40, 16);
    let n = 40_000;
    let task = ImputationTask { history: history(&data, 40, 2), constraint: StepConstraint::Free, covariates: vec![vec![]; 6], paths: n };
    let out = impute_unconstrained(&model, &task, &ImputeConfig { seed: 17, ..Default::default() }).unwrap();
    let k = genlog_cumulants(&model.series[0].error).unwrap();
    for t in 1..6 {
        let (a, b) = (out.total_variance(t - 1), out.total_variance(t));
        // each series' variance is estimated with relative sd about √((κ₄/κ₂² + 2)/n)
        let rel = ((k[3] / (k[1] * k[1]) + 2.0) / n as f64).sqrt();
        assert!(b >= a - 4.0 * rel * (a + b) / 3f64.sqrt(), "step {t}: {a} → {b}");
    }
    assert!(out.total_variance(5) > out.total_variance(0));
}

#[test]
fn constraints_reduce_the_total_error() {
    // high error variance: the aggregate carries most of the information
    let cfg = SyntheticConfig { order: 2, gamma: 2.0, ..Default::default() };
    let model = cfg.model().unwrap();
    let (mut with, mut without) = (0.0, 0.0);
    for rep in 0..20 {
        let data = cfg.generate(&model, 200, 12, &mut rng(100 + rep)).unwrap();
        let task = ImputationTask { history: history(&data, 2, 2), constraint: StepConstraint::Sum(sums(&data, 2, 10)), covariates: vec![vec![]; 10], paths: 64 };
        let ic = ImputeConfig { seed: 200 + rep, ..Default::default() };
        let mse = |imp: &cfusion::imputation::Imputation| -> f64 {
            imp.summaries.iter().map(|s| (s.mean - data[s.series][2 + s.t]).powi(2) + s.var).sum()
        };
        with += mse(&impute(&model, &task, &ic).unwrap());
        without += mse(&impute_unconstrained(&model, &task, &ic).unwrap());
    }
    assert!(with < without, "{with} vs {without}");
}

#[test]
fn exhausted_budgets_name_the_step() {
    let cfg = SyntheticConfig { order: 2, ..Default::default() };
    let (model, data) = synthetic(&cfg, 40, 18);
    let mut s = sums(&data, 30, 4);
    s[2] += 500.0;
    let task = ImputationTask { history: history(&data, 30, 2), constraint: StepConstraint::Sum(s), covariates: vec![vec![]; 4], paths: 4 };
    let ic = ImputeConfig { fusion: FusionConfig { attempt_budget: 200, ..Default::default() }, horizon: Some(1.0), seed: 19 };
    match impute(&model, &task, &ic) {
        Err(cfusion::Error::Imputation { step, .. }) => assert_eq!(step, 2),
        other => panic!("{other:?}"),
    }
}
