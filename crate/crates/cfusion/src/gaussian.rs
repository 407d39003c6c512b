//! Closed-form conditioning of independent Gaussians on their sum, and the
//! decomposition of the mean-squared-error gain that conditioning buys.

use nalgebra::DMatrix;
use rand::RngCore;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

/// `N(μ̂, diag σ̂²)` conditioned on `Σ yᵢ = s`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianConditioning {
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
    pub sum: f64,
    /// `w² = Σ σ̂ᵢ²`
    pub total_var: f64,
    /// `λᵢ = σ̂ᵢ² / w²`
    pub shares: Vec<f64>,
    pub cond_mean: Vec<f64>,
    pub cond_cov: DMatrix<f64>,
}

pub fn condition_on_sum(mean: &[f64], var: &[f64], s: f64) -> Result<GaussianConditioning> {
    if mean.len() != var.len() || mean.is_empty() {
        return Err(Error::Parameter("mean and variance vectors must be non-empty and equally long".into()));
    }
    if let Some(v) = var.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
        return Err(Error::Parameter(format!("variances must be positive, got {v}")));
    }
    let w2: f64 = var.iter().sum();
    let shares: Vec<f64> = var.iter().map(|v| v / w2).collect();
    let gap = s - mean.iter().sum::<f64>();
    let cond_mean = mean.iter().zip(&shares).map(|(m, l)| m + l * gap).collect();
    let m = mean.len();
    let cond_cov = DMatrix::from_fn(m, m, |i, j| if i == j { var[i] } else { 0.0 } - var[i] * var[j] / w2);
    Ok(GaussianConditioning { mean: mean.to_vec(), var: var.to_vec(), sum: s, total_var: w2, shares, cond_mean, cond_cov })
}

impl GaussianConditioning {
    /// One exact draw: an unconstrained draw shifted along the shares.
    pub fn sample(&self, rng: &mut dyn RngCore, out: &mut [f64]) {
        for ((o, m), v) in out.iter_mut().zip(&self.mean).zip(&self.var) {
            let z: f64 = StandardNormal.sample(rng);
            *o = m + v.sqrt() * z;
        }
        let gap = self.sum - out.iter().sum::<f64>();
        for (o, l) in out.iter_mut().zip(&self.shares) {
            *o += l * gap;
        }
    }

    pub fn trace(&self) -> f64 {
        self.cond_cov.trace()
    }
}

/// Split of the MSE gain into the residue-correction part `Ψ₁` and the
/// variance-reduction part `Ψ₂`.
#[derive(Debug, Clone, PartialEq)]
pub struct MseDecomposition {
    pub residues: Vec<f64>,
    pub psi1: f64,
    pub psi2: f64,
    /// per-component variance reduction `σ̂ᵢ⁴ / w²`
    pub var_reduction: Vec<f64>,
    /// residues after conditioning, `αᵢ − λᵢ Σⱼ αⱼ`
    pub corrected_residues: Vec<f64>,
}

impl MseDecomposition {
    pub fn total(&self) -> f64 {
        self.psi1 + self.psi2
    }
}

pub fn mse_improvement(residues: &[f64], var: &[f64]) -> Result<MseDecomposition> {
    if residues.len() != var.len() {
        return Err(Error::Parameter("residue and variance vectors differ in length".into()));
    }
    let w2: f64 = var.iter().sum();
    let sd: f64 = residues.iter().sum();
    let corrected: Vec<f64> = residues.iter().zip(var).map(|(a, v)| a - v / w2 * sd).collect();
    let psi1 = residues.iter().map(|a| a * a).sum::<f64>() - corrected.iter().map(|a| a * a).sum::<f64>();
    let var_reduction: Vec<f64> = var.iter().map(|v| v * v / w2).collect();
    let psi2 = var_reduction.iter().sum();
    Ok(MseDecomposition { residues: residues.to_vec(), psi1, psi2, var_reduction, corrected_residues: corrected })
}

/// Whether `|αᵢ| ≤ λᵢ M` for every `i` and `w² ≥ 2 |Σαᵢ| M`.
pub fn uncertainty_domination_check(residues: &[f64], var: &[f64], m: f64) -> Result<bool> {
    if !(m > 0.0) {
        return Err(Error::Parameter(format!("bound M must be positive, got {m}")));
    }
    if residues.len() != var.len() {
        return Err(Error::Parameter("residue and variance vectors differ in length".into()));
    }
    let w2: f64 = var.iter().sum();
    let sd: f64 = residues.iter().sum();
    let each = residues.iter().zip(var).all(|(a, v)| a.abs() <= v / w2 * m);
    Ok(each && w2 >= 2.0 * sd.abs() * m)
}
