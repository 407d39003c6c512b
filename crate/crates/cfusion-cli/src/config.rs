//! Experiment configuration. A single TOML file may carry a section per
//! subcommand; every section and key is optional and unknown keys are
//! rejected.

use std::path::PathBuf;

use serde::Deserialize;

use crate::HarnessError;

#[derive(Debug, Clone, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub toy: ToyConfig,
    pub compare: CompareConfig,
    pub nonlinear: NonlinearConfig,
    pub timing: TimingConfig,
    pub mse_table: MseTableConfig,
    pub impute: ImputeConfig,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, HarnessError> {
        toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))
    }

    pub fn load(path: &std::path::Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioId {
    Genlog,
    StudentT,
    Gaussian,
}

impl ScenarioId {
    pub fn name(self) -> &'static str {
        match self {
            ScenarioId::Genlog => "genlog",
            ScenarioId::StudentT => "student_t",
            ScenarioId::Gaussian => "gaussian",
        }
    }
}

impl std::str::FromStr for ScenarioId {
    type Err = HarnessError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "genlog" => Ok(ScenarioId::Genlog),
            "student_t" | "t" => Ok(ScenarioId::StudentT),
            "gaussian" => Ok(ScenarioId::Gaussian),
            _ => Err(HarnessError::Config(format!("unknown scenario {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum SamplerId {
    Cf,
    Is,
    Mh,
    Chmc,
}

impl SamplerId {
    pub fn name(self) -> &'static str {
        match self {
            SamplerId::Cf => "cf",
            SamplerId::Is => "is",
            SamplerId::Mh => "mh",
            SamplerId::Chmc => "chmc",
        }
    }
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct ChmcSection {
    pub step_size: f64,
    pub leapfrog_steps: usize,
}

impl Default for ChmcSection {
    fn default() -> Self {
        Self { step_size: 0.1, leapfrog_steps: 10 }
    }
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct ToyConfig {
    pub n: usize,
    pub replicates: usize,
    /// fixed horizon instead of the pilot-tuned one
    pub horizon: Option<f64>,
}

impl Default for ToyConfig {
    fn default() -> Self {
        Self { n: 10_000, replicates: 1, horizon: None }
    }
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct CompareConfig {
    pub scenario: ScenarioId,
    pub samplers: Vec<SamplerId>,
    pub grid: Vec<usize>,
    pub burn_in: usize,
    /// variance multiplier of the importance proposal
    pub is_inflation: f64,
    pub chmc: ChmcSection,
}

impl Default for CompareConfig {
    fn default() -> Self {
        Self {
            scenario: ScenarioId::Genlog,
            samplers: vec![SamplerId::Cf, SamplerId::Is, SamplerId::Mh, SamplerId::Chmc],
            grid: vec![100, 300, 1000, 3000, 10_000],
            burn_in: 10_000,
            is_inflation: 1.0,
            chmc: ChmcSection::default(),
        }
    }
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct NonlinearConfig {
    pub n: usize,
    pub replicates: usize,
    /// required value of `Σx / m`
    pub mean: f64,
    /// required value of `Σx² / m`
    pub mean_square: f64,
    /// `(location, scale, degrees of freedom)` per component
    pub components: Vec<[f64; 3]>,
    /// distance within which a draw counts as visiting a mode
    pub tolerance: f64,
}

impl Default for NonlinearConfig {
    fn default() -> Self {
        Self {
            n: 600,
            replicates: 1,
            mean: 0.0,
            mean_square: 8.0,
            components: vec![[0.0, 0.6, 9.0], [0.0, 0.6, 9.0], [0.0, 4.0, 3.0]],
            tolerance: 0.5,
        }
    }
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct TimingConfig {
    pub scenarios: Vec<ScenarioId>,
    pub samplers: Vec<SamplerId>,
    pub n: usize,
    pub burn_in: usize,
    /// CF draws on the nonlinear problem; zero skips it
    pub nonlinear_n: usize,
    pub chmc: ChmcSection,
}

impl Default for TimingConfig {
    fn default() -> Self {
        Self {
            scenarios: vec![ScenarioId::Genlog, ScenarioId::StudentT],
            samplers: vec![SamplerId::Cf, SamplerId::Is, SamplerId::Mh, SamplerId::Chmc],
            n: 10_000,
            burn_in: 10_000,
            nonlinear_n: 600,
            chmc: ChmcSection::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Gaussian,
    StudentT,
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct MseRow {
    pub family: Family,
    pub alpha: Vec<f64>,
    /// variances for Gaussian rows, squared scales for Student-T rows
    pub sigma2: Vec<f64>,
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct MseTableConfig {
    /// Monte Carlo draws per Gaussian row
    pub draws: usize,
    /// constrained-fusion draws per Student-T row
    pub cf_draws: usize,
    pub student_t_dof: f64,
    pub rows: Vec<MseRow>,
}

impl Default for MseTableConfig {
    fn default() -> Self {
        let row = |family, alpha: [f64; 3], sigma2: [f64; 3]| MseRow { family, alpha: alpha.to_vec(), sigma2: sigma2.to_vec() };
        use Family::*;
        Self {
            draws: 100_000,
            cf_draws: 10_000,
            student_t_dof: 5.0,
            rows: vec![
                row(Gaussian, [0.1, -1.0, 2.0], [1.0, 4.0, 10.0]),
                row(Gaussian, [0.1, -2.0, 4.0], [1.0, 4.0, 10.0]),
                row(Gaussian, [1.0, -3.0, 8.0], [1.0, 4.0, 10.0]),
                row(Gaussian, [10.0, -3.0, -5.0], [1.0, 2.0, 3.0]),
                row(Gaussian, [10.0, -3.0, -5.0], [2.0, 2.0, 2.0]),
                row(StudentT, [0.1, -2.0, 4.0], [1.0, 4.0, 10.0]),
                row(StudentT, [1.0, -3.0, 8.0], [1.0, 4.0, 10.0]),
                row(StudentT, [10.0, -3.0, -5.0], [1.0, 2.0, 3.0]),
                row(StudentT, [10.0, -3.0, -5.0], [2.0, 2.0, 2.0]),
            ],
        }
    }
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum ImputeConstraint {
    Sum,
    SumSpread,
    None,
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum Centre {
    Total,
    Mean,
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct SyntheticSection {
    pub series: usize,
    pub order: usize,
    pub lag_mass: f64,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub cycle: f64,
    pub period: usize,
}

impl Default for SyntheticSection {
    fn default() -> Self {
        Self { series: 3, order: 7, lag_mass: 0.7, alpha: 3.0, beta: 0.4, gamma: 2.0, cycle: 1.0, period: 24 }
    }
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct ImputeConfig {
    pub synthetic: SyntheticSection,
    /// long-format CSV `t,series,value[,covariates...]` replacing the
    /// synthetic data
    pub input: Option<PathBuf>,
    /// training length (synthetic data only; CSV input uses everything
    /// before the last `steps` time points)
    pub train: usize,
    pub steps: usize,
    pub paths: usize,
    pub constraint: ImputeConstraint,
    pub centre: Centre,
    /// fit the model to the training data instead of using the generator
    pub fit: bool,
    pub horizon: Option<f64>,
}

impl Default for ImputeConfig {
    fn default() -> Self {
        Self {
            synthetic: SyntheticSection::default(),
            input: None,
            train: 600,
            steps: 24,
            paths: 1000,
            constraint: ImputeConstraint::Sum,
            centre: Centre::Total,
            fit: true,
            horizon: None,
        }
    }
}
