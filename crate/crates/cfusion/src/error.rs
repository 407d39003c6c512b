use thiserror::Error;

use crate::fusion::Diagnostics;

/// Every failure mode surfaced by the sampler.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("point outside the support of the density")]
    Domain,

    #[error("alternating series did not separate the uniform within {0} terms")]
    NonConvergence(usize),

    #[error("phi value {phi} exceeds the declared bound {bound}")]
    BoundViolation { phi: f64, bound: f64 },

    #[error("constraint matrix is rank deficient (singular value ratio {0:e})")]
    RankDeficient(f64),

    #[error("proposal mean coincides with the sphere centre")]
    DegenerateCenter,

    #[error("could not project onto the constraint set")]
    ProjectionFailure,

    #[error("attempt budget of {budget} exhausted ({diagnostics})")]
    BudgetExhausted { budget: u64, diagnostics: Diagnostics },

    #[error("optimizer failed: {0}")]
    Optimizer(String),

    #[error("regression design matrix is singular")]
    SingularDesign,

    #[error("quadrature did not reach tolerance (error estimate {0:e})")]
    Tolerance(f64),

    #[error("reference value too close to zero for a relative error")]
    DivisionGuard,

    #[error("imputation failed at step {step}: {source}")]
    Imputation { step: usize, source: Box<Error> },
}

pub type Result<T> = std::result::Result<T, Error>;
