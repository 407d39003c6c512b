//! Exact Monte Carlo sampling of product densities restricted to equality
//! constraints, by Langevin diffusion bridges and Poisson thinning.
//!
//! The entry point is [`fusion::FusionSampler`]: build a
//! [`fusion::FusionProblem`] from component densities ([`density`]) and a
//! [`constraint::Constraint`], then draw. The remaining modules supply the
//! bridge machinery, baselines for comparison, closed-form Gaussian
//! conditioning and a constrained time-series imputation pipeline.

pub mod baseline;
pub mod bridge;
pub mod chmc;
pub mod constraint;
pub mod density;
pub mod directional;
pub mod error;
pub mod fusion;
pub mod gaussian;
pub mod imputation;
pub mod optim;
pub mod quadrature;
pub mod series;
pub mod special;
pub mod stats;
pub mod thinning;

pub use error::{Error, Result};
