//! Poisson thinning for the event of probability `exp(−∫₀ᵀ φ(ω_s) ds)`.

use rand::{Rng, RngCore};
use rand_distr::{Distribution, Poisson};

use crate::bridge::{layer_and_decompose, BridgeSkeleton, LayerSequence};
use crate::density::ComponentDensity;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ThinningOutcome {
    pub accepted: bool,
    pub poisson_points_used: u64,
    pub bridge_points_revealed: u64,
}

fn poisson_count(mean: f64, rng: &mut dyn RngCore) -> Result<u64> {
    if mean <= 0.0 {
        return Ok(0);
    }
    if !mean.is_finite() {
        return Err(Error::BoundViolation { phi: f64::INFINITY, bound: mean });
    }
    let p = Poisson::new(mean).map_err(|e| Error::Parameter(e.to_string()))?;
    Ok(p.sample(rng) as u64)
}

/// Thin a unit-rate Poisson process on `[0, T] × [0, bound]` against φ along
/// the `d` coordinate bridges in `paths`. `bound` must dominate φ on every
/// value the paths can take.
pub fn accept_bounded(
    density: &dyn ComponentDensity,
    paths: &mut [BridgeSkeleton],
    bound: f64,
    rng: &mut dyn RngCore,
) -> Result<ThinningOutcome> {
    if paths.len() != density.dim() {
        return Err(Error::Parameter(format!("{} bridges for a {}-dimensional density", paths.len(), density.dim())));
    }
    let t = paths.first().map_or(0.0, |p| p.horizon());
    let n = poisson_count(t * bound, rng)?;
    let mut out = ThinningOutcome { accepted: true, ..Default::default() };
    let mut point = vec![0.0; paths.len()];
    for _ in 0..n {
        let s = t * rng.random::<f64>();
        let mark = bound * rng.random::<f64>();
        for (p, v) in paths.iter_mut().zip(point.iter_mut()) {
            *v = p.interpolate(s, rng)?;
        }
        out.poisson_points_used += 1;
        out.bridge_points_revealed += paths.len() as u64;
        let phi = density.phi(&point);
        if phi > bound * (1.0 + 1e-12) {
            return Err(Error::BoundViolation { phi, bound });
        }
        if mark <= phi {
            out.accepted = false;
            return Ok(out);
        }
    }
    Ok(out)
}

/// Layered thinning: each coordinate bridge is assigned a layer and split at
/// its extremum, φ is bounded on the resulting box, and the bounded procedure
/// runs on the decomposed paths.
pub fn accept_layered(
    density: &dyn ComponentDensity,
    paths: &mut [BridgeSkeleton],
    layers: &LayerSequence,
    rng: &mut dyn RngCore,
) -> Result<ThinningOutcome> {
    let mut lower = Vec::with_capacity(paths.len());
    let mut upper = Vec::with_capacity(paths.len());
    for p in paths.iter_mut() {
        *p = layer_and_decompose(p, layers, rng)?;
        let (lo, hi) = p.value_bounds();
        lower.push(lo);
        upper.push(hi);
    }
    let bound = density.phi_interval_bound(&lower, &upper);
    let mut out = accept_bounded(density, paths, bound, rng)?;
    out.bridge_points_revealed += paths.len() as u64;
    Ok(out)
}

/// How a component's bridge is thinned.
#[derive(Debug, Clone, PartialEq)]
pub enum ThinningMode {
    /// global bound when the density has one, layers otherwise
    Auto { layer_scale: f64 },
    Layered { layer_scale: f64 },
}

impl Default for ThinningMode {
    fn default() -> Self {
        ThinningMode::Auto { layer_scale: 1.0 }
    }
}

/// Thin the bridges from `x` to `y` over `[0, t]` for one component.
pub fn accept_component(
    density: &dyn ComponentDensity,
    x: &[f64],
    y: &[f64],
    t: f64,
    mode: &ThinningMode,
    rng: &mut dyn RngCore,
) -> Result<ThinningOutcome> {
    let mut paths = x.iter().zip(y).map(|(&a, &b)| BridgeSkeleton::new(t, a, b)).collect::<Result<Vec<_>>>()?;
    match (mode, density.phi_global_bound()) {
        (ThinningMode::Auto { .. }, Some(m)) => accept_bounded(density, &mut paths, m, rng),
        (ThinningMode::Auto { layer_scale } | ThinningMode::Layered { layer_scale }, _) => {
            let layers = LayerSequence::for_horizon(t, *layer_scale)?;
            accept_layered(density, &mut paths, &layers, rng)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::Gaussian;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_bound_accepts_without_points() {
        let g = Gaussian::standard();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut p = vec![BridgeSkeleton::new(1.0, 0.0, 0.0).unwrap()];
        let o = accept_bounded(&g, &mut p, 0.0, &mut rng).unwrap();
        assert!(o.accepted);
        assert_eq!(o.poisson_points_used, 0);
    }

    #[test]
    fn invalid_bound_is_reported() {
        let g = Gaussian::standard();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut hit = false;
        for _ in 0..50 {
            let mut p = vec![BridgeSkeleton::new(1.0, 5.0, 5.0).unwrap()];
            match accept_bounded(&g, &mut p, 0.5, &mut rng) {
                Err(Error::BoundViolation { .. }) => hit = true,
                Ok(o) => assert_eq!(o.poisson_points_used, 0),
                Err(e) => panic!("{e}"),
            }
        }
        assert!(hit);
    }
}
