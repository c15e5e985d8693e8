//! Monte Carlo experiments and exact small-case oracles.
//!
//! Replicas are independent tasks keyed by their index: replica `r` of an
//! experiment with master seed `s` draws everything from
//! [`replica_seed`]`(s, r)`. Results are collected in index order, so every
//! number reported here is a function of `(seed, parameters)` alone.

use rayon::prelude::*;

use crate::lattice::{Grid, NoiseKind, Rect, WeightConfig};
use crate::rng::{replica_seed, RngKey, StreamTag};
use crate::{Error, Result};

mod corr_decay;
mod covariance;
mod heatmap;
mod influence;
mod random_walk;
mod sandwich;
mod scaling;

pub use corr_decay::{corr_decay, noise_comparison, CorrDecay, CorrPoint, NoiseComparison};
pub use covariance::{
    covariance_monotonicity_bruteforce, covariance_monotonicity_sweep, scaled_noisy_moment, CovMonoSpec,
    CovMonoSweep,
};
pub use heatmap::{geodesic_heatmap, HeatmapResult, OffDiagonalBin};
pub use influence::{bit_influence_on_tn, influence_sites, visit_vs_influence, InfluenceRow, VisitInfluence};
pub use random_walk::{exact_nonneg_probability, rw_nonneg_bound, DistSpec, RwBoundRecord};
pub use sandwich::{sandwich_experiment, SandwichConstants, SandwichReport};
pub use scaling::{
    envelope_b_contains, envelope_i, envelope_probability, mid_height_deviation, transversal_exponent,
    variance_scaling, EnvelopeEstimate, ExponentFit, VarianceScaling,
};

/// Bootstrap resamples for slope intervals.
pub const BOOTSTRAP_RESAMPLES: usize = 1000;

/// Run `f(r, replica_seed(seed, r))` for `r = 0..replicas` in parallel,
/// returning results in index order.
pub fn replicate<T: Send>(
    replicas: usize,
    seed: u64,
    f: impl Fn(usize, u64) -> Result<T> + Sync + Send,
) -> Result<Vec<T>> {
    (0..replicas).into_par_iter().map(|r| f(r, replica_seed(seed, r as u64))).collect()
}

pub(crate) fn check_replicas(replicas: usize, min: usize) -> Result<()> {
    if replicas < min {
        return Err(Error::parameter("replicas", format!("need at least {min}, got {replicas}")));
    }
    Ok(())
}

pub(crate) fn check_n(n: i64, min: i64) -> Result<()> {
    if n < min {
        return Err(Error::parameter("n", format!("need n ≥ {min}, got {n}")));
    }
    Ok(())
}

/// Independent seed for one sub-experiment (a scale, a parameter value).
pub(crate) fn sub_seed(seed: u64, label: u64) -> u64 {
    RngKey::global(seed, label, StreamTag::Generic).hash()
}

/// The base field and its noisy versions at each clock, materialized over
/// `rect` in one pass. Entry 0 is the base field.
pub(crate) fn noisy_grids(cfg: &WeightConfig, kind: NoiseKind, ts: &[f64], rect: Rect) -> Result<Vec<Grid<i64>>> {
    let mut clocks = Vec::with_capacity(ts.len() + 1);
    clocks.push(0.0);
    clocks.extend_from_slice(ts);
    let mut data: Vec<Vec<i64>> = vec![Vec::with_capacity(rect.area()); clocks.len()];
    let mut out = vec![0u64; clocks.len()];
    for v in rect.points() {
        cfg.noisy_weights(v, kind, &clocks, &mut out)?;
        for (d, &w) in data.iter_mut().zip(&out) {
            d.push(w as i64);
        }
    }
    data.into_iter().map(|d| Grid::from_vec(rect, d)).collect()
}
