//! Simulation and exact-verification toolkit for noise sensitivity of
//! planar last-passage percolation with geometric weights.
//!
//! Layers, bottom-up:
//! - [`rng`]: keyed counter-based randomness;
//! - [`lattice`]: geometric weight fields, their Bernoulli encoding and the
//!   bit / site / coupled noise dynamics;
//! - [`lpp`]: max-plus dynamic programming, geodesics, increment profiles;
//! - [`stationary`]: the boundary (Burke) model and its queueing coupling;
//! - [`cube`]: exact Boolean-cube semigroup calculus;
//! - [`estimators`]: Monte Carlo experiments and small exact oracles;
//! - [`cli`]: configuration, experiment runner and CSV/JSON output.

pub mod cli;
pub mod cube;
pub mod estimators;
pub mod lattice;
pub mod lpp;
pub mod rng;
pub mod stationary;
pub mod stats;

mod error;

pub use error::{Error, Result};
pub use lattice::{Point, Rect};
