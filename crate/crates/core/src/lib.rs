//! Hard-sphere gas laboratory.
//!
//! Event-driven hard-sphere dynamics on the unit torus in the low-density
//! (Boltzmann–Grad) scaling `mu = eps^(1-d)`, decomposition of realizations
//! into dynamical cluster paths, the combinatorics and Monte Carlo
//! estimators of the cluster expansion, and two limiting reference models
//! (DSMC for the Boltzmann equation, a stochastic coagulation process for
//! cluster paths).

pub mod cluster;
pub mod combinatorics;
pub mod config;
pub mod engine;
pub mod ensemble;
pub mod error;
pub mod expansion;
pub mod experiments;
pub mod geometry;
pub mod limits;
pub mod oracles;
pub mod output;
pub mod rng;
pub mod sampler;
pub mod stats;
pub mod trajectory;
pub mod union_find;
pub mod validate;
pub mod vector;

pub use cluster::{ClusterPath, InteractionGraph, OverlapGraph};
pub use combinatorics::{OrderedTree, SignedOrderedTree, SimpleGraph};
pub use config::RunConfig;
pub use error::{Error, Result};
pub use geometry::{Contact, ContactEvent, PhasePoint};
pub use sampler::{Configuration, InitialModel, Profile, SamplerMode};
pub use stats::{Estimator, Histogram};
pub use trajectory::{CollisionLog, CollisionRecord, RunRecord, Trajectory};
pub use vector::Vector;

/// Boltzmann–Grad activity `eps^(1-d)`.
pub fn boltzmann_grad_mu(d: usize, eps: f64) -> f64 {
    eps.powi(1 - d as i32)
}
