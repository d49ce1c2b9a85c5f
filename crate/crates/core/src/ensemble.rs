//! Independent MD runs on a worker pool. Run `r` draws from random stream
//! `r` of the seed, and results come back in run order, so the output does
//! not depend on the number of workers.

use rayon::prelude::*;

use crate::engine::{run_with_options, EngineOptions};
use crate::error::{Error, Result};
use crate::rng::{stream, Domain};
use crate::sampler::{sample_initial_config, Configuration, InitialModel, SamplerMode};
use crate::trajectory::RunRecord;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnsembleSpec {
    pub mu: f64,
    pub eps: f64,
    pub horizon: f64,
    pub model: InitialModel,
    pub sampler: SamplerMode,
    pub engine: EngineOptions,
    pub seed: u64,
    pub runs: usize,
}

impl EnsembleSpec {
    /// Boltzmann–Grad activity, default sampler for the dimension.
    pub fn new(d: usize, eps: f64, horizon: f64, model: InitialModel, seed: u64, runs: usize) -> Self {
        Self {
            mu: crate::boltzmann_grad_mu(d, eps),
            eps,
            horizon,
            model,
            sampler: SamplerMode::default_for_dimension(d),
            engine: EngineOptions::default(),
            seed,
            runs,
        }
    }

    pub fn initial_config<const D: usize>(&self, r: usize) -> Result<Configuration<D>> {
        let mut rng = stream(self.seed, Domain::Runs, r as u64);
        sample_initial_config(self.mu, self.eps, &self.model, self.sampler, &mut rng)
    }

    /// Run `r` of the ensemble.
    pub fn run<const D: usize>(&self, r: usize) -> Result<RunRecord<D>> {
        let config = self.initial_config::<D>(r)?;
        run_with_options(&config, self.horizon, self.engine)
    }
}

/// Builds a pool with `workers` threads (all cores when `None`).
pub fn pool(workers: Option<usize>) -> Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(w) = workers {
        if w == 0 {
            return Err(Error::InvalidParameter("workers must be at least 1".into()));
        }
        b = b.num_threads(w);
    }
    b.build().map_err(|e| Error::InvalidParameter(e.to_string()))
}

/// Runs every member of the ensemble and maps it through `f`; results in
/// run order. The first error (in run order) is returned.
pub fn run_ensemble<const D: usize, T, F>(spec: &EnsembleSpec, workers: Option<usize>, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize, RunRecord<D>) -> Result<T> + Sync + Send,
{
    let pool = pool(workers)?;
    pool.install(|| {
        (0..spec.runs)
            .into_par_iter()
            .map(|r| spec.run::<D>(r).and_then(|rec| f(r, rec)))
            .collect()
    })
}

/// Same as [`run_ensemble`] on the current rayon pool.
pub fn map_runs<const D: usize, T, F>(spec: &EnsembleSpec, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize, RunRecord<D>) -> Result<T> + Sync + Send,
{
    (0..spec.runs)
        .into_par_iter()
        .map(|r| spec.run::<D>(r).and_then(|rec| f(r, rec)))
        .collect()
}
