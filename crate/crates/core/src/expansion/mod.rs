//! Monte Carlo estimators for the cluster expansion: tree-parametrized
//! cluster paths, their weighted integrals, aggregate terms with the
//! truncated-function signs, and empirical exponential moments/cumulants of
//! molecular-dynamics ensembles.

mod aggregate;
mod functional;
mod moments;
mod nu;
mod reconstruct;

pub use aggregate::{estimate_aggregate_term, AggregateDraw, AggregateEstimate, AggregateOptions, AggregateSampler};
pub use functional::TestFunctional;
pub use moments::{
    cluster_sums, cumulant_estimates, empirical_characteristic_function, empirical_exponential_moment,
    fit_cumulant_decay, single_particle_sums, CumulantEstimate, LambdaPoint,
};
pub use nu::{estimate_nu_integral, DirectionMode, NuEstimate, NuOptions, PathSampler, SampledPath};
pub use reconstruct::{
    extract_params, reconstruct_cluster_path, DecoratedTreeParams, Incompatibility, Reconstruction,
    ROUND_TRIP_TOL,
};
