use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::trajectory::Trajectory;

type SingleFn<const D: usize> = Arc<dyn Fn(&Trajectory<D>) -> f64 + Send + Sync>;
type ClusterFn<const D: usize> = Arc<dyn Fn(&[Trajectory<D>]) -> f64 + Send + Sync>;

#[derive(Clone)]
enum Kind<const D: usize> {
    Zero,
    Single(SingleFn<D>),
    Cluster(ClusterFn<D>),
}

/// Path functional `H`: either a sum `sum_i h(z_i([0,T]))` over particles
/// or a general function of a cluster path.
///
/// The growth envelope `|H(Z)| <= c1 |Z| + c2 E_Z` with `c2 <= beta/4` is
/// declared through `c1`, `c2`; continuity under uniform convergence of
/// paths is the caller's responsibility.
#[derive(Clone)]
pub struct TestFunctional<const D: usize> {
    kind: Kind<D>,
    pub c1: f64,
    pub c2: f64,
}

impl<const D: usize> fmt::Debug for TestFunctional<D> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let k = match self.kind {
            Kind::Zero => "zero",
            Kind::Single(_) => "single-particle",
            Kind::Cluster(_) => "cluster",
        };
        write!(f, "TestFunctional({k}, c1 = {}, c2 = {})", self.c1, self.c2)
    }
}

impl<const D: usize> TestFunctional<D> {
    pub fn zero() -> Self {
        Self {
            kind: Kind::Zero,
            c1: 0.0,
            c2: 0.0,
        }
    }

    pub fn single(h: impl Fn(&Trajectory<D>) -> f64 + Send + Sync + 'static, c1: f64, c2: f64) -> Self {
        Self {
            kind: Kind::Single(Arc::new(h)),
            c1,
            c2,
        }
    }

    pub fn cluster(h: impl Fn(&[Trajectory<D>]) -> f64 + Send + Sync + 'static, c1: f64, c2: f64) -> Self {
        Self {
            kind: Kind::Cluster(Arc::new(h)),
            c1,
            c2,
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.kind, Kind::Zero)
    }

    pub fn is_single_particle(&self) -> bool {
        matches!(self.kind, Kind::Single(_) | Kind::Zero)
    }

    /// `H` of a cluster path given by its member trajectories.
    pub fn eval(&self, paths: &[Trajectory<D>]) -> f64 {
        match &self.kind {
            Kind::Zero => 0.0,
            Kind::Single(h) => paths.iter().map(|t| h(t)).sum(),
            Kind::Cluster(h) => h(paths),
        }
    }

    /// `h` of one trajectory, for single-particle functionals.
    pub fn eval_single(&self, path: &Trajectory<D>) -> Option<f64> {
        match &self.kind {
            Kind::Zero => Some(0.0),
            Kind::Single(h) => Some(h(path)),
            Kind::Cluster(_) => None,
        }
    }

    /// Checks the declared envelope against the temperature.
    pub fn check_envelope(&self, beta: f64) -> Result<()> {
        if self.c1 < 0.0 || self.c2 < 0.0 || self.c2 > beta / 4.0 {
            return Err(Error::InvalidParameter(format!(
                "growth constants c1 = {}, c2 = {} need c1 >= 0 and 0 <= c2 <= beta/4 = {}",
                self.c1,
                self.c2,
                beta / 4.0
            )));
        }
        Ok(())
    }
}
