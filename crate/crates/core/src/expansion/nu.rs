use rand::Rng;
use rayon::prelude::*;

use crate::combinatorics::{ordered_tree_count, sample_ordered_tree, ENUMERATION_MAX};
use crate::error::{Error, Result};
use crate::geometry::{kappa, sample_cross_section_direction, sample_unit_vector, scatter, sphere_area};
use crate::rng::{stream, Domain, StreamRng};
use crate::sampler::{evaluate_f0, maxwellian, sample_maxwellian, InitialModel};
use crate::stats::Estimator;
use crate::vector::{self, Vector};

use super::functional::TestFunctional;
use super::reconstruct::{reconstruct_cluster_path, DecoratedTreeParams, Reconstruction};

/// How deflection vectors are proposed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DirectionMode {
    /// Uniform on the sphere; the cross-section factor is carried in the weight.
    #[default]
    Uniform,
    /// Proportional to the cross section `(-(v_a - v_b) . omega)_+`.
    CrossSection,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NuOptions {
    pub directions: DirectionMode,
    /// Reference Maxwellian inverse temperature as a fraction of `beta`.
    pub beta_ref_ratio: f64,
    /// Samples per random stream chunk.
    pub chunk: usize,
}

impl Default for NuOptions {
    fn default() -> Self {
        Self {
            directions: DirectionMode::Uniform,
            beta_ref_ratio: 0.5,
            chunk: 4096,
        }
    }
}

/// Importance sampler for size-`n` cluster paths in tree coordinates.
///
/// Each draw estimates `(1/n!) sum_T int dy dmu_sing F 1_compat`, the
/// per-activity integral of the size-`n` cluster-path measure: the weight is
/// the integrand divided by the proposal density (uniform root, reference
/// Maxwellian velocities, uniform ordered times, proposed directions,
/// uniform ordered tree).
#[derive(Debug, Clone)]
pub struct PathSampler {
    pub n: usize,
    pub eps: f64,
    pub horizon: f64,
    pub model: InitialModel,
    pub options: NuOptions,
    /// `(n-1)! / T^(n-1)`
    time_density: f64,
    tree_count: f64,
    n_factorial: f64,
}

/// One weighted proposal.
#[derive(Debug, Clone)]
pub struct SampledPath<const D: usize> {
    pub params: DecoratedTreeParams<D>,
    pub reconstruction: Reconstruction<D>,
    /// Importance weight without the `exp(H)` factor; zero when incompatible.
    pub weight: f64,
}

impl<const D: usize> SampledPath<D> {
    pub fn compatible(&self) -> bool {
        self.reconstruction.compatible
    }

    /// Member trajectories of the replayed path.
    pub fn trajectories(&self) -> &[crate::trajectory::Trajectory<D>] {
        self.reconstruction
            .record
            .as_ref()
            .map(|r| r.trajectories.as_slice())
            .unwrap_or(&[])
    }
}

impl PathSampler {
    pub fn new(n: usize, eps: f64, horizon: f64, model: InitialModel, options: NuOptions) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter("cluster size must be >= 1".into()));
        }
        if n > ENUMERATION_MAX {
            return Err(Error::SizeLimit {
                what: "cluster path size",
                value: n,
                limit: ENUMERATION_MAX,
            });
        }
        let fact = |m: usize| (1..=m).map(|k| k as f64).product::<f64>();
        Ok(Self {
            n,
            eps,
            horizon,
            model,
            options,
            time_density: fact(n - 1) / horizon.powi(n as i32 - 1),
            tree_count: ordered_tree_count(n) as f64,
            n_factorial: fact(n),
        })
    }

    /// Draws parameters with a free root.
    pub fn sample<const D: usize>(&self, rng: &mut StreamRng) -> SampledPath<D> {
        let root: Vector<D> = std::array::from_fn(|_| rng.random::<f64>());
        self.sample_at(root, None, rng)
    }

    /// Draws parameters with the given root. With `velocities`, those are
    /// used instead of Maxwellian draws and the velocity density ratio is
    /// left out of the weight (conditional weight).
    pub fn sample_at<const D: usize>(
        &self,
        root: Vector<D>,
        velocities: Option<&[Vector<D>]>,
        rng: &mut StreamRng,
    ) -> SampledPath<D> {
        let n = self.n;
        let beta_ref = self.model.beta * self.options.beta_ref_ratio;
        let tree = sample_ordered_tree(n, rng);
        let v0: Vec<Vector<D>> = match velocities {
            Some(v) => v.to_vec(),
            None => (0..n).map(|_| sample_maxwellian(beta_ref, rng)).collect(),
        };
        let mut times: Vec<f64> = (0..n - 1).map(|_| self.horizon * rng.random::<f64>()).collect();
        times.sort_by(f64::total_cmp);
        // deflections, following the velocities along the tree
        let mut v = v0.clone();
        let mut omegas = Vec::with_capacity(n - 1);
        let mut direction_factor = 1.0;
        let area = sphere_area(D);
        for &(a, b) in &tree.edges {
            let w = vector::sub(&v[a], &v[b]);
            let omega = match self.options.directions {
                DirectionMode::Uniform => {
                    let o = sample_unit_vector::<D, _>(rng);
                    direction_factor *= area;
                    o
                }
                DirectionMode::CrossSection => match vector::normalized(&vector::scale(-1.0, &w)) {
                    Some(u) => {
                        let o = sample_cross_section_direction(&u, rng);
                        // cross / density = kappa |w|, and the reconstruction
                        // multiplies the cross section back in
                        direction_factor *= kappa(D) * vector::norm(&w)
                            / (-vector::dot(&w, &o)).max(f64::MIN_POSITIVE);
                        o
                    }
                    None => {
                        direction_factor = 0.0;
                        sample_unit_vector::<D, _>(rng)
                    }
                },
            };
            let (va, vb) = scatter(&v[a], &v[b], &omega);
            v[a] = va;
            v[b] = vb;
            omegas.push(omega);
        }
        let params = DecoratedTreeParams {
            tree,
            root,
            velocities: v0,
            times,
            omegas,
        };
        let reconstruction = reconstruct_cluster_path(&params, self.eps, self.horizon);
        let weight = if reconstruction.compatible {
            let mut w = self.tree_count * reconstruction.cross_section * direction_factor
                / (self.n_factorial * self.time_density);
            for z in &reconstruction.initial {
                match velocities {
                    Some(_) => w *= self.model.profile.value(&z.x),
                    None => w *= evaluate_f0(&self.model, z) / maxwellian(beta_ref, &z.v),
                }
            }
            w
        } else {
            0.0
        };
        SampledPath {
            params,
            reconstruction,
            weight,
        }
    }
}

/// Integral estimate with diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NuEstimate {
    pub estimate: f64,
    pub stderr: f64,
    pub compat_rate: f64,
    pub n_samples: usize,
}

/// Estimates `mu^-1 int dnu_n^min F^(H)`, the per-activity, per-volume
/// integral of the minimal size-`n` cluster-path measure with weight
/// `exp(H) prod f0`. Chunk `c` of the samples uses random stream `c` of
/// `seed`, so the result does not depend on the thread count.
#[allow(clippy::too_many_arguments)]
pub fn estimate_nu_integral<const D: usize>(
    n: usize,
    h: &TestFunctional<D>,
    eps: f64,
    horizon: f64,
    model: &InitialModel,
    n_samples: usize,
    seed: u64,
    options: NuOptions,
) -> Result<NuEstimate> {
    h.check_envelope(model.beta)?;
    let sampler = PathSampler::new(n, eps, horizon, *model, options)?;
    let chunks = n_samples.div_ceil(options.chunk);
    let parts: Vec<(Estimator, usize)> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = stream(seed, Domain::Expansion, c as u64);
            let m = options.chunk.min(n_samples - c * options.chunk);
            let mut est = Estimator::new();
            let mut ok = 0;
            for _ in 0..m {
                let s = sampler.sample::<D>(&mut rng);
                let mut w = s.weight;
                if s.compatible() {
                    ok += 1;
                    if !h.is_zero() {
                        w *= h.eval(s.trajectories()).exp();
                    }
                }
                est.push(w);
            }
            (est, ok)
        })
        .collect();
    let ests: Vec<Estimator> = parts.iter().map(|p| p.0).collect();
    let total = Estimator::merge_tree(&ests);
    let ok: usize = parts.iter().map(|p| p.1).sum();
    Ok(NuEstimate {
        estimate: total.mean,
        stderr: total.stderr(),
        compat_rate: ok as f64 / n_samples as f64,
        n_samples,
    })
}
