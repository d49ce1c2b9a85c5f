use rand::Rng;
use rayon::prelude::*;

use crate::boltzmann_grad_mu;
use crate::cluster::{aggregate_connectivity, detect_overlaps};
use crate::combinatorics::phi;
use crate::error::{Error, Result};
use crate::geometry::{sphere_area, torus_distance};
use crate::rng::{stream, Domain, StreamRng};
use crate::sampler::InitialModel;
use crate::stats::Estimator;
use crate::vector::Vector;

use super::functional::TestFunctional;
use super::nu::{NuOptions, PathSampler};

#[derive(Debug, Clone, PartialEq)]
pub struct AggregateOptions<const D: usize> {
    pub nu: NuOptions,
    /// Activity; defaults to `eps^(1-d)`.
    pub mu: Option<f64>,
    /// Condition the second root to lie at least this far from the first
    /// (two paths only).
    pub min_root_distance: Option<f64>,
    /// Fixed initial velocities per path instead of Maxwellian draws; the
    /// weights then omit the velocity densities.
    pub fixed_velocities: Option<Vec<Vec<Vector<D>>>>,
}

impl<const D: usize> Default for AggregateOptions<D> {
    fn default() -> Self {
        Self {
            nu: NuOptions::default(),
            mu: None,
            min_root_distance: None,
            fixed_velocities: None,
        }
    }
}

/// Outcome of one draw of `k` independent cluster paths.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AggregateDraw {
    /// `prod_i w_i exp(H(lambda_i))`.
    pub weight: f64,
    pub all_compatible: bool,
    pub connected: bool,
    pub minimal: bool,
    /// Truncated function of the overlap graph (0 when disconnected).
    pub phi: i64,
}

/// Sampler of `k` independent weighted cluster paths with independent roots.
#[derive(Debug, Clone)]
pub struct AggregateSampler<const D: usize> {
    pub sizes: Vec<usize>,
    pub eps: f64,
    pub horizon: f64,
    samplers: Vec<PathSampler>,
    options: AggregateOptions<D>,
    root_factor: f64,
}

fn ball_volume(d: usize, r: f64) -> f64 {
    sphere_area(d) * r.powi(d as i32) / d as f64
}

impl<const D: usize> AggregateSampler<D> {
    pub fn new(
        sizes: &[usize],
        eps: f64,
        horizon: f64,
        model: &InitialModel,
        options: AggregateOptions<D>,
    ) -> Result<Self> {
        let k = sizes.len();
        if k < 2 {
            return Err(Error::InvalidParameter("an aggregate needs k >= 2 paths".into()));
        }
        let total: usize = sizes.iter().sum();
        if total > 8 {
            return Err(Error::SizeLimit {
                what: "aggregate particle count",
                value: total,
                limit: 8,
            });
        }
        if let Some(v) = &options.fixed_velocities {
            if v.len() != k || v.iter().zip(sizes).any(|(v, &n)| v.len() != n) {
                return Err(Error::InvalidParameter("fixed velocities do not match sizes".into()));
            }
        }
        let root_factor = match options.min_root_distance {
            None => 1.0,
            Some(r) => {
                if k != 2 || !(0.0..0.5).contains(&r) {
                    return Err(Error::InvalidParameter(
                        "root separation needs exactly two paths and a distance below 1/2".into(),
                    ));
                }
                1.0 - ball_volume(D, r)
            }
        };
        let samplers = sizes
            .iter()
            .map(|&n| PathSampler::new(n, eps, horizon, *model, options.nu))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            sizes: sizes.to_vec(),
            eps,
            horizon,
            samplers,
            options,
            root_factor,
        })
    }

    pub fn mu(&self) -> f64 {
        self.options.mu.unwrap_or_else(|| boltzmann_grad_mu(D, self.eps))
    }

    /// `mu^(k-1) / k!`
    pub fn prefactor(&self) -> f64 {
        let k = self.sizes.len();
        self.mu().powi(k as i32 - 1) / (1..=k).map(|m| m as f64).product::<f64>()
    }

    pub fn draw(&self, h: &TestFunctional<D>, rng: &mut StreamRng) -> AggregateDraw {
        let first: Vector<D> = std::array::from_fn(|_| rng.random::<f64>());
        let mut roots = vec![first];
        for _ in 1..self.sizes.len() {
            let y = loop {
                let y: Vector<D> = std::array::from_fn(|_| rng.random::<f64>());
                match self.options.min_root_distance {
                    Some(r) if torus_distance(&first, &y) < r => continue,
                    _ => break y,
                }
            };
            roots.push(y);
        }
        let paths: Vec<_> = self
            .samplers
            .iter()
            .zip(&roots)
            .enumerate()
            .map(|(p, (s, &y))| {
                let v = self.options.fixed_velocities.as_ref().map(|v| v[p].as_slice());
                s.sample_at(y, v, rng)
            })
            .collect();
        let all_compatible = paths.iter().all(|p| p.compatible());
        if !all_compatible {
            return AggregateDraw {
                weight: 0.0,
                all_compatible,
                connected: false,
                minimal: false,
                phi: 0,
            };
        }
        let mut weight = self.root_factor;
        for p in &paths {
            weight *= p.weight;
            if !h.is_zero() {
                weight *= h.eval(p.trajectories()).exp();
            }
        }
        let trs: Vec<&[crate::trajectory::Trajectory<D>]> = paths.iter().map(|p| p.trajectories()).collect();
        let og = detect_overlaps(&trs, self.eps, (0.0, self.horizon));
        let status = aggregate_connectivity(&og);
        let phi = if status.connected {
            phi(&og.simple_graph()).expect("k <= 8")
        } else {
            0
        };
        AggregateDraw {
            weight,
            all_compatible,
            connected: status.connected,
            minimal: status.is_min_aggregate,
            phi,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AggregateEstimate {
    /// Minimal part plus remainder, estimated draw by draw.
    pub total: f64,
    pub total_stderr: f64,
    /// `mu^(k-1)/k! E[prod w * (-1)^(k-1) ; minimal aggregate]`
    pub minimal_term: f64,
    pub minimal_stderr: f64,
    /// Same with the exact truncated function, over connected non-minimal draws.
    pub remainder: f64,
    pub remainder_stderr: f64,
    /// Fraction of draws forming a minimal aggregate.
    pub minimal_probability: f64,
    pub minimal_probability_stderr: f64,
    /// Fraction of connected draws that are not minimal.
    pub nonminimal_fraction: f64,
    pub nonminimal_fraction_stderr: f64,
    pub connected_draws: u64,
    pub compat_rate: f64,
    pub n_samples: usize,
}

#[derive(Debug, Clone, Copy, Default)]
struct Acc {
    total: Estimator,
    min_term: Estimator,
    rem_term: Estimator,
    min_ind: Estimator,
    connected: u64,
    nonminimal: u64,
    compatible: u64,
}

impl Acc {
    fn merge(&self, o: &Acc) -> Acc {
        Acc {
            total: self.total.merge(&o.total),
            min_term: self.min_term.merge(&o.min_term),
            rem_term: self.rem_term.merge(&o.rem_term),
            min_ind: self.min_ind.merge(&o.min_ind),
            connected: self.connected + o.connected,
            nonminimal: self.nonminimal + o.nonminimal,
            compatible: self.compatible + o.compatible,
        }
    }
}

fn merge_tree(parts: &[Acc]) -> Acc {
    match parts.len() {
        0 => Acc::default(),
        1 => parts[0],
        n => {
            let (a, b) = parts.split_at(n.div_ceil(2));
            merge_tree(a).merge(&merge_tree(b))
        }
    }
}

/// Aggregate term for a fixed size profile `sizes` (one entry per path),
/// split into the minimal-aggregate part with sign `(-1)^(k-1)` and the
/// non-minimal remainder evaluated with the exact truncated function.
#[allow(clippy::too_many_arguments)]
pub fn estimate_aggregate_term<const D: usize>(
    sizes: &[usize],
    h: &TestFunctional<D>,
    eps: f64,
    horizon: f64,
    model: &InitialModel,
    n_samples: usize,
    seed: u64,
    options: AggregateOptions<D>,
) -> Result<AggregateEstimate> {
    h.check_envelope(model.beta)?;
    let chunk = options.nu.chunk;
    let sampler = AggregateSampler::new(sizes, eps, horizon, model, options)?;
    let pre = sampler.prefactor();
    let sign = if sizes.len() % 2 == 1 { 1.0 } else { -1.0 };
    let chunks = n_samples.div_ceil(chunk);
    let parts: Vec<Acc> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = stream(seed, Domain::Aggregate, c as u64);
            let m = chunk.min(n_samples - c * chunk);
            let mut acc = Acc::default();
            for _ in 0..m {
                let d = sampler.draw(h, &mut rng);
                let min_term = if d.minimal { pre * sign * d.weight } else { 0.0 };
                let nonmin = d.connected && !d.minimal;
                let rem_term = if nonmin { pre * d.phi as f64 * d.weight } else { 0.0 };
                acc.total.push(min_term + rem_term);
                acc.min_term.push(min_term);
                acc.rem_term.push(rem_term);
                acc.min_ind.push(if d.minimal { 1.0 } else { 0.0 });
                acc.connected += d.connected as u64;
                acc.nonminimal += nonmin as u64;
                acc.compatible += d.all_compatible as u64;
            }
            acc
        })
        .collect();
    let acc = merge_tree(&parts);
    let frac = if acc.connected > 0 {
        acc.nonminimal as f64 / acc.connected as f64
    } else {
        0.0
    };
    let frac_se = if acc.connected > 0 {
        (frac * (1.0 - frac) / acc.connected as f64).sqrt()
    } else {
        f64::NAN
    };
    Ok(AggregateEstimate {
        total: acc.total.mean,
        total_stderr: acc.total.stderr(),
        minimal_term: acc.min_term.mean,
        minimal_stderr: acc.min_term.stderr(),
        remainder: acc.rem_term.mean,
        remainder_stderr: acc.rem_term.stderr(),
        minimal_probability: acc.min_ind.mean,
        minimal_probability_stderr: acc.min_ind.stderr(),
        nonminimal_fraction: frac,
        nonminimal_fraction_stderr: frac_se,
        connected_draws: acc.connected,
        compat_rate: acc.compatible as f64 / n_samples as f64,
        n_samples,
    })
}
