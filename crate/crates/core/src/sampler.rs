//! Time-zero configurations from the grand-canonical hard-core measure.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{torus_displacement, PhasePoint};
use crate::vector::{self, Vector};

/// Spatial profile of the one-particle density; integrates to 1 on the torus.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Profile {
    Uniform,
    /// `1 + a cos(2 pi x_1)`, `|a| < 1`.
    Cosine(f64),
}

impl Profile {
    pub fn value(&self, x: &[f64]) -> f64 {
        match *self {
            Profile::Uniform => 1.0,
            Profile::Cosine(a) => 1.0 + a * (2.0 * std::f64::consts::PI * x[0]).cos(),
        }
    }

    pub fn max_value(&self) -> f64 {
        match *self {
            Profile::Uniform => 1.0,
            Profile::Cosine(a) => 1.0 + a.abs(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Profile::Cosine(a) if !(a.abs() < 1.0) => Err(Error::InvalidParameter(format!(
                "cosine amplitude {a} must satisfy |a| < 1"
            ))),
            _ => Ok(()),
        }
    }

    pub fn sample_position<const D: usize, R: Rng + ?Sized>(&self, rng: &mut R) -> Vector<D> {
        let mut x: Vector<D> = std::array::from_fn(|_| rng.random::<f64>());
        if let Profile::Cosine(_) = self {
            let m = self.max_value();
            while rng.random::<f64>() * m >= self.value(&x) {
                x[0] = rng.random::<f64>();
            }
        }
        x
    }
}

impl fmt::Display for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Profile::Uniform => write!(f, "uniform"),
            Profile::Cosine(a) => write!(f, "cosine({a})"),
        }
    }
}

impl FromStr for Profile {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "uniform" {
            return Ok(Profile::Uniform);
        }
        if let Some(inner) = s.strip_prefix("cosine(").and_then(|r| r.strip_suffix(')')) {
            let a: f64 = inner.trim().parse().map_err(|_| {
                Error::InvalidParameter(format!("bad cosine amplitude `{inner}`"))
            })?;
            let p = Profile::Cosine(a);
            p.validate()?;
            return Ok(p);
        }
        Err(Error::InvalidParameter(format!(
            "profile `{s}`: expected `uniform` or `cosine(a)`"
        )))
    }
}

impl TryFrom<String> for Profile {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Profile> for String {
    fn from(p: Profile) -> String {
        p.to_string()
    }
}

/// One-particle density `f0(x, v) = profile(x) M_beta(v)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InitialModel {
    pub beta: f64,
    pub profile: Profile,
}

impl InitialModel {
    pub fn new(beta: f64, profile: Profile) -> Result<Self> {
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::InvalidParameter(format!("beta = {beta} must be positive")));
        }
        profile.validate()?;
        Ok(Self { beta, profile })
    }

    pub fn uniform(beta: f64) -> Self {
        Self::new(beta, Profile::Uniform).unwrap()
    }

    /// Envelope constant: `f0 <= c0 * M_beta` pointwise.
    pub fn c0(&self) -> f64 {
        self.profile.max_value()
    }

    pub fn sample<const D: usize, R: Rng + ?Sized>(&self, rng: &mut R) -> PhasePoint<D> {
        let x = self.profile.sample_position(rng);
        let v = sample_maxwellian(self.beta, rng);
        PhasePoint { x, v }
    }
}

/// Maxwellian density `(beta/2pi)^{d/2} exp(-beta |v|^2 / 2)`.
pub fn maxwellian<const D: usize>(beta: f64, v: &Vector<D>) -> f64 {
    (beta / (2.0 * std::f64::consts::PI)).powf(D as f64 / 2.0) * (-0.5 * beta * vector::norm2(v)).exp()
}

pub fn sample_maxwellian<const D: usize, R: Rng + ?Sized>(beta: f64, rng: &mut R) -> Vector<D> {
    let s = 1.0 / beta.sqrt();
    std::array::from_fn(|_| s * rng.sample::<f64, _>(StandardNormal))
}

pub fn evaluate_f0<const D: usize>(model: &InitialModel, z: &PhasePoint<D>) -> f64 {
    model.profile.value(&z.x) * maxwellian(model.beta, &z.v)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SamplerMode {
    /// Poisson number, i.i.d. points, accept the whole configuration iff
    /// hard-core holds. Exact.
    Exact,
    /// Particle-by-particle insertion with per-particle rejection. Biased at
    /// order `mu^2 eps^d`.
    Sequential,
}

impl SamplerMode {
    pub fn default_for_dimension(d: usize) -> Self {
        if d == 2 {
            SamplerMode::Exact
        } else {
            SamplerMode::Sequential
        }
    }
}

/// Retry cap for sequential insertion.
pub const INSERTION_RETRIES: usize = 10_000;

/// Time-zero hard-core configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct Configuration<const D: usize> {
    pub particles: Vec<PhasePoint<D>>,
    pub eps: f64,
}

impl<const D: usize> Configuration<D> {
    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    /// Smallest pairwise torus distance (O(N^2); infinity for N < 2).
    pub fn min_separation(&self) -> f64 {
        min_pair_distance(&self.particles.iter().map(|p| p.x).collect::<Vec<_>>())
    }
}

pub fn min_pair_distance<const D: usize>(xs: &[Vector<D>]) -> f64 {
    let mut m = f64::INFINITY;
    for i in 0..xs.len() {
        for j in 0..i {
            m = m.min(vector::norm(&torus_displacement(&xs[i], &xs[j])));
        }
    }
    m
}

/// Sampler diagnostics.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SampleStats {
    /// Whole-configuration attempts (exact mode) or 1 (sequential mode).
    pub attempts: u64,
    /// Individual point rejections (sequential mode).
    pub insert_rejections: u64,
    /// Poisson draws above the truncation point that were redrawn.
    pub truncated_draws: u64,
}

/// Truncation point `mu + 10 sqrt(mu)` for the particle number.
pub fn poisson_cap(mu: f64) -> u64 {
    (mu + 10.0 * mu.sqrt()).ceil() as u64
}

/// Poisson upper tail mass `P(N > cap)` (the probability discarded by
/// truncation), by summing the pmf.
pub fn truncation_mass(mu: f64) -> f64 {
    let cap = poisson_cap(mu);
    let mut logp = -mu;
    let mut cdf = 0.0;
    for n in 0..=cap {
        if n > 0 {
            logp += mu.ln() - (n as f64).ln();
        }
        cdf += logp.exp();
    }
    (1.0 - cdf).max(0.0)
}

fn draw_count<R: Rng + ?Sized>(mu: f64, rng: &mut R, stats: &mut SampleStats) -> usize {
    if mu <= 0.0 {
        return 0;
    }
    let pois = Poisson::new(mu).expect("positive activity");
    let cap = poisson_cap(mu);
    loop {
        let n = pois.sample(rng) as u64;
        if n <= cap {
            return n as usize;
        }
        stats.truncated_draws += 1;
    }
}

/// Uniform grid hash for hard-core checks.
struct Grid<const D: usize> {
    nc: usize,
    cells: Vec<Vec<usize>>,
}

impl<const D: usize> Grid<D> {
    /// Cells of side at least `eps`, about one expected point per cell.
    fn new(eps: f64, mu: f64) -> Self {
        let by_count = mu.max(1.0).powf(1.0 / D as f64).ceil() as usize;
        let nc = ((1.0 / eps).floor() as usize).min(by_count).clamp(1, 256);
        Self {
            nc,
            cells: vec![Vec::new(); nc.pow(D as u32)],
        }
    }

    fn coords(&self, x: &Vector<D>) -> [usize; D] {
        std::array::from_fn(|k| ((x[k] * self.nc as f64) as usize).min(self.nc - 1))
    }

    fn index(&self, c: &[usize; D]) -> usize {
        c.iter().rev().fold(0, |acc, &ck| acc * self.nc + ck)
    }

    fn clear(&mut self) {
        for c in &mut self.cells {
            c.clear();
        }
    }

    /// True iff `x` is at distance >= eps from every stored point.
    fn admits(&self, x: &Vector<D>, pts: &[Vector<D>], eps: f64) -> bool {
        let e2 = eps * eps;
        if self.nc < 3 {
            return pts.iter().all(|p| vector::norm2(&torus_displacement(p, x)) >= e2);
        }
        let c = self.coords(x);
        let mut off = [0usize; D];
        loop {
            let nb: [usize; D] = std::array::from_fn(|k| (c[k] + self.nc + off[k] - 1) % self.nc);
            for &q in &self.cells[self.index(&nb)] {
                if vector::norm2(&torus_displacement(&pts[q], x)) < e2 {
                    return false;
                }
            }
            let mut k = 0;
            loop {
                if k == D {
                    return true;
                }
                if off[k] < 2 {
                    off[k] += 1;
                    break;
                }
                off[k] = 0;
                k += 1;
            }
        }
    }

    fn insert(&mut self, x: &Vector<D>, id: usize) {
        let i = self.index(&self.coords(x));
        self.cells[i].push(id);
    }
}

pub fn sample_initial_config<const D: usize, R: Rng + ?Sized>(
    mu: f64,
    eps: f64,
    model: &InitialModel,
    mode: SamplerMode,
    rng: &mut R,
) -> Result<Configuration<D>> {
    sample_initial_config_with_stats(mu, eps, model, mode, rng).map(|(c, _)| c)
}

pub fn sample_initial_config_with_stats<const D: usize, R: Rng + ?Sized>(
    mu: f64,
    eps: f64,
    model: &InitialModel,
    mode: SamplerMode,
    rng: &mut R,
) -> Result<(Configuration<D>, SampleStats)> {
    if !(eps > 0.0) || !(mu >= 0.0) {
        return Err(Error::InvalidParameter(format!("eps = {eps}, mu = {mu}")));
    }
    let mut stats = SampleStats::default();
    let mut grid = Grid::<D>::new(eps, mu);
    let mut xs: Vec<Vector<D>> = Vec::new();
    match mode {
        SamplerMode::Exact => loop {
            stats.attempts += 1;
            let n = draw_count(mu, rng, &mut stats);
            xs.clear();
            grid.clear();
            let mut ok = true;
            for _ in 0..n {
                let x = model.profile.sample_position::<D, _>(rng);
                if ok {
                    if grid.admits(&x, &xs, eps) {
                        grid.insert(&x, xs.len());
                        xs.push(x);
                    } else {
                        // keep consuming draws so the stream layout does not
                        // depend on where the overlap occurred
                        ok = false;
                    }
                }
            }
            if ok {
                break;
            }
        },
        SamplerMode::Sequential => {
            stats.attempts = 1;
            let n = draw_count(mu, rng, &mut stats);
            for p in 0..n {
                let mut placed = false;
                for _ in 0..INSERTION_RETRIES {
                    let x = model.profile.sample_position::<D, _>(rng);
                    if grid.admits(&x, &xs, eps) {
                        grid.insert(&x, xs.len());
                        xs.push(x);
                        placed = true;
                        break;
                    }
                    stats.insert_rejections += 1;
                }
                if !placed {
                    return Err(Error::PackingFailure {
                        particle: p,
                        retries: INSERTION_RETRIES,
                    });
                }
            }
        }
    }
    let particles = xs
        .into_iter()
        .map(|x| PhasePoint {
            x,
            v: sample_maxwellian(model.beta, rng),
        })
        .collect();
    Ok((Configuration { particles, eps }, stats))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Domain};

    #[test]
    fn maxwellian_moments() {
        let mut rng = stream(1, Domain::Validation, 0);
        let n = 100_000;
        let beta = 2.0;
        let (mut m, mut s2, mut e) = ([0.0; 2], [0.0; 2], 0.0);
        for _ in 0..n {
            let v: [f64; 2] = sample_maxwellian(beta, &mut rng);
            for k in 0..2 {
                m[k] += v[k];
                s2[k] += v[k] * v[k];
            }
            e += vector::norm2(&v);
        }
        let nf = n as f64;
        for k in 0..2 {
            assert!((m[k] / nf).abs() < 4.0 / (beta * nf).sqrt());
            assert!((s2[k] / nf * beta - 1.0).abs() < 0.05);
        }
        assert!((e / nf * beta / 2.0 - 1.0).abs() < 0.05);
    }

    #[test]
    fn f0_examples() {
        let m = InitialModel::uniform(1.0);
        let z = PhasePoint { x: [0.3, 0.3], v: [0.0, 0.0] };
        assert!((evaluate_f0(&m, &z) - 1.0 / (2.0 * std::f64::consts::PI)).abs() < 1e-15);
        let m = InitialModel::new(1.0, Profile::Cosine(0.5)).unwrap();
        let z = PhasePoint { x: [0.0, 0.7], v: [0.0, 0.0] };
        assert!((evaluate_f0(&m, &z) - 1.5 / (2.0 * std::f64::consts::PI)).abs() < 1e-15);
        // velocity quadrature recovers the profile
        let x = [0.2, 0.1];
        let h = 0.02;
        let mut q = 0.0;
        for a in -500..500 {
            for b in -500..500 {
                let v = [(a as f64 + 0.5) * h, (b as f64 + 0.5) * h];
                q += evaluate_f0(&m, &PhasePoint { x, v }) * h * h;
            }
        }
        assert!((q - m.profile.value(&x)).abs() < 1e-4);
    }

    #[test]
    fn profile_normalization_and_envelope() {
        for p in [Profile::Uniform, Profile::Cosine(0.5), Profile::Cosine(-0.9)] {
            let n = 100_000;
            let q: f64 = (0..n).map(|k| p.value(&[(k as f64 + 0.5) / n as f64])).sum::<f64>() / n as f64;
            assert!((q - 1.0).abs() < 1e-6);
            let m = InitialModel::new(1.0, p).unwrap();
            for k in 0..50 {
                let z = PhasePoint { x: [k as f64 / 50.0, 0.5], v: [0.1 * k as f64, -0.3] };
                assert!(evaluate_f0(&m, &z) <= m.c0() * maxwellian(1.0, &z.v) * (1.0 + 1e-12));
            }
        }
    }

    #[test]
    fn profile_parsing() {
        assert_eq!("uniform".parse::<Profile>().unwrap(), Profile::Uniform);
        assert_eq!("cosine(0.5)".parse::<Profile>().unwrap(), Profile::Cosine(0.5));
        assert!("cosine(1.5)".parse::<Profile>().is_err());
        assert!("gaussian".parse::<Profile>().is_err());
        assert_eq!(Profile::Cosine(0.25).to_string().parse::<Profile>().unwrap(), Profile::Cosine(0.25));
    }

    #[test]
    fn hard_core_holds() {
        let m = InitialModel::uniform(1.0);
        for mode in [SamplerMode::Exact, SamplerMode::Sequential] {
            let mut rng = stream(2, Domain::Validation, mode as u64);
            for _ in 0..20 {
                let c: Configuration<2> = sample_initial_config(100.0, 0.01, &m, mode, &mut rng).unwrap();
                assert!(c.min_separation() >= 0.01);
                assert!(c.particles.iter().all(|p| p.x.iter().all(|x| (0.0..1.0).contains(x))));
            }
        }
        let mut rng = stream(2, Domain::Validation, 9);
        for _ in 0..5 {
            let c: Configuration<3> =
                sample_initial_config(400.0, 0.05, &m, SamplerMode::Sequential, &mut rng).unwrap();
            assert!(c.min_separation() >= 0.05);
        }
    }

    #[test]
    fn exclusion_forbids_pairs() {
        let m = InitialModel::uniform(1.0);
        let mut rng = stream(3, Domain::Validation, 0);
        for _ in 0..200 {
            let c: Configuration<2> = sample_initial_config(0.5, 0.8, &m, SamplerMode::Exact, &mut rng).unwrap();
            assert!(c.len() <= 1);
        }
    }

    #[test]
    fn packing_failure_is_reported() {
        let m = InitialModel::uniform(1.0);
        let mut rng = stream(4, Domain::Validation, 0);
        let r: Result<Configuration<2>> = sample_initial_config(200.0, 0.3, &m, SamplerMode::Sequential, &mut rng);
        assert!(matches!(r, Err(Error::PackingFailure { .. })));
    }

    #[test]
    fn truncation_mass_is_tiny() {
        assert!(truncation_mass(100.0) < 1e-15);
        assert!(truncation_mass(1.0) < 1e-8);
    }

    #[test]
    fn sequential_sampler_overshoots_the_gibbs_mean() {
        // E[N] under the hard-core measure is about mu - mu^2 pi eps^2 at d = 2;
        // sequential insertion keeps the Poisson mean mu
        let (mu, eps, runs) = (20.0, 0.05, 4000);
        let m = InitialModel::uniform(1.0);
        let mean = |mode| {
            let mut rng = stream(3, Domain::Validation, mode as u64);
            let total: usize = (0..runs)
                .map(|_| sample_initial_config::<2, _>(mu, eps, &m, mode, &mut rng).unwrap().len())
                .sum();
            total as f64 / runs as f64
        };
        let exact = mean(SamplerMode::Exact);
        let sequential = mean(SamplerMode::Sequential);
        let se = (mu / runs as f64).sqrt();
        assert!((sequential - mu).abs() < 4.0 * se, "sequential {sequential}");
        assert!(sequential - exact > 2.0, "exact {exact}, sequential {sequential}");
    }
}
