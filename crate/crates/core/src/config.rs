//! Run configuration: a TOML file with top-level physical parameters and
//! optional per-mode sections. JSON with the same keys is also accepted.
//!
//! ```toml
//! dimension = 2
//! epsilon = 0.01
//! beta = 1.0
//! profile = "cosine(0.5)"
//! horizon = 0.2
//! runs = 100
//! seed = 7
//!
//! [dsmc]
//! particles = 100000
//! cell_size = 0.05
//! dt = 0.01
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expansion::{DirectionMode, TestFunctional};
use crate::sampler::{InitialModel, Profile, SamplerMode};
use crate::trajectory::Trajectory;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub dimension: usize,
    pub epsilon: f64,
    /// Activity; defaults to `epsilon^(1-d)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    #[serde(default = "one")]
    pub beta: f64,
    #[serde(default = "uniform")]
    pub profile: Profile,
    /// Defaults to exact in d = 2 and sequential in d = 3.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sampler: Option<SamplerMode>,
    pub horizon: f64,
    #[serde(default = "one_usize")]
    pub runs: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub engine: Option<EngineSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clusters: Option<ClustersSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expansion: Option<ExpansionSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dsmc: Option<DsmcSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coagulation: Option<CoagulationSection>,
    #[serde(default)]
    pub output: OutputSection,
}

fn one() -> f64 {
    1.0
}
fn one_usize() -> usize {
    1
}
fn uniform() -> Profile {
    Profile::Uniform
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EngineSection {
    /// Cells per dimension for neighbour search; automatic when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cells_per_dim: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClustersSection {
    /// Horizons for the largest-cluster sweep; the top-level horizon when empty.
    #[serde(default)]
    pub sweep: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExpansionQuantity {
    /// Weighted integral over size-`n` cluster paths.
    Nu,
    /// Aggregate term for a size profile.
    Aggregate,
    /// Empirical exponential moments of an MD ensemble.
    Lambda,
    /// Cumulants of an MD ensemble.
    Cumulants,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Observable {
    Zero,
    /// `h = 1`.
    Count,
    /// Indicator that `x(T)` lies in the cube `[lo, hi)^d`.
    Region { lo: f64, hi: f64 },
    /// `cos(2 pi k x_1(T))`.
    CosineMode { k: u32 },
}

impl Observable {
    pub fn functional<const D: usize>(&self, horizon: f64) -> TestFunctional<D> {
        match *self {
            Observable::Zero => TestFunctional::zero(),
            Observable::Count => TestFunctional::single(|_| 1.0, 1.0, 0.0),
            Observable::Region { lo, hi } => TestFunctional::single(
                move |tr: &Trajectory<D>| {
                    let x = tr.position_at(horizon);
                    if x.iter().all(|&c| lo <= c && c < hi) {
                        1.0
                    } else {
                        0.0
                    }
                },
                1.0,
                0.0,
            ),
            Observable::CosineMode { k } => TestFunctional::single(
                move |tr: &Trajectory<D>| (2.0 * std::f64::consts::PI * k as f64 * tr.position_at(horizon)[0]).cos(),
                1.0,
                0.0,
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExpansionSection {
    pub quantity: ExpansionQuantity,
    /// Path size for `nu` (one entry) or the size profile for `aggregate`.
    #[serde(default)]
    pub sizes: Vec<usize>,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default = "default_directions")]
    pub directions: String,
    #[serde(default = "half")]
    pub beta_ref_ratio: f64,
    #[serde(default = "default_observable")]
    pub observable: Observable,
    /// `u` values for `lambda`.
    #[serde(default)]
    pub u_grid: Vec<f64>,
}

fn default_samples() -> usize {
    100_000
}
fn default_directions() -> String {
    "uniform".into()
}
fn half() -> f64 {
    0.5
}
fn default_observable() -> Observable {
    Observable::Zero
}

impl ExpansionSection {
    pub fn direction_mode(&self) -> Result<DirectionMode> {
        match self.directions.as_str() {
            "uniform" => Ok(DirectionMode::Uniform),
            "cross-section" => Ok(DirectionMode::CrossSection),
            other => Err(Error::Config {
                path: "expansion.directions".into(),
                message: format!("expected `uniform` or `cross-section`, found `{other}`"),
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DsmcSection {
    pub particles: usize,
    pub cell_size: f64,
    pub dt: f64,
    #[serde(default)]
    pub output_times: Vec<f64>,
    #[serde(default)]
    pub collisionless: bool,
    #[serde(default = "three")]
    pub n_modes: usize,
}

fn three() -> usize {
    3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoagulationSection {
    pub particles: usize,
    pub cell_size: f64,
    pub dt: f64,
    #[serde(default)]
    pub output_times: Vec<f64>,
    #[serde(default = "one")]
    pub kernel_scale: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Jsonl,
}

impl std::str::FromStr for Format {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Format::Csv),
            "jsonl" => Ok(Format::Jsonl),
            _ => Err(Error::InvalidParameter(format!("unknown format `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default)]
    pub format: Format,
    #[serde(default = "default_dir")]
    pub dir: String,
    #[serde(default)]
    pub dump_trajectories: bool,
}

fn default_dir() -> String {
    "out".into()
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            format: Format::Csv,
            dir: default_dir(),
            dump_trajectories: false,
        }
    }
}

fn check(ok: bool, path: &str, message: impl Into<String>) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::Config {
            path: path.into(),
            message: message.into(),
        })
    }
}

fn positive(x: f64, path: &str) -> Result<()> {
    check(x > 0.0 && x.is_finite(), path, format!("must be positive and finite, found {x}"))
}

fn times(ts: &[f64], horizon: f64, path: &str) -> Result<()> {
    for (k, &t) in ts.iter().enumerate() {
        check(
            (0.0..=horizon).contains(&t),
            &format!("{path}[{k}]"),
            format!("{t} outside [0, horizon]"),
        )?;
    }
    Ok(())
}

impl RunConfig {
    /// Minimal valid configuration for the given dimension and diameter.
    pub fn new(dimension: usize, epsilon: f64, horizon: f64) -> Self {
        Self {
            dimension,
            epsilon,
            mu: None,
            beta: 1.0,
            profile: Profile::Uniform,
            sampler: None,
            horizon,
            runs: 1,
            seed: 0,
            engine: None,
            clusters: None,
            expansion: None,
            dsmc: None,
            coagulation: None,
            output: OutputSection::default(),
        }
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        let c: RunConfig = toml::from_str(s).map_err(|e| Error::Config {
            path: "<toml>".into(),
            message: e.to_string().trim().to_string(),
        })?;
        c.validate()?;
        Ok(c)
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let c: RunConfig = serde_json::from_str(s).map_err(|e| Error::Config {
            path: "<json>".into(),
            message: e.to_string(),
        })?;
        c.validate()?;
        Ok(c)
    }

    /// Reads TOML, or JSON when the file name ends in `.json`.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        if path.extension().is_some_and(|e| e == "json") {
            Self::from_json_str(&text)
        } else {
            Self::from_toml_str(&text)
        }
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }

    pub fn mu(&self) -> f64 {
        self.mu.unwrap_or_else(|| crate::boltzmann_grad_mu(self.dimension, self.epsilon))
    }

    pub fn sampler_mode(&self) -> SamplerMode {
        self.sampler.unwrap_or_else(|| SamplerMode::default_for_dimension(self.dimension))
    }

    pub fn model(&self) -> Result<InitialModel> {
        InitialModel::new(self.beta, self.profile)
    }

    pub fn validate(&self) -> Result<()> {
        check(
            self.dimension == 2 || self.dimension == 3,
            "dimension",
            format!("must be 2 or 3, found {}", self.dimension),
        )?;
        positive(self.epsilon, "epsilon")?;
        check(self.epsilon < 0.5, "epsilon", "must be below 1/2 on the unit torus")?;
        if let Some(mu) = self.mu {
            positive(mu, "mu")?;
        }
        positive(self.beta, "beta")?;
        self.profile.validate().map_err(|e| Error::Config {
            path: "profile".into(),
            message: e.to_string(),
        })?;
        positive(self.horizon, "horizon")?;
        check(self.runs >= 1, "runs", "must be at least 1")?;
        if let Some(c) = &self.clusters {
            for (k, &t) in c.sweep.iter().enumerate() {
                positive(t, &format!("clusters.sweep[{k}]"))?;
            }
        }
        if let Some(x) = &self.expansion {
            x.direction_mode()?;
            positive(x.beta_ref_ratio, "expansion.beta_ref_ratio")?;
            check(x.beta_ref_ratio <= 1.0, "expansion.beta_ref_ratio", "must not exceed 1")?;
            check(x.samples >= 2, "expansion.samples", "must be at least 2")?;
            match x.quantity {
                ExpansionQuantity::Nu => check(
                    x.sizes.len() == 1 && x.sizes[0] >= 1,
                    "expansion.sizes",
                    "nu needs exactly one size >= 1",
                )?,
                ExpansionQuantity::Aggregate => check(
                    x.sizes.len() >= 2 && x.sizes.iter().all(|&s| s >= 1),
                    "expansion.sizes",
                    "aggregate needs at least two sizes >= 1",
                )?,
                ExpansionQuantity::Lambda => check(!x.u_grid.is_empty(), "expansion.u_grid", "must not be empty")?,
                ExpansionQuantity::Cumulants => {}
            }
            if let Observable::Region { lo, hi } = x.observable {
                check(
                    0.0 <= lo && lo < hi && hi <= 1.0,
                    "expansion.observable",
                    "region needs 0 <= lo < hi <= 1",
                )?;
            }
        }
        if let Some(s) = &self.dsmc {
            check(s.particles >= 2, "dsmc.particles", "must be at least 2")?;
            positive(s.cell_size, "dsmc.cell_size")?;
            positive(s.dt, "dsmc.dt")?;
            times(&s.output_times, self.horizon, "dsmc.output_times")?;
        }
        if let Some(s) = &self.coagulation {
            check(s.particles >= 1, "coagulation.particles", "must be at least 1")?;
            positive(s.cell_size, "coagulation.cell_size")?;
            positive(s.dt, "coagulation.dt")?;
            check(s.kernel_scale >= 0.0, "coagulation.kernel_scale", "must be nonnegative")?;
            times(&s.output_times, self.horizon, "coagulation.output_times")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"
dimension = 2
epsilon = 0.01
beta = 1.0
profile = "cosine(0.5)"
horizon = 0.2
runs = 10
seed = 3

[expansion]
quantity = "aggregate"
sizes = [1, 1]
samples = 1000
observable = { kind = "region", lo = 0.0, hi = 0.25 }

[dsmc]
particles = 1000
cell_size = 0.05
dt = 0.01
output_times = [0.1, 0.2]
"#;

    #[test]
    fn parses_and_round_trips() {
        let c = RunConfig::from_toml_str(SAMPLE).unwrap();
        assert_eq!(c.profile, Profile::Cosine(0.5));
        assert_eq!(c.mu(), 100.0);
        let back = RunConfig::from_toml_str(&c.to_toml_string()).unwrap();
        assert_eq!(c, back);
        let json = RunConfig::from_json_str(&c.to_json_string()).unwrap();
        assert_eq!(c, json);
    }

    #[test]
    fn reports_key_paths() {
        let bad = SAMPLE.replace("cell_size = 0.05", "cell_size = -1.0");
        match RunConfig::from_toml_str(&bad) {
            Err(Error::Config { path, .. }) => assert_eq!(path, "dsmc.cell_size"),
            other => panic!("{other:?}"),
        }
        let bad = SAMPLE.replace("dimension = 2", "dimension = 4");
        assert!(matches!(
            RunConfig::from_toml_str(&bad),
            Err(Error::Config { path, .. }) if path == "dimension"
        ));
    }

    #[test]
    fn rejects_unknown_keys() {
        let bad = SAMPLE.replace("seed = 3", "seed = 3\nsede = 4");
        match RunConfig::from_toml_str(&bad) {
            Err(Error::Config { message, .. }) => assert!(message.contains("sede"), "{message}"),
            other => panic!("{other:?}"),
        }
    }
}
