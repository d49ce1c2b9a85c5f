//! Tables in CSV (with a `#` header block) or JSON lines (header object on
//! the first line). Floats are printed with 17 significant digits.

use std::io::Write;
use std::time::{SystemTime, UNIX_EPOCH};

use sha2::{Digest, Sha256};

use crate::cluster::ClusterPath;
use crate::config::{Format, RunConfig};
use crate::error::Result;
use crate::sampler::SamplerMode;
use crate::trajectory::RunRecord;

/// Provenance block written at the top of every output file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Header {
    pub config_hash: String,
    pub seed: u64,
    pub version: String,
    /// Seconds since the Unix epoch; `SOURCE_DATE_EPOCH` overrides the clock.
    pub wall_clock: u64,
    /// Caveats about the run, one `# warning:` line each.
    pub warnings: Vec<String>,
}

impl Header {
    pub fn new(config: &RunConfig) -> Self {
        Self {
            config_hash: config_hash(config),
            seed: config.seed,
            version: env!("CARGO_PKG_VERSION").to_string(),
            wall_clock: wall_clock(),
            warnings: match config.sampler_mode() {
                SamplerMode::Sequential => vec![
                    "sequential initial sampler: hard-core Gibbs measure approximated, bias of order mu^2 eps^d".into(),
                ],
                SamplerMode::Exact => Vec::new(),
            },
        }
    }
}

/// SHA-256 of the canonical TOML form of the configuration.
pub fn config_hash(config: &RunConfig) -> String {
    let digest = Sha256::digest(config.to_toml_string().as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn wall_clock() -> u64 {
    if let Some(t) = std::env::var("SOURCE_DATE_EPOCH").ok().and_then(|s| s.trim().parse().ok()) {
        return t;
    }
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

/// One table value.
#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    F(f64),
    U(u64),
    I(i64),
    B(bool),
    S(String),
}

impl From<f64> for Value {
    fn from(x: f64) -> Self {
        Value::F(x)
    }
}
impl From<usize> for Value {
    fn from(x: usize) -> Self {
        Value::U(x as u64)
    }
}
impl From<u64> for Value {
    fn from(x: u64) -> Self {
        Value::U(x)
    }
}
impl From<i64> for Value {
    fn from(x: i64) -> Self {
        Value::I(x)
    }
}
impl From<bool> for Value {
    fn from(x: bool) -> Self {
        Value::B(x)
    }
}
impl From<&str> for Value {
    fn from(x: &str) -> Self {
        Value::S(x.to_string())
    }
}
impl From<String> for Value {
    fn from(x: String) -> Self {
        Value::S(x)
    }
}

/// `x` with 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        format!("{x}")
    }
}

fn csv_field(v: &Value) -> String {
    match v {
        Value::F(x) => fmt_f64(*x),
        Value::U(x) => x.to_string(),
        Value::I(x) => x.to_string(),
        Value::B(x) => x.to_string(),
        Value::S(s) if s.contains([',', '"', '\n']) => format!("\"{}\"", s.replace('"', "\"\"")),
        Value::S(s) => s.clone(),
    }
}

fn json_value(v: &Value) -> String {
    match v {
        Value::F(x) if x.is_finite() => fmt_f64(*x),
        Value::F(_) => "null".into(),
        Value::S(s) => serde_json::to_string(s).expect("string"),
        other => csv_field(other),
    }
}

/// Writer for one table.
pub struct TableWriter<W: Write> {
    out: W,
    format: Format,
    columns: Vec<String>,
}

impl<W: Write> TableWriter<W> {
    pub fn new<S: AsRef<str>>(mut out: W, format: Format, header: &Header, table: &str, columns: &[S]) -> Result<Self> {
        let columns: Vec<&str> = columns.iter().map(|c| c.as_ref()).collect();
        match format {
            Format::Csv => {
                writeln!(out, "# table: {table}")?;
                writeln!(out, "# config_hash: {}", header.config_hash)?;
                writeln!(out, "# seed: {}", header.seed)?;
                writeln!(out, "# version: {}", header.version)?;
                writeln!(out, "# wall_clock: {}", header.wall_clock)?;
                for w in &header.warnings {
                    writeln!(out, "# warning: {w}")?;
                }
                writeln!(out, "{}", columns.join(","))?;
            }
            Format::Jsonl => {
                writeln!(
                    out,
                    "{{\"header\":{{\"table\":{},\"config_hash\":\"{}\",\"seed\":{},\"version\":\"{}\",\"wall_clock\":{},\"warnings\":{},\"columns\":{}}}}}",
                    serde_json::to_string(table).expect("string"),
                    header.config_hash,
                    header.seed,
                    header.version,
                    header.wall_clock,
                    serde_json::to_string(&header.warnings).expect("warnings"),
                    serde_json::to_string(&columns).expect("columns"),
                )?;
            }
        }
        Ok(Self {
            out,
            format,
            columns: columns.iter().map(|c| c.to_string()).collect(),
        })
    }

    pub fn row(&mut self, values: &[Value]) -> Result<()> {
        assert_eq!(values.len(), self.columns.len(), "row width");
        match self.format {
            Format::Csv => {
                let fields: Vec<String> = values.iter().map(csv_field).collect();
                writeln!(self.out, "{}", fields.join(","))?;
            }
            Format::Jsonl => {
                let fields: Vec<String> = self
                    .columns
                    .iter()
                    .zip(values)
                    .map(|(c, v)| format!("{}:{}", serde_json::to_string(c).expect("string"), json_value(v)))
                    .collect();
                writeln!(self.out, "{{{}}}", fields.join(","))?;
            }
        }
        Ok(())
    }

    pub fn finish(mut self) -> Result<W> {
        self.out.flush()?;
        Ok(self.out)
    }
}

/// Expands a vector into `name[0]`, `name[1]`, ... column names.
pub fn vector_columns(name: &str, d: usize) -> Vec<String> {
    (0..d).map(|k| format!("{name}[{k}]")).collect()
}

/// Column names of the collision-log table.
pub fn collision_columns(d: usize) -> Vec<String> {
    let mut c: Vec<String> = ["run_id", "t", "i", "j"].iter().map(|s| s.to_string()).collect();
    c.extend(vector_columns("omega", d));
    c
}

pub fn collision_rows<const D: usize>(run_id: usize, rec: &RunRecord<D>) -> Vec<Vec<Value>> {
    rec.log
        .iter()
        .map(|r| {
            let mut row: Vec<Value> = vec![run_id.into(), r.t.into(), r.i.into(), r.j.into()];
            row.extend(r.omega.iter().map(|&x| Value::F(x)));
            row
        })
        .collect()
}

/// Column names of the trajectory dump (one row per breakpoint).
pub fn trajectory_columns(d: usize) -> Vec<String> {
    let mut c: Vec<String> = ["run_id", "particle", "t"].iter().map(|s| s.to_string()).collect();
    c.extend(vector_columns("x", d));
    c.extend(vector_columns("v", d));
    c
}

pub fn trajectory_rows<const D: usize>(run_id: usize, rec: &RunRecord<D>) -> Vec<Vec<Value>> {
    let mut rows = Vec::new();
    for tr in &rec.trajectories {
        for b in tr.breakpoints() {
            let mut row: Vec<Value> = vec![run_id.into(), tr.particle_id.into(), b.t.into()];
            row.extend(b.x.iter().map(|&x| Value::F(x)));
            row.extend(b.v.iter().map(|&x| Value::F(x)));
            rows.push(row);
        }
    }
    rows
}

pub const CLUSTER_COLUMNS: [&str; 6] = ["run_id", "path_id", "size", "minimal", "n_recollisions", "energy"];

pub fn cluster_rows<const D: usize>(run_id: usize, paths: &[ClusterPath<D>]) -> Vec<Vec<Value>> {
    paths
        .iter()
        .map(|p| {
            vec![
                run_id.into(),
                p.id.into(),
                p.size().into(),
                p.is_minimal().into(),
                p.n_recollisions().into(),
                p.energy.into(),
            ]
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn header() -> Header {
        Header {
            config_hash: "ab".into(),
            seed: 1,
            version: "0.1.0".into(),
            wall_clock: 0,
            warnings: Vec::new(),
        }
    }

    #[test]
    fn seventeen_digits_round_trip() {
        for x in [0.1, 1.0 / 3.0, 1e-300, -2.5e17, std::f64::consts::PI] {
            let s = fmt_f64(x);
            assert_eq!(s.parse::<f64>().unwrap(), x);
            let mantissa = s.split('e').next().unwrap().replace(['-', '.'], "");
            assert_eq!(mantissa.len(), 17);
        }
    }

    #[test]
    fn csv_and_jsonl_rows() {
        let mut w = TableWriter::new(Vec::new(), Format::Csv, &header(), "t", &["a", "b"]).unwrap();
        w.row(&[0.5.into(), "x,y".into()]).unwrap();
        let s = String::from_utf8(w.finish().unwrap()).unwrap();
        assert!(s.starts_with("# table: t\n"));
        assert!(s.ends_with("a,b\n5.0000000000000000e-1,\"x,y\"\n"));

        let mut w = TableWriter::new(Vec::new(), Format::Jsonl, &header(), "t", &["a", "n"]).unwrap();
        w.row(&[f64::NAN.into(), 3usize.into()]).unwrap();
        let s = String::from_utf8(w.finish().unwrap()).unwrap();
        let lines: Vec<&str> = s.lines().collect();
        let h: serde_json::Value = serde_json::from_str(lines[0]).unwrap();
        assert_eq!(h["header"]["seed"], 1);
        let r: serde_json::Value = serde_json::from_str(lines[1]).unwrap();
        assert!(r["a"].is_null());
        assert_eq!(r["n"], 3);
    }
}
