use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use cluster_gas::config::{ExpansionQuantity, Format, RunConfig};
use cluster_gas::engine::{energy_momentum, EngineOptions};
use cluster_gas::ensemble::{pool, run_ensemble, EnsembleSpec};
use cluster_gas::experiments::{cluster_paths, cluster_sizes_at, Scale, CRITERIA};
use cluster_gas::expansion::{
    cumulant_estimates, empirical_exponential_moment, estimate_aggregate_term, estimate_nu_integral,
    single_particle_sums, AggregateOptions, NuOptions,
};
use cluster_gas::limits::{
    coagulation_run, dsmc_run, largest_fraction, mean_cluster_size, CoagulationOptions, DsmcOptions,
};
use cluster_gas::output::{
    cluster_rows, collision_columns, collision_rows, trajectory_columns, trajectory_rows, Header, TableWriter, Value,
    CLUSTER_COLUMNS,
};
use cluster_gas::stats::Estimator;
use cluster_gas::{validate as suites, vector};

use crate::Common;

/// Relative drift of energy and momentum tolerated in an MD run.
const DRIFT_TOL: f64 = 1e-9;

struct Ctx {
    config: RunConfig,
    header: Header,
    format: Format,
    dir: PathBuf,
    workers: Option<usize>,
}

impl Ctx {
    fn load(common: &Common) -> Result<Self> {
        let path = common.config.as_ref().context("--config is required for this command")?;
        let mut config = RunConfig::load(path).with_context(|| format!("loading {}", path.display()))?;
        Self::finish(common, &mut config)?;
        Ok(Self::from_config(common, config))
    }

    /// Configuration when one is given, a default one otherwise.
    fn load_or(common: &Common, default: RunConfig) -> Result<Self> {
        if common.config.is_some() {
            return Self::load(common);
        }
        let mut config = default;
        Self::finish(common, &mut config)?;
        Ok(Self::from_config(common, config))
    }

    fn finish(common: &Common, config: &mut RunConfig) -> Result<()> {
        if let Some(s) = common.seed {
            config.seed = s;
        }
        if let Some(r) = common.runs {
            config.runs = r;
        }
        if let Some(f) = common.format {
            config.output.format = f;
        }
        if let Some(o) = &common.out {
            config.output.dir = o.to_string_lossy().into_owned();
        }
        if common.dump_trajectories {
            config.output.dump_trajectories = true;
        }
        config.validate()?;
        Ok(())
    }

    fn from_config(common: &Common, config: RunConfig) -> Self {
        Self {
            header: Header::new(&config),
            format: config.output.format,
            dir: PathBuf::from(&config.output.dir),
            workers: common.workers,
            config,
        }
    }

    fn spec(&self) -> Result<EnsembleSpec> {
        let c = &self.config;
        Ok(EnsembleSpec {
            mu: c.mu(),
            eps: c.epsilon,
            horizon: c.horizon,
            model: c.model()?,
            sampler: c.sampler_mode(),
            engine: EngineOptions {
                cells_per_dim: c.engine.as_ref().and_then(|e| e.cells_per_dim),
            },
            seed: c.seed,
            runs: c.runs,
        })
    }

    fn writer<S: AsRef<str>>(&self, table: &str, columns: &[S]) -> Result<TableWriter<BufWriter<File>>> {
        std::fs::create_dir_all(&self.dir).with_context(|| format!("creating {}", self.dir.display()))?;
        let ext = match self.format {
            Format::Csv => "csv",
            Format::Jsonl => "jsonl",
        };
        let path = self.dir.join(format!("{table}.{ext}"));
        let file = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
        Ok(TableWriter::new(BufWriter::new(file), self.format, &self.header, table, columns)?)
    }

    fn write_table<S: AsRef<str>>(&self, table: &str, columns: &[S], rows: impl IntoIterator<Item = Vec<Value>>) -> Result<()> {
        let mut w = self.writer(table, columns)?;
        for row in rows {
            w.row(&row)?;
        }
        w.finish()?;
        Ok(())
    }
}

fn out_dir(dir: &Path) -> String {
    dir.display().to_string()
}

/// Dispatches on the configured dimension.
macro_rules! by_dimension {
    ($ctx:expr, $f:ident) => {
        match $ctx.config.dimension {
            2 => $f::<2>(&$ctx),
            3 => $f::<3>(&$ctx),
            d => bail!("unsupported dimension {d}"),
        }
    };
}

struct SimulatedRun {
    collisions: Vec<Vec<Value>>,
    clusters: Vec<Vec<Value>>,
    trajectories: Vec<Vec<Value>>,
    drift: (f64, f64),
}

pub fn simulate(common: &Common) -> Result<bool> {
    let ctx = Ctx::load(common)?;
    by_dimension!(ctx, simulate_d)
}

fn simulate_d<const D: usize>(ctx: &Ctx) -> Result<bool> {
    let spec = ctx.spec()?;
    let dump = ctx.config.output.dump_trajectories;
    let runs = run_ensemble::<D, _, _>(&spec, ctx.workers, |r, rec| {
        let (e0, p0) = energy_momentum(&rec.initial_states());
        let (e1, p1) = energy_momentum(&rec.final_states());
        let speed: f64 = rec.initial_states().iter().map(|z| vector::norm(&z.v)).sum();
        let de = if e0 > 0.0 { (e1 - e0).abs() / e0 } else { 0.0 };
        let dp = if speed > 0.0 { vector::norm(&vector::sub(&p1, &p0)) / speed } else { 0.0 };
        Ok(SimulatedRun {
            collisions: collision_rows(r, &rec),
            clusters: cluster_rows(r, &cluster_paths(&rec)),
            trajectories: if dump { trajectory_rows(r, &rec) } else { Vec::new() },
            drift: (de, dp),
        })
    })?;
    let mut ok = true;
    for (r, run) in runs.iter().enumerate() {
        if run.drift.0 > DRIFT_TOL || run.drift.1 > DRIFT_TOL {
            eprintln!("run {r}: energy drift {:e}, momentum drift {:e}", run.drift.0, run.drift.1);
            ok = false;
        }
    }
    ctx.write_table("collisions", &collision_columns(D), runs.iter().flat_map(|r| r.collisions.clone()))?;
    ctx.write_table("clusters", &CLUSTER_COLUMNS, runs.iter().flat_map(|r| r.clusters.clone()))?;
    if dump {
        ctx.write_table("trajectories", &trajectory_columns(D), runs.iter().flat_map(|r| r.trajectories.clone()))?;
    }
    let n_coll: usize = runs.iter().map(|r| r.collisions.len()).sum();
    println!("{} runs, {} collisions, written to {}", runs.len(), n_coll, out_dir(&ctx.dir));
    Ok(ok)
}

struct RunClusters {
    /// (size, minimal, recollisions) per cluster path.
    paths: Vec<(usize, bool, usize)>,
    /// (largest fraction, mean size) per sweep horizon.
    sweep: Vec<(f64, f64)>,
}

pub fn clusters(common: &Common) -> Result<bool> {
    let ctx = Ctx::load(common)?;
    by_dimension!(ctx, clusters_d)
}

fn clusters_d<const D: usize>(ctx: &Ctx) -> Result<bool> {
    let mut sweep: Vec<f64> = ctx.config.clusters.as_ref().map(|c| c.sweep.clone()).unwrap_or_default();
    if sweep.is_empty() {
        sweep.push(ctx.config.horizon);
    }
    let mut spec = ctx.spec()?;
    spec.horizon = sweep.iter().copied().fold(spec.horizon, f64::max);
    let horizon = ctx.config.horizon;
    let runs = run_ensemble::<D, _, _>(&spec, ctx.workers, |_, rec| {
        // cluster paths on [0, horizon]
        let paths = if spec.horizon > horizon {
            let mut cut = rec.clone();
            cut.log.retain(|c| c.t <= horizon);
            cluster_paths(&cut)
        } else {
            cluster_paths(&rec)
        };
        Ok(RunClusters {
            paths: paths.iter().map(|p| (p.size(), p.is_minimal(), p.n_recollisions())).collect(),
            sweep: sweep
                .iter()
                .map(|&t| {
                    let s = cluster_sizes_at(&rec, t);
                    (largest_fraction(&s), mean_cluster_size(&s))
                })
                .collect(),
        })
    })?;
    let mut law = std::collections::BTreeMap::<usize, (u64, u64, u64)>::new();
    for p in runs.iter().flat_map(|r| &r.paths) {
        let e = law.entry(p.0).or_default();
        e.0 += 1;
        e.1 += p.1 as u64;
        e.2 += p.2 as u64;
    }
    let total: u64 = law.values().map(|e| e.0).sum();
    ctx.write_table(
        "size_law",
        &["size", "count", "frequency", "per_unit_activity", "minimal_fraction", "mean_recollisions"],
        law.iter().map(|(&s, &(c, m, rc))| {
            vec![
                s.into(),
                c.into(),
                (c as f64 / total as f64).into(),
                (c as f64 / (runs.len() as f64 * spec.mu)).into(),
                (m as f64 / c as f64).into(),
                (rc as f64 / c as f64).into(),
            ]
        }),
    )?;
    let rows = sweep.iter().enumerate().map(|(k, &t)| {
        let lf = Estimator::from_slice(&runs.iter().map(|r| r.sweep[k].0).collect::<Vec<_>>());
        let ms = Estimator::from_slice(&runs.iter().map(|r| r.sweep[k].1).collect::<Vec<_>>());
        vec![t.into(), lf.mean.into(), lf.stderr().into(), ms.mean.into(), ms.stderr().into()]
    });
    ctx.write_table(
        "sweep",
        &["horizon", "largest_fraction", "largest_fraction_stderr", "mean_size", "mean_size_stderr"],
        rows,
    )?;
    println!("{} runs, {} cluster paths, written to {}", runs.len(), total, out_dir(&ctx.dir));
    Ok(true)
}

const RESULT_COLUMNS: [&str; 9] =
    ["quantity", "n_or_k", "epsilon", "T", "estimate", "stderr", "n_samples", "compat_rate", "seed"];

fn result_row(
    quantity: &str,
    n_or_k: String,
    c: &RunConfig,
    estimate: f64,
    stderr: f64,
    n_samples: usize,
    compat_rate: f64,
) -> Vec<Value> {
    vec![
        quantity.into(),
        n_or_k.into(),
        c.epsilon.into(),
        c.horizon.into(),
        estimate.into(),
        stderr.into(),
        n_samples.into(),
        compat_rate.into(),
        c.seed.into(),
    ]
}

pub fn expansion(common: &Common) -> Result<bool> {
    let ctx = Ctx::load(common)?;
    by_dimension!(ctx, expansion_d)
}

fn expansion_d<const D: usize>(ctx: &Ctx) -> Result<bool> {
    let c = &ctx.config;
    let x = c.expansion.as_ref().context("the configuration has no [expansion] section")?;
    let model = c.model()?;
    let h = x.observable.functional::<D>(c.horizon);
    let nu = NuOptions {
        directions: x.direction_mode()?,
        beta_ref_ratio: x.beta_ref_ratio,
        ..NuOptions::default()
    };
    let pool = pool(ctx.workers)?;
    match x.quantity {
        ExpansionQuantity::Nu => {
            let e = pool.install(|| estimate_nu_integral(x.sizes[0], &h, c.epsilon, c.horizon, &model, x.samples, c.seed, nu))?;
            ctx.write_table(
                "nu",
                &RESULT_COLUMNS,
                [result_row("nu", x.sizes[0].to_string(), c, e.estimate, e.stderr, e.n_samples, e.compat_rate)],
            )?;
            println!("nu_{} = {} +- {}", x.sizes[0], e.estimate, e.stderr);
        }
        ExpansionQuantity::Aggregate => {
            let options = AggregateOptions::<D> {
                nu,
                mu: c.mu,
                ..Default::default()
            };
            let e = pool.install(|| estimate_aggregate_term(&x.sizes, &h, c.epsilon, c.horizon, &model, x.samples, c.seed, options))?;
            let sizes = x.sizes.iter().map(|s| s.to_string()).collect::<Vec<_>>().join("+");
            let mut cols: Vec<&str> = RESULT_COLUMNS.to_vec();
            cols.extend([
                "minimal_term",
                "minimal_stderr",
                "remainder",
                "remainder_stderr",
                "minimal_probability",
                "minimal_probability_stderr",
                "nonminimal_fraction",
                "nonminimal_fraction_stderr",
                "connected_draws",
            ]);
            let mut row = result_row("aggregate", sizes, c, e.total, e.total_stderr, e.n_samples, e.compat_rate);
            row.extend([
                e.minimal_term.into(),
                e.minimal_stderr.into(),
                e.remainder.into(),
                e.remainder_stderr.into(),
                e.minimal_probability.into(),
                e.minimal_probability_stderr.into(),
                e.nonminimal_fraction.into(),
                e.nonminimal_fraction_stderr.into(),
                e.connected_draws.into(),
            ]);
            ctx.write_table("aggregate", &cols, [row])?;
            println!("minimal term {} +- {}, remainder {} +- {}", e.minimal_term, e.minimal_stderr, e.remainder, e.remainder_stderr);
        }
        ExpansionQuantity::Lambda | ExpansionQuantity::Cumulants => {
            let spec = ctx.spec()?;
            let sums = run_ensemble::<D, _, _>(&spec, ctx.workers, |_, rec| {
                Ok(single_particle_sums(std::slice::from_ref(&rec), &h)?[0])
            })?;
            if x.quantity == ExpansionQuantity::Lambda {
                let pts = empirical_exponential_moment(&sums, spec.mu, &x.u_grid)?;
                ctx.write_table(
                    "lambda",
                    &["u", "value", "stderr"],
                    pts.iter().map(|p| vec![p.u.into(), p.value.into(), p.stderr.into()]),
                )?;
            } else {
                let k = cumulant_estimates(&sums, spec.mu)?;
                ctx.write_table(
                    "cumulants",
                    &["order", "mu", "runs", "scaled_cumulant", "stderr"],
                    (0..3).map(|i| {
                        vec![(i + 1).into(), k.mu.into(), k.n_runs.into(), k.values[i].into(), k.stderrs[i].into()]
                    }),
                )?;
            }
            println!("{} runs, written to {}", sums.len(), out_dir(&ctx.dir));
        }
    }
    Ok(true)
}

pub fn dsmc(common: &Common) -> Result<bool> {
    let ctx = Ctx::load(common)?;
    by_dimension!(ctx, dsmc_d)
}

fn dsmc_d<const D: usize>(ctx: &Ctx) -> Result<bool> {
    let c = &ctx.config;
    let s = c.dsmc.as_ref().context("the configuration has no [dsmc] section")?;
    let mut times = s.output_times.clone();
    if times.is_empty() {
        times = vec![0.0, c.horizon];
    }
    let opts = DsmcOptions {
        particles: s.particles,
        cell_size: s.cell_size,
        dt: s.dt,
        horizon: c.horizon,
        output_times: times,
        collisionless: s.collisionless,
        n_modes: s.n_modes,
        record_cells: true,
    };
    let run = dsmc_run::<D>(&c.model()?, &opts, c.seed)?;
    ctx.write_table(
        "modes",
        &["t", "k", "mode", "stderr"],
        run.snapshots.iter().flat_map(|snap| {
            (0..snap.modes.len()).map(move |k| vec![snap.t.into(), (k + 1).into(), snap.modes[k].into(), snap.mode_stderrs[k].into()])
        }),
    )?;
    let mut cols = vec!["t".to_string(), "cell".into(), "density".into()];
    cols.extend(cluster_gas::output::vector_columns("mean_v", D));
    cols.push("energy".into());
    ctx.write_table(
        "cells",
        &cols,
        run.snapshots.iter().flat_map(|snap| {
            snap.cells.iter().map(move |cell| {
                let mut row: Vec<Value> = vec![snap.t.into(), cell.cell.into(), cell.density.into()];
                row.extend(cell.mean_v.iter().map(|&x| Value::F(x)));
                row.push(cell.energy.into());
                row
            })
        }),
    )?;
    let mut cols = vec!["t".to_string(), "count".into()];
    cols.extend(cluster_gas::output::vector_columns("momentum", D));
    cols.extend(["energy".into(), "fourth".into(), "eighth".into()]);
    ctx.write_table(
        "moments",
        &cols,
        run.snapshots.iter().map(|snap| {
            let m = &snap.moments;
            let mut row: Vec<Value> = vec![snap.t.into(), m.count.into()];
            row.extend(m.momentum.iter().map(|&x| Value::F(x)));
            row.extend([m.energy.into(), m.fourth.into(), m.eighth.into()]);
            row
        }),
    )?;
    let (first, last) = (&run.snapshots[0].moments, &run.snapshots[run.snapshots.len() - 1].moments);
    let de = (last.energy - first.energy).abs() / first.energy.max(f64::MIN_POSITIVE);
    let dp = vector::norm(&vector::sub(&last.momentum, &first.momentum));
    let ok = first.count == last.count && de <= DRIFT_TOL && dp <= DRIFT_TOL;
    if !ok {
        eprintln!("conservation violated: energy change {de:e}, momentum change {dp:e}");
    }
    println!("{} collisions, {} majorant breaches, written to {}", run.collisions, run.majorant_breaches, out_dir(&ctx.dir));
    Ok(ok)
}

pub fn coagulate(common: &Common) -> Result<bool> {
    let ctx = Ctx::load(common)?;
    by_dimension!(ctx, coagulate_d)
}

fn coagulate_d<const D: usize>(ctx: &Ctx) -> Result<bool> {
    let c = &ctx.config;
    let s = c.coagulation.as_ref().context("the configuration has no [coagulation] section")?;
    let mut times = s.output_times.clone();
    if times.is_empty() {
        times = vec![c.horizon];
    }
    let opts = CoagulationOptions {
        particles: s.particles,
        cell_size: s.cell_size,
        dt: s.dt,
        horizon: c.horizon,
        output_times: times,
        kernel_scale: s.kernel_scale,
        record_clusters: false,
    };
    let run = coagulation_run::<D>(&c.model()?, &opts, c.seed)?;
    ctx.write_table(
        "size_law",
        &["t", "size", "frequency", "count", "mean_energy"],
        run.snapshots.iter().flat_map(|snap| {
            let h = &snap.size_law;
            h.counts.iter().map(move |(&size, &count)| {
                vec![
                    snap.t.into(),
                    size.into(),
                    (count as f64 / h.normalization).into(),
                    count.into(),
                    (h.energy.get(&size).copied().unwrap_or(0.0) / count as f64).into(),
                ]
            })
        }),
    )?;
    ctx.write_table(
        "summary",
        &["t", "n_clusters", "largest_fraction", "mean_size", "merges"],
        run.snapshots.iter().map(|snap| {
            vec![snap.t.into(), snap.n_clusters.into(), snap.largest_fraction.into(), snap.mean_size.into(), snap.merges.into()]
        }),
    )?;
    let mass: usize = run.final_clusters.iter().map(|c| c.1).sum();
    let ok = mass == s.particles;
    if !ok {
        eprintln!("cluster sizes sum to {mass}, expected {}", s.particles);
    }
    println!("{} merges from {} candidates, written to {}", run.merges, run.candidates, out_dir(&ctx.dir));
    Ok(ok)
}

pub fn compare(common: &Common, quick: bool, ids: &[usize]) -> Result<bool> {
    let ctx = Ctx::load_or(common, RunConfig::new(2, 0.01, 0.2))?;
    for &id in ids {
        if !(1..=CRITERIA.len()).contains(&id) {
            bail!("criterion ids run from 1 to {}, found {id}", CRITERIA.len());
        }
    }
    let scale = if quick { Scale::Quick } else { Scale::Full };
    let pool = pool(ctx.workers)?;
    let mut reports = Vec::new();
    for (k, f) in CRITERIA.iter().enumerate() {
        if !ids.is_empty() && !ids.contains(&(k + 1)) {
            continue;
        }
        let rep = pool.install(|| f(ctx.config.seed, scale))?;
        println!("{}", rep.line());
        for n in &rep.notes {
            println!("    {n}");
        }
        reports.push(rep);
    }
    let rows = reports.iter().flat_map(|rep| {
        rep.metrics.iter().map(move |m| {
            vec![
                rep.id.into(),
                rep.title.into(),
                m.name.clone().into(),
                m.value.into(),
                m.stderr.into(),
                m.reference.into(),
                rep.passed.into(),
            ]
        })
    });
    ctx.write_table("acceptance", &["criterion", "title", "metric", "value", "stderr", "reference", "passed"], rows)?;
    Ok(reports.iter().all(|r| r.passed))
}

pub fn validate(common: &Common) -> Result<bool> {
    let seed = common.seed.unwrap_or(0);
    let pool = pool(common.workers)?;
    let reports = pool.install(|| suites::all_suites(seed));
    let mut ok = true;
    for r in &reports {
        println!(
            "{} {}: {} checks, {} failures",
            if r.passed() { "PASS" } else { "FAIL" },
            r.name,
            r.checks,
            r.failures.len()
        );
        for f in r.failures.iter().take(10) {
            println!("    {f}");
        }
        ok &= r.passed();
    }
    Ok(ok)
}
