//! Event-driven hard-sphere dynamics on the torus.
//!
//! [`run`] uses a cell list with cell-crossing events and a binary-heap
//! event queue; stale events are detected through per-particle version
//! counters instead of being deleted. [`naive_run`] recomputes the earliest
//! pair event over all pairs (scanning periodic images) after every
//! collision and serves as the validation oracle.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};
use crate::geometry::{
    pair_collision_time, pair_collision_time_scan, scatter, torus_displacement, wrap, PhasePoint,
};
use crate::sampler::Configuration;
use crate::trajectory::{Breakpoint, CollisionRecord, EngineStats, RunRecord, Trajectory};
use crate::vector::{self, Vector};

/// Collisions allowed per particle before a run is declared an event storm.
pub const STORM_FACTOR: usize = 1000;
/// Smallest cell grid for which nearest-image prediction is valid: within a
/// prediction horizon both particles stay in their cells, so their
/// displacement stays below two cell sides, which must be under 1/2.
pub const MIN_CELLS: usize = 5;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EngineOptions {
    /// Cells per dimension; `None` picks about one particle per cell.
    /// Values below [`MIN_CELLS`] select all-pairs prediction with image
    /// scanning.
    pub cells_per_dim: Option<usize>,
}

#[derive(Debug, Clone, Copy)]
struct Particle<const D: usize> {
    t: f64,
    x: Vector<D>,
    v: Vector<D>,
    version: u64,
    cell: [usize; D],
    next_cross: f64,
}

impl<const D: usize> Particle<D> {
    #[inline]
    fn at(&self, t: f64) -> PhasePoint<D> {
        PhasePoint {
            x: wrap(&vector::axpy(&self.x, t - self.t, &self.v)),
            v: self.v,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum EventKind {
    Collision { i: usize, j: usize, vi: u64, vj: u64 },
    Crossing { i: usize, v: u64, dim: usize, up: bool },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Event {
    pub t: f64,
    pub kind: EventKind,
}

impl Event {
    fn key(&self) -> (u8, usize, usize) {
        match self.kind {
            EventKind::Collision { i, j, .. } => (0, i, j),
            EventKind::Crossing { i, dim, .. } => (1, i, dim),
        }
    }
}

impl Eq for Event {}

impl Ord for Event {
    /// Reversed so that `BinaryHeap` pops the earliest event; equal times
    /// fall back to collisions before crossings, then pair-lexicographic.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .t
            .total_cmp(&self.t)
            .then_with(|| other.key().cmp(&self.key()))
    }
}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Outcome of one processed queue entry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Step {
    Collision,
    Crossing,
    Stale,
}

pub(crate) struct Engine<const D: usize> {
    eps: f64,
    horizon: f64,
    now: f64,
    parts: Vec<Particle<D>>,
    trajectories: Vec<Trajectory<D>>,
    log: Vec<CollisionRecord<D>>,
    queue: BinaryHeap<Event>,
    /// 0 selects all-pairs mode.
    nc: usize,
    cells: Vec<Vec<usize>>,
    stats: EngineStats,
}

fn validate_config<const D: usize>(config: &Configuration<D>, horizon: f64) -> Result<()> {
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::InvalidParameter(format!("horizon {horizon} must be positive")));
    }
    for (k, p) in config.particles.iter().enumerate() {
        PhasePoint::new(p.x, p.v).map_err(|e| Error::CorruptState(format!("particle {k}: {e}")))?;
    }
    Ok(())
}

impl<const D: usize> Engine<D> {
    pub(crate) fn new(config: &Configuration<D>, horizon: f64, opts: EngineOptions) -> Result<Self> {
        validate_config(config, horizon)?;
        let n = config.particles.len();
        let eps = config.eps;
        let max_nc = (1.0 / eps).floor() as usize;
        let nc = match opts.cells_per_dim {
            Some(c) => c.min(max_nc),
            None => (n as f64).powf(1.0 / D as f64).ceil().max(MIN_CELLS as f64) as usize,
        }
        .min(max_nc)
        .min(1024);
        let nc = if nc < MIN_CELLS { 0 } else { nc };
        let parts: Vec<Particle<D>> = config
            .particles
            .iter()
            .map(|p| Particle {
                t: 0.0,
                x: p.x,
                v: p.v,
                version: 0,
                cell: [0; D],
                next_cross: f64::INFINITY,
            })
            .collect();
        let trajectories = config
            .particles
            .iter()
            .enumerate()
            .map(|(k, p)| Trajectory::new(k, Breakpoint { t: 0.0, x: p.x, v: p.v }))
            .collect();
        let ncells = if nc == 0 { 1 } else { nc.pow(D as u32) };
        let mut e = Self {
            eps,
            horizon,
            now: 0.0,
            parts,
            trajectories,
            log: Vec::new(),
            queue: BinaryHeap::new(),
            nc,
            cells: vec![Vec::new(); ncells],
            stats: EngineStats {
                cells_per_dim: nc,
                ..Default::default()
            },
        };
        for i in 0..n {
            let c = e.cell_of(&e.parts[i].x);
            e.parts[i].cell = c;
            let ci = e.cell_index(&c);
            e.cells[ci].push(i);
        }
        // hard-core check of the initial data
        if e.nc == 0 {
            for i in 0..n {
                for j in 0..i {
                    e.check_pair(i, j)?;
                }
            }
        } else {
            for i in 0..n {
                for j in e.neighbors(i) {
                    if j < i {
                        e.check_pair(i, j)?;
                    }
                }
            }
        }
        for i in 0..n {
            e.schedule_crossing(i);
        }
        for i in 0..n {
            e.predict_all(i, true)?;
        }
        Ok(e)
    }

    fn check_pair(&self, i: usize, j: usize) -> Result<()> {
        let r = torus_displacement(&self.parts[j].x, &self.parts[i].x);
        if vector::norm(&r) < self.eps * (1.0 - crate::geometry::CONTACT_TOL) {
            return Err(Error::CorruptState(format!(
                "particles {j} and {i} overlap at t = 0 (distance {})",
                vector::norm(&r)
            )));
        }
        Ok(())
    }

    fn cell_of(&self, x: &Vector<D>) -> [usize; D] {
        if self.nc == 0 {
            return [0; D];
        }
        std::array::from_fn(|k| ((x[k] * self.nc as f64) as usize).min(self.nc - 1))
    }

    fn cell_index(&self, c: &[usize; D]) -> usize {
        c.iter().rev().fold(0, |acc, &ck| acc * self.nc.max(1) + ck)
    }

    /// Particles in the 3^D block around `i`'s cell (including `i`).
    fn neighbors(&self, i: usize) -> Vec<usize> {
        if self.nc == 0 {
            return (0..self.parts.len()).collect();
        }
        let c = self.parts[i].cell;
        let mut out = Vec::new();
        let mut off = [0usize; D];
        loop {
            let nb: [usize; D] = std::array::from_fn(|k| (c[k] + self.nc + off[k] - 1) % self.nc);
            out.extend_from_slice(&self.cells[self.cell_index(&nb)]);
            let mut k = 0;
            loop {
                if k == D {
                    return out;
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

    fn schedule_crossing(&mut self, i: usize) {
        if self.nc == 0 {
            return;
        }
        let p = self.parts[i];
        let s = 1.0 / self.nc as f64;
        let x = p.at(self.now).x;
        let mut best = (f64::INFINITY, 0usize, true);
        for k in 0..D {
            if p.v[k] == 0.0 {
                continue;
            }
            let mut d = x[k] - p.cell[k] as f64 * s;
            d -= (d + 0.5).floor();
            let dt = if p.v[k] > 0.0 {
                ((s - d) / p.v[k]).max(0.0)
            } else {
                (d / -p.v[k]).max(0.0)
            };
            if dt < best.0 {
                best = (dt, k, p.v[k] > 0.0);
            }
        }
        let t = self.now + best.0;
        self.parts[i].next_cross = t;
        if t <= self.horizon {
            self.push(Event {
                t,
                kind: EventKind::Crossing {
                    i,
                    v: p.version,
                    dim: best.1,
                    up: best.2,
                },
            });
        }
    }

    fn push(&mut self, ev: Event) {
        self.queue.push(ev);
        if self.queue.len() > 16 * self.parts.len() + 1024 {
            self.compact();
        }
        self.stats.max_queue_len = self.stats.max_queue_len.max(self.queue.len());
    }

    fn is_valid(&self, ev: &Event) -> bool {
        match ev.kind {
            EventKind::Collision { i, j, vi, vj } => {
                self.parts[i].version == vi && self.parts[j].version == vj
            }
            EventKind::Crossing { i, v, .. } => self.parts[i].version == v && self.parts[i].next_cross == ev.t,
        }
    }

    fn compact(&mut self) {
        let old = std::mem::take(&mut self.queue).into_vec();
        let kept: Vec<Event> = old.into_iter().filter(|e| self.is_valid(e)).collect();
        self.queue = BinaryHeap::from(kept);
    }

    /// Predicts `i` against every candidate partner. With `lower_only`, only
    /// partners with a smaller index are predicted (initial sweep).
    fn predict_all(&mut self, i: usize, lower_only: bool) -> Result<()> {
        for j in self.neighbors(i) {
            if j == i || (lower_only && j > i) {
                continue;
            }
            self.predict_pair(i, j)?;
        }
        Ok(())
    }

    fn predict_pair(&mut self, i: usize, j: usize) -> Result<()> {
        let (pi, pj) = (self.parts[i], self.parts[j]);
        let zi = pi.at(self.now);
        let zj = pj.at(self.now);
        let contact = if self.nc == 0 {
            pair_collision_time_scan(&zi, &zj, self.eps, self.horizon - self.now)?
        } else {
            let h = pi.next_cross.min(pj.next_cross).min(self.horizon) - self.now;
            if h < 0.0 {
                return Ok(());
            }
            pair_collision_time(&zi, &zj, self.eps, h)?
        };
        if let Some(c) = contact {
            let (a, b) = if i < j { (i, j) } else { (j, i) };
            self.push(Event {
                t: self.now + c.t,
                kind: EventKind::Collision {
                    i: a,
                    j: b,
                    vi: self.parts[a].version,
                    vj: self.parts[b].version,
                },
            });
        }
        Ok(())
    }

    /// Pops and processes one queue entry; `None` when nothing remains
    /// before the horizon.
    pub(crate) fn step(&mut self) -> Result<Option<Step>> {
        let Some(ev) = self.queue.pop() else {
            return Ok(None);
        };
        if ev.t > self.horizon {
            return Ok(None);
        }
        if !self.is_valid(&ev) {
            self.stats.stale_pops += 1;
            return Ok(Some(Step::Stale));
        }
        self.now = self.now.max(ev.t);
        match ev.kind {
            EventKind::Collision { i, j, .. } => {
                let rec = collide(&mut self.parts, &mut self.trajectories, i, j, self.now, self.eps);
                self.log.push(rec);
                self.stats.collisions += 1;
                if self.stats.collisions > STORM_FACTOR * self.parts.len() {
                    return Err(Error::EventStorm {
                        limit: STORM_FACTOR * self.parts.len(),
                        n: self.parts.len(),
                    });
                }
                self.schedule_crossing(i);
                self.schedule_crossing(j);
                self.predict_all(i, false)?;
                self.predict_all(j, false)?;
                Ok(Some(Step::Collision))
            }
            EventKind::Crossing { i, dim, up, .. } => {
                let old = self.cell_index(&self.parts[i].cell);
                let c = &mut self.parts[i].cell[dim];
                *c = if up { (*c + 1) % self.nc } else { (*c + self.nc - 1) % self.nc };
                let new = self.cell_index(&self.parts[i].cell);
                let pos = self.cells[old].iter().position(|&q| q == i).expect("cell list");
                self.cells[old].swap_remove(pos);
                self.cells[new].push(i);
                self.stats.cell_crossings += 1;
                self.schedule_crossing(i);
                self.predict_all(i, false)?;
                Ok(Some(Step::Crossing))
            }
        }
    }

    pub(crate) fn finish(mut self) -> RunRecord<D> {
        let t = self.horizon;
        for (p, tr) in self.parts.iter().zip(self.trajectories.iter_mut()) {
            if tr.end_time() < t {
                let z = p.at(t);
                tr.push(Breakpoint { t, x: z.x, v: z.v });
            }
        }
        self.stats.max_queue_len = self.stats.max_queue_len.max(self.queue.len());
        RunRecord {
            eps: self.eps,
            horizon: self.horizon,
            trajectories: self.trajectories,
            log: self.log,
            stats: self.stats,
        }
    }

    #[cfg(test)]
    pub(crate) fn pending(&self) -> Vec<Event> {
        self.queue.clone().into_sorted_vec()
    }

    #[cfg(test)]
    pub(crate) fn event_is_valid(&self, ev: &Event) -> bool {
        self.is_valid(ev)
    }

    #[cfg(test)]
    pub(crate) fn snapshot(&self) -> Vec<(f64, Vector<D>, Vector<D>, u64)> {
        self.parts.iter().map(|p| (p.t, p.x, p.v, p.version)).collect()
    }

    #[cfg(test)]
    pub(crate) fn queue_len(&self) -> usize {
        self.queue.len()
    }
}

/// Advances `i` and `j` to `t`, nudges them to separation exactly `eps`,
/// scatters, and records the event on both trajectories.
fn collide<const D: usize>(
    parts: &mut [Particle<D>],
    trajectories: &mut [Trajectory<D>],
    i: usize,
    j: usize,
    t: f64,
    eps: f64,
) -> CollisionRecord<D> {
    let zi = parts[i].at(t);
    let zj = parts[j].at(t);
    let r = torus_displacement(&zj.x, &zi.x);
    let omega = vector::normalized(&r).expect("coincident centres at contact");
    let mid = vector::axpy(&zj.x, 0.5, &r);
    let xi = wrap(&vector::axpy(&mid, 0.5 * eps, &omega));
    let xj = wrap(&vector::axpy(&mid, -0.5 * eps, &omega));
    let (vi, vj) = scatter(&zi.v, &zj.v, &omega);
    for (k, x, v) in [(i, xi, vi), (j, xj, vj)] {
        let p = &mut parts[k];
        p.t = t;
        p.x = x;
        p.v = v;
        p.version += 1;
        trajectories[k].push(Breakpoint { t, x, v });
    }
    CollisionRecord {
        t,
        i,
        j,
        omega,
        vi_pre: zi.v,
        vj_pre: zj.v,
        vi_post: vi,
        vj_post: vj,
    }
}

/// Event-driven run on `[0, horizon]` with default options.
pub fn run<const D: usize>(config: &Configuration<D>, horizon: f64) -> Result<RunRecord<D>> {
    run_with_options(config, horizon, EngineOptions::default())
}

pub fn run_with_options<const D: usize>(
    config: &Configuration<D>,
    horizon: f64,
    opts: EngineOptions,
) -> Result<RunRecord<D>> {
    let mut e = Engine::new(config, horizon, opts)?;
    while e.step()?.is_some() {}
    Ok(e.finish())
}

/// Quadratic-time oracle: after every collision, the earliest event over all
/// pairs and all swept periodic images is recomputed from scratch.
pub fn naive_run<const D: usize>(config: &Configuration<D>, horizon: f64) -> Result<RunRecord<D>> {
    validate_config(config, horizon)?;
    let n = config.particles.len();
    let eps = config.eps;
    let mut parts: Vec<Particle<D>> = config
        .particles
        .iter()
        .map(|p| Particle {
            t: 0.0,
            x: p.x,
            v: p.v,
            version: 0,
            cell: [0; D],
            next_cross: f64::INFINITY,
        })
        .collect();
    let mut trajectories: Vec<Trajectory<D>> = config
        .particles
        .iter()
        .enumerate()
        .map(|(k, p)| Trajectory::new(k, Breakpoint { t: 0.0, x: p.x, v: p.v }))
        .collect();
    let mut log = Vec::new();
    let mut now = 0.0;
    loop {
        let mut best: Option<(f64, usize, usize)> = None;
        for i in 0..n {
            for j in i + 1..n {
                let zi = parts[i].at(now);
                let zj = parts[j].at(now);
                if let Some(c) = pair_collision_time_scan(&zi, &zj, eps, horizon - now)? {
                    let cand = (now + c.t, i, j);
                    if best.is_none_or(|b| cand.0 < b.0) {
                        best = Some(cand);
                    }
                }
            }
        }
        let Some((t, i, j)) = best else { break };
        now = t;
        log.push(collide(&mut parts, &mut trajectories, i, j, t, eps));
        if log.len() > STORM_FACTOR * n {
            return Err(Error::EventStorm {
                limit: STORM_FACTOR * n,
                n,
            });
        }
    }
    for (p, tr) in parts.iter().zip(trajectories.iter_mut()) {
        if tr.end_time() < horizon {
            let z = p.at(horizon);
            tr.push(Breakpoint { t: horizon, x: z.x, v: z.v });
        }
    }
    let collisions = log.len();
    Ok(RunRecord {
        eps,
        horizon,
        trajectories,
        log,
        stats: EngineStats {
            collisions,
            ..Default::default()
        },
    })
}

/// Total kinetic energy `sum |v|^2 / 2` and momentum of a set of states.
pub fn energy_momentum<const D: usize>(states: &[PhasePoint<D>]) -> (f64, Vector<D>) {
    let mut e = 0.0;
    let mut p = [0.0; D];
    for z in states {
        e += 0.5 * vector::norm2(&z.v);
        p = vector::add(&p, &z.v);
    }
    (e, p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Domain};
    use crate::sampler::{sample_initial_config, InitialModel, SamplerMode};

    fn cfg2(ps: &[([f64; 2], [f64; 2])], eps: f64) -> Configuration<2> {
        Configuration {
            particles: ps.iter().map(|&(x, v)| PhasePoint::new(x, v).unwrap()).collect(),
            eps,
        }
    }

    #[test]
    fn single_particle_free_flight() {
        let c = cfg2(&[([0.5, 0.5], [1.0, 0.3])], 0.1);
        for rec in [run(&c, 1.0).unwrap(), naive_run(&c, 1.0).unwrap()] {
            assert!(rec.log.is_empty());
            assert_eq!(rec.trajectories[0].len(), 2);
            let end = rec.trajectories[0].last();
            assert!((end.x[0] - 0.5).abs() < 1e-12 && (end.x[1] - 0.8).abs() < 1e-12);
        }
    }

    #[test]
    fn head_on_pair() {
        let c = cfg2(&[([0.2, 0.5], [1.0, 0.0]), ([0.7, 0.5], [0.0, 0.0])], 0.1);
        for rec in [run(&c, 1.0).unwrap(), naive_run(&c, 1.0).unwrap()] {
            assert_eq!(rec.log.len(), 1);
            let e = rec.log[0];
            assert!((e.t - 0.4).abs() < 1e-12);
            assert!((e.vi_post[0]).abs() < 1e-12 && (e.vj_post[0] - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn overlapping_start_is_rejected() {
        let c = cfg2(&[([0.2, 0.5], [1.0, 0.0]), ([0.25, 0.5], [0.0, 0.0])], 0.1);
        assert!(matches!(run(&c, 1.0), Err(Error::CorruptState(_))));
        assert!(matches!(naive_run(&c, 1.0), Err(Error::CorruptState(_))));
    }

    fn random_small(seed: u64, n: usize, eps: f64) -> Configuration<2> {
        let mut rng = stream(seed, Domain::Validation, 77);
        let m = InitialModel::uniform(1.0);
        loop {
            let c: Configuration<2> =
                sample_initial_config(n as f64, eps, &m, SamplerMode::Sequential, &mut rng).unwrap();
            if c.len() >= 2 {
                return c;
            }
        }
    }

    #[test]
    fn stale_pop_leaves_state_unchanged() {
        let c = random_small(11, 40, 0.05);
        let mut e = Engine::new(&c, 2.0, EngineOptions::default()).unwrap();
        let mut seen_stale = false;
        while let Some(top) = e.pending().last().copied() {
            let before = e.snapshot();
            let valid = e.event_is_valid(&top);
            match e.step().unwrap() {
                Some(Step::Stale) => {
                    assert!(!valid);
                    assert_eq!(before, e.snapshot());
                    seen_stale = true;
                }
                Some(_) => {}
                None => break,
            }
        }
        assert!(seen_stale);
    }

    #[test]
    fn collision_invalidates_partner_events() {
        let c = random_small(12, 40, 0.05);
        let mut e = Engine::new(&c, 2.0, EngineOptions::default()).unwrap();
        loop {
            let pending_before = e.pending();
            match e.step().unwrap() {
                Some(Step::Collision) => {
                    let rec = *e.log.last().unwrap();
                    for ev in pending_before {
                        let involves = match ev.kind {
                            EventKind::Collision { i, j, .. } => [i, j].iter().any(|&q| q == rec.i || q == rec.j),
                            EventKind::Crossing { i, .. } => i == rec.i || i == rec.j,
                        };
                        if involves {
                            assert!(!e.event_is_valid(&ev));
                        }
                    }
                    break;
                }
                Some(_) => {}
                None => panic!("no collision in test run"),
            }
        }
    }

    #[test]
    fn queue_pops_in_time_order_and_stays_linear() {
        let c = random_small(13, 200, 0.01);
        let n = c.len();
        let mut e = Engine::new(&c, 1.0, EngineOptions::default()).unwrap();
        let mut last = 0.0;
        let mut max_len = e.queue_len();
        while let Some(s) = e.step().unwrap() {
            if s != Step::Stale {
                assert!(e.now >= last);
                last = e.now;
            }
            max_len = max_len.max(e.queue_len());
        }
        assert!(max_len <= 16 * n + 1024, "queue length {max_len} for n = {n}");
    }

    #[test]
    fn all_pairs_fallback_matches_cells() {
        let c = random_small(14, 30, 0.02);
        let a = run(&c, 0.5).unwrap();
        let b = run_with_options(&c, 0.5, EngineOptions { cells_per_dim: Some(1) }).unwrap();
        assert_eq!(b.stats.cells_per_dim, 0);
        assert_eq!(a.log.len(), b.log.len());
        for (x, y) in a.log.iter().zip(&b.log) {
            assert_eq!(x.pair(), y.pair());
            assert!((x.t - y.t).abs() < 1e-9);
        }
    }
}
