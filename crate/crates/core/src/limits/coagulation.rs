use std::collections::HashMap;

use rand::Rng;
use rand_distr::{Distribution, Poisson};

use crate::combinatorics::OrderedTree;
use crate::error::{Error, Result};
use crate::geometry::{kappa, sample_cross_section_direction, scatter, torus_displacement, wrap, PhasePoint};
use crate::rng::{stream, Domain, StreamRng};
use crate::sampler::InitialModel;
use crate::stats::Histogram;
use crate::trajectory::{Breakpoint, Trajectory};
use crate::union_find::UnionFind;
use crate::vector::{self, Vector};

use super::{cell_lists, cells_per_dim};

/// Limiting cluster path: a decorated ordered tree together with its
/// realization, in which the two members of every edge are at the same
/// point at the edge time. Member positions are stored unwrapped.
#[derive(Debug, Clone, PartialEq)]
pub struct LimitCluster<const D: usize> {
    /// Global particle ids, increasing.
    pub ids: Vec<usize>,
    /// Edges in time order, local indices written `(min, max)`.
    pub tree: OrderedTree,
    pub times: Vec<f64>,
    /// Deflection of edge `(a, b)`, oriented from `b` to `a`.
    pub omegas: Vec<Vector<D>>,
    paths: Vec<Vec<Breakpoint<D>>>,
}

fn unwrapped_at<const D: usize>(bps: &[Breakpoint<D>], t: f64) -> PhasePoint<D> {
    let k = bps.partition_point(|b| b.t <= t).saturating_sub(1);
    let b = &bps[k];
    PhasePoint {
        x: vector::axpy(&b.x, t - b.t, &b.v),
        v: b.v,
    }
}

impl<const D: usize> LimitCluster<D> {
    pub fn singleton(id: usize, z: PhasePoint<D>) -> Self {
        Self {
            ids: vec![id],
            tree: OrderedTree::new(1, Vec::new()),
            times: Vec::new(),
            omegas: Vec::new(),
            paths: vec![vec![Breakpoint { t: 0.0, x: z.x, v: z.v }]],
        }
    }

    pub fn size(&self) -> usize {
        self.ids.len()
    }

    pub fn local_index(&self, id: usize) -> Option<usize> {
        self.ids.binary_search(&id).ok()
    }

    /// Kinetic energy (constant in time).
    pub fn energy(&self) -> f64 {
        self.paths.iter().map(|p| 0.5 * vector::norm2(&p[0].v)).sum()
    }

    /// Initial velocities of the members.
    pub fn initial_velocities(&self) -> Vec<Vector<D>> {
        self.paths.iter().map(|p| p[0].v).collect()
    }

    /// Centre of mass at time zero, wrapped onto the torus.
    pub fn root(&self) -> Vector<D> {
        let n = self.size() as f64;
        let mut c = [0.0; D];
        for p in &self.paths {
            c = vector::axpy(&c, 1.0 / n, &p[0].x);
        }
        wrap(&c)
    }

    /// Unwrapped state of member `local` at `t`.
    pub fn member_state(&self, local: usize, t: f64) -> PhasePoint<D> {
        unwrapped_at(&self.paths[local], t)
    }

    /// Member paths on the torus.
    pub fn trajectories(&self) -> Vec<Trajectory<D>> {
        self.paths
            .iter()
            .zip(&self.ids)
            .map(|(p, &id)| {
                Trajectory::from_breakpoints(
                    id,
                    p.iter().map(|b| Breakpoint { t: b.t, x: wrap(&b.x), v: b.v }).collect(),
                )
            })
            .collect()
    }

    /// Largest distance between the members of an edge at its time.
    pub fn coincidence_defect(&self) -> f64 {
        self.tree
            .edges
            .iter()
            .zip(&self.times)
            .map(|(&(a, b), &t)| {
                vector::norm(&vector::sub(&self.member_state(a, t).x, &self.member_state(b, t).x))
            })
            .fold(0.0, f64::max)
    }

    fn translated(&self, s: &Vector<D>) -> Vec<Vec<Breakpoint<D>>> {
        self.paths
            .iter()
            .map(|p| {
                p.iter()
                    .map(|b| Breakpoint {
                        t: b.t,
                        x: vector::add(&b.x, s),
                        v: b.v,
                    })
                    .collect()
            })
            .collect()
    }
}

/// Merges `a` and `b` through a collision of member `i` of `a` with member
/// `j` of `b` at time `t` with deflection `omega` (oriented from `j` to `i`).
///
/// Both clusters are translated, `a` by `n_b/n` and `b` by `-n_a/n` of the
/// displacement between `i` and `j` at `t`, so the pair coincides while
/// the joint centre of mass at time zero is unchanged. The result is the
/// same for `merge_clusters(b, a, j, i, t, -omega)` up to a lattice
/// translation of the unwrapped positions.
pub fn merge_clusters<const D: usize>(
    a: &LimitCluster<D>,
    b: &LimitCluster<D>,
    i: usize,
    j: usize,
    t: f64,
    omega: Vector<D>,
) -> Result<LimitCluster<D>> {
    if let Some(&found) = a.times.iter().chain(&b.times).find(|&&s| s >= t) {
        return Err(Error::TimeOrderViolation { found, t });
    }
    if i >= a.size() || j >= b.size() {
        return Err(Error::InvalidParameter("merge member out of range".into()));
    }
    let (na, nb) = (a.size() as f64, b.size() as f64);
    let n = na + nb;
    let xi = a.member_state(i, t).x;
    let xj = b.member_state(j, t).x;
    let delta = torus_displacement(&wrap(&xi), &wrap(&xj));
    // lattice part of the unwrapped separation
    let lattice: Vector<D> = std::array::from_fn(|k| ((xj[k] - xi[k]) - delta[k]).round());
    let shift_a = vector::scale(nb / n, &delta);
    let shift_b = vector::sub(&vector::scale(-na / n, &delta), &lattice);
    let pa = a.translated(&shift_a);
    let pb = b.translated(&shift_b);

    let mut members: Vec<(usize, Vec<Breakpoint<D>>, bool, usize)> = Vec::new();
    for (k, p) in pa.into_iter().enumerate() {
        members.push((a.ids[k], p, true, k));
    }
    for (k, p) in pb.into_iter().enumerate() {
        members.push((b.ids[k], p, false, k));
    }
    members.sort_by_key(|m| m.0);
    if members.windows(2).any(|w| w[0].0 == w[1].0) {
        return Err(Error::InvalidParameter("merged clusters share a particle".into()));
    }
    let mut map_a = vec![0; a.size()];
    let mut map_b = vec![0; b.size()];
    for (new, m) in members.iter().enumerate() {
        if m.2 {
            map_a[m.3] = new;
        } else {
            map_b[m.3] = new;
        }
    }
    let mut edges: Vec<(f64, (usize, usize), Vector<D>)> = Vec::with_capacity(a.size() + b.size() - 1);
    for (e, &(p, q)) in a.tree.edges.iter().enumerate() {
        edges.push(canonical_edge(a.times[e], map_a[p], map_a[q], a.omegas[e]));
    }
    for (e, &(p, q)) in b.tree.edges.iter().enumerate() {
        edges.push(canonical_edge(b.times[e], map_b[p], map_b[q], b.omegas[e]));
    }
    edges.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));
    let (ni, nj) = (map_a[i], map_b[j]);
    edges.push(canonical_edge(t, ni, nj, omega));

    let mut paths: Vec<Vec<Breakpoint<D>>> = members.into_iter().map(|m| m.1).collect();
    let zi = unwrapped_at(&paths[ni], t);
    let zj = unwrapped_at(&paths[nj], t);
    let (vi, vj) = scatter(&zi.v, &zj.v, &omega);
    paths[ni].push(Breakpoint { t, x: zi.x, v: vi });
    paths[nj].push(Breakpoint { t, x: zi.x, v: vj });

    let ids = {
        let mut ids: Vec<usize> = a.ids.iter().chain(&b.ids).copied().collect();
        ids.sort_unstable();
        ids
    };
    Ok(LimitCluster {
        tree: OrderedTree::new(ids.len(), edges.iter().map(|e| e.1).collect()),
        times: edges.iter().map(|e| e.0).collect(),
        omegas: edges.iter().map(|e| e.2).collect(),
        ids,
        paths,
    })
}

fn canonical_edge<const D: usize>(t: f64, p: usize, q: usize, omega: Vector<D>) -> (f64, (usize, usize), Vector<D>) {
    if p < q {
        (t, (p, q), omega)
    } else {
        (t, (q, p), vector::scale(-1.0, &omega))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoagulationOptions {
    /// Computational particle number `M`.
    pub particles: usize,
    /// Mollification cell side.
    pub cell_size: f64,
    pub dt: f64,
    pub horizon: f64,
    pub output_times: Vec<f64>,
    /// Multiplies the merge kernel; 0 gives free transport.
    pub kernel_scale: f64,
    /// Keep the decorated clusters (costly for large `M`).
    pub record_clusters: bool,
}

impl Default for CoagulationOptions {
    fn default() -> Self {
        Self {
            particles: 100_000,
            cell_size: 0.05,
            dt: 0.005,
            horizon: 0.2,
            output_times: vec![0.0, 0.1, 0.2],
            kernel_scale: 1.0,
            record_clusters: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoagulationSnapshot {
    pub t: f64,
    /// Clusters by size (with energy sums), normalized by `M`.
    pub size_law: Histogram,
    pub largest_fraction: f64,
    pub mean_size: f64,
    pub n_clusters: usize,
    pub merges: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoagulationRun<const D: usize> {
    pub snapshots: Vec<CoagulationSnapshot>,
    pub merges: u64,
    pub candidates: u64,
    pub majorant_breaches: u64,
    /// Final clusters as `(smallest id, size, energy)`, by smallest id.
    pub final_clusters: Vec<(usize, usize, f64)>,
    /// Final decorated clusters when recorded, ordered by smallest id.
    pub clusters: Option<Vec<LimitCluster<D>>>,
}

#[derive(Clone)]
struct State<const D: usize> {
    /// Particle states at `since[p]`.
    z: Vec<PhasePoint<D>>,
    since: Vec<f64>,
    uf: UnionFind,
    clusters: HashMap<usize, LimitCluster<D>>,
    merges: u64,
    candidates: u64,
}

impl<const D: usize> State<D> {
    fn advance(&mut self, p: usize, t: f64) {
        let dt = t - self.since[p];
        if dt != 0.0 {
            self.z[p].x = vector::axpy(&self.z[p].x, dt, &self.z[p].v);
            self.since[p] = t;
        }
    }

    fn snapshot(&mut self, t: f64) -> CoagulationSnapshot {
        let m = self.z.len();
        let mut energy: HashMap<usize, (usize, f64)> = HashMap::new();
        for p in 0..m {
            let r = self.uf.find(p);
            let e = energy.entry(r).or_insert((0, 0.0));
            e.0 += 1;
            e.1 += 0.5 * vector::norm2(&self.z[p].v);
        }
        let mut roots: Vec<&usize> = energy.keys().collect();
        roots.sort_unstable();
        let mut law = Histogram::new();
        let mut largest = 0;
        for r in roots {
            let (s, e) = energy[r];
            law.add(s, e);
            largest = largest.max(s);
        }
        law.normalization = m as f64;
        CoagulationSnapshot {
            t,
            largest_fraction: largest as f64 / m as f64,
            mean_size: m as f64 / energy.len() as f64,
            n_clusters: energy.len(),
            size_law: law,
            merges: self.merges,
        }
    }
}

struct Candidate {
    tau: f64,
    p: usize,
    q: usize,
}

fn step<const D: usize>(
    st: &mut State<D>,
    t0: f64,
    opts: &CoagulationOptions,
    nc: usize,
    majorant: f64,
    rng: &mut StreamRng,
) -> Result<()> {
    let dt = opts.dt;
    let m = st.z.len() as f64;
    let vol = opts.cell_size.powi(D as i32);
    let rate = opts.kernel_scale * kappa(D) * majorant / (m * vol);
    let mut cands = Vec::new();
    if rate > 0.0 {
        let (start, order) = cell_lists(st.z.iter().map(|z| wrap(&z.x)), nc);
        for c in 0..start.len() - 1 {
            let members = &order[start[c]..start[c + 1]];
            let n = members.len();
            if n < 2 {
                continue;
            }
            let lambda = (n * (n - 1) / 2) as f64 * rate * dt;
            let k = Poisson::new(lambda).map(|p| p.sample(rng) as u64).unwrap_or(0);
            for _ in 0..k {
                let a = rng.random_range(0..n);
                let mut b = rng.random_range(0..n - 1);
                if b >= a {
                    b += 1;
                }
                cands.push(Candidate {
                    tau: t0 + dt * rng.random::<f64>(),
                    p: members[a],
                    q: members[b],
                });
            }
        }
    }
    cands.sort_by(|x, y| x.tau.total_cmp(&y.tau));
    for c in &cands {
        st.candidates += 1;
        let (rp, rq) = (st.uf.find(c.p), st.uf.find(c.q));
        if rp == rq {
            continue;
        }
        let w = vector::sub(&st.z[c.p].v, &st.z[c.q].v);
        let g = vector::norm(&w);
        if g > majorant {
            return Err(Error::MajorantBreach { speed: g, majorant });
        }
        if rng.random::<f64>() * majorant >= g || g == 0.0 {
            continue;
        }
        let omega = sample_cross_section_direction(&vector::scale(-1.0 / g, &w), rng);
        st.advance(c.p, c.tau);
        st.advance(c.q, c.tau);
        let (vp, vq) = scatter(&st.z[c.p].v, &st.z[c.q].v, &omega);
        st.z[c.p].v = vp;
        st.z[c.q].v = vq;
        if opts.record_clusters {
            let a = st.clusters.remove(&rp).expect("cluster of root");
            let b = st.clusters.remove(&rq).expect("cluster of root");
            let i = a.local_index(c.p).expect("member");
            let j = b.local_index(c.q).expect("member");
            let merged = merge_clusters(&a, &b, i, j, c.tau, omega)?;
            st.uf.union(rp, rq);
            st.clusters.insert(st.uf.find(rp), merged);
        } else {
            st.uf.union(rp, rq);
        }
        st.merges += 1;
    }
    let t1 = t0 + dt;
    for p in 0..st.z.len() {
        st.advance(p, t1);
    }
    Ok(())
}

/// Stochastic coagulation of limiting cluster paths, started from `M`
/// singletons drawn i.i.d. from `f0`.
///
/// Each step freezes the cell occupancy at the step start. In every cell,
/// candidate pairs arrive as a Poisson process in time with the majorant
/// rate `kappa_d g_max / (M dx^d)` per pair; a candidate between different
/// clusters merges them with probability `|v_p - v_q| / g_max`, at its own
/// time, with `omega` drawn proportional to the cross section.
pub fn coagulation_run<const D: usize>(
    model: &InitialModel,
    opts: &CoagulationOptions,
    seed: u64,
) -> Result<CoagulationRun<D>> {
    let nc = cells_per_dim(opts.cell_size)?;
    if opts.particles == 0 || !(opts.dt > 0.0) || opts.kernel_scale < 0.0 {
        return Err(Error::InvalidParameter(
            "coagulation needs particles, a positive step and a nonnegative kernel".into(),
        ));
    }
    let mut rng = stream(seed, Domain::Coagulation, 0);
    let z: Vec<PhasePoint<D>> = (0..opts.particles).map(|_| model.sample(&mut rng)).collect();
    let clusters = if opts.record_clusters {
        z.iter().enumerate().map(|(p, &zp)| (p, LimitCluster::singleton(p, zp))).collect()
    } else {
        HashMap::new()
    };
    let vmax = z.iter().map(|p| vector::norm(&p.v)).fold(0.0, f64::max);
    let mut majorant = (2.0 * vmax).max(f64::MIN_POSITIVE);
    let mut st = State {
        since: vec![0.0; z.len()],
        z,
        uf: UnionFind::new(opts.particles),
        clusters,
        merges: 0,
        candidates: 0,
    };
    let n_steps = (opts.horizon / opts.dt).round() as usize;
    let mut outputs: Vec<usize> = opts.output_times.iter().map(|t| (t / opts.dt).round() as usize).collect();
    outputs.sort_unstable();
    outputs.dedup();
    let mut snapshots = Vec::new();
    let mut next = 0;
    let mut breaches = 0;
    for s in 0..=n_steps {
        let t0 = s as f64 * opts.dt;
        while next < outputs.len() && outputs[next] == s {
            snapshots.push(st.snapshot(t0));
            next += 1;
        }
        if s == n_steps {
            break;
        }
        let saved = st.clone();
        loop {
            match step(&mut st, t0, opts, nc, majorant, &mut rng) {
                Ok(()) => break,
                Err(Error::MajorantBreach { .. }) => {
                    breaches += 1;
                    majorant *= 2.0;
                    st = saved.clone();
                }
                Err(e) => return Err(e),
            }
        }
    }
    let final_clusters = st
        .uf
        .components()
        .into_iter()
        .map(|m| (m[0], m.len(), m.iter().map(|&p| 0.5 * vector::norm2(&st.z[p].v)).sum()))
        .collect();
    let clusters = opts.record_clusters.then(|| {
        let mut cs: Vec<LimitCluster<D>> = st.clusters.into_values().collect();
        cs.sort_by_key(|c| c.ids[0]);
        cs
    });
    Ok(CoagulationRun {
        snapshots,
        merges: st.merges,
        candidates: st.candidates,
        majorant_breaches: breaches,
        final_clusters,
        clusters,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single(id: usize, x: [f64; 2], v: [f64; 2]) -> LimitCluster<2> {
        LimitCluster::singleton(id, PhasePoint { x, v })
    }

    #[test]
    fn two_singletons_merge() {
        let a = single(0, [0.1, 0.5], [1.0, 0.0]);
        let b = single(1, [0.3, 0.5], [0.0, 0.0]);
        let m = merge_clusters(&a, &b, 0, 0, 0.2, [-1.0, 0.0]).unwrap();
        assert_eq!(m.size(), 2);
        assert_eq!(m.tree.edges, vec![(0, 1)]);
        assert_eq!(m.times, vec![0.2]);
        assert!(m.coincidence_defect() < 1e-12);
        assert!((m.energy() - 0.5).abs() < 1e-15);
        // centre of mass at time zero is kept
        assert!(crate::geometry::torus_distance(&m.root(), &[0.2, 0.5]) < 1e-12);
        let v = m.member_state(0, 0.3).v;
        assert!(vector::norm(&v) < 1e-15);
    }

    #[test]
    fn merge_is_symmetric() {
        let a = single(3, [0.1, 0.95], [1.0, 0.2]);
        let b = single(1, [0.2, 0.05], [-0.3, 0.4]);
        let c = single(2, [0.9, 0.9], [0.1, -0.7]);
        let ab = merge_clusters(&a, &b, 0, 0, 0.1, [0.6, 0.8]).unwrap();
        let om = [0.0, 1.0];
        let x = merge_clusters(&ab, &c, 1, 0, 0.3, om).unwrap();
        let y = merge_clusters(&c, &ab, 0, 1, 0.3, [-0.0, -1.0]).unwrap();
        assert_eq!(x.ids, y.ids);
        assert_eq!(x.tree, y.tree);
        assert_eq!(x.times, y.times);
        for (p, q) in x.omegas.iter().zip(&y.omegas) {
            assert!(vector::norm(&vector::sub(p, q)) < 1e-15);
        }
        for (p, q) in x.trajectories().iter().zip(y.trajectories()) {
            for t in [0.0, 0.1, 0.2, 0.3, 0.5] {
                assert!(crate::geometry::torus_distance(&p.position_at(t), &q.position_at(t)) < 1e-12);
                assert_eq!(p.state_at(t).v, q.state_at(t).v);
            }
        }
        assert!(x.coincidence_defect() < 1e-12);
        assert!((x.energy() - (a.energy() + b.energy() + c.energy())).abs() < 1e-12);
    }

    #[test]
    fn time_order_is_checked() {
        let a = single(0, [0.1, 0.5], [1.0, 0.0]);
        let b = single(1, [0.3, 0.5], [0.0, 0.0]);
        let c = single(2, [0.7, 0.5], [0.0, 0.0]);
        let ab = merge_clusters(&a, &b, 0, 0, 0.2, [-1.0, 0.0]).unwrap();
        assert!(matches!(
            merge_clusters(&ab, &c, 0, 0, 0.1, [1.0, 0.0]),
            Err(Error::TimeOrderViolation { .. })
        ));
    }
}
