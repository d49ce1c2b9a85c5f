//! Interaction graphs of runs, their decomposition into cluster paths, and
//! overlaps between independently produced cluster paths.

use crate::combinatorics::{OrderedTree, SimpleGraph};
use crate::geometry::{first_contact_time, torus_distance};
use crate::trajectory::{CollisionRecord, Trajectory};
use crate::union_find::UnionFind;
use crate::vector::{self, Vector};

/// One collision as a graph edge.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GraphEdge<const D: usize> {
    pub t: f64,
    pub i: usize,
    pub j: usize,
    pub omega: Vector<D>,
}

/// Time-ordered collision multigraph of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct InteractionGraph<const D: usize> {
    pub n: usize,
    pub edges: Vec<GraphEdge<D>>,
}

impl<const D: usize> InteractionGraph<D> {
    pub fn from_log(n: usize, log: &[CollisionRecord<D>]) -> Self {
        Self {
            n,
            edges: log
                .iter()
                .map(|r| GraphEdge {
                    t: r.t,
                    i: r.i,
                    j: r.j,
                    omega: r.omega,
                })
                .collect(),
        }
    }
}

/// Greedy time-ordered clustering tree of a connected edge list.
#[derive(Debug, Clone, PartialEq)]
pub struct Classification<const D: usize> {
    pub is_minimal: bool,
    /// Over local member indices, in collision order.
    pub tree: OrderedTree,
    pub tree_edges: Vec<GraphEdge<D>>,
    pub recollision_edges: Vec<GraphEdge<D>>,
}

/// A connected component of the interaction graph with its paths.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterPath<const D: usize> {
    pub id: usize,
    /// Sorted particle ids.
    pub members: Vec<usize>,
    /// Collisions among members in time order (particle ids).
    pub edges: Vec<GraphEdge<D>>,
    /// One trajectory per member, in `members` order.
    pub trajectories: Vec<Trajectory<D>>,
    pub classification: Classification<D>,
    /// `1/2 sum |v_i|^2` at time zero.
    pub energy: f64,
}

impl<const D: usize> ClusterPath<D> {
    pub fn size(&self) -> usize {
        self.members.len()
    }

    pub fn is_minimal(&self) -> bool {
        self.classification.is_minimal
    }

    pub fn n_recollisions(&self) -> usize {
        self.classification.recollision_edges.len()
    }

    /// Kinetic energy at time `t`.
    pub fn energy_at(&self, t: f64) -> f64 {
        self.trajectories.iter().map(|tr| 0.5 * vector::norm2(&tr.state_at(t).v)).sum()
    }

    /// Centre of mass at time zero, taken on the torus relative to the first
    /// member (minimal images).
    pub fn root(&self) -> Vector<D> {
        centre_of_mass(&self.trajectories.iter().map(|t| t.initial().x).collect::<Vec<_>>())
    }
}

impl<const D: usize> AsRef<[Trajectory<D>]> for ClusterPath<D> {
    fn as_ref(&self) -> &[Trajectory<D>] {
        &self.trajectories
    }
}

/// Torus centre of mass of nearby points: average of minimal-image offsets
/// from the first point.
pub fn centre_of_mass<const D: usize>(xs: &[Vector<D>]) -> Vector<D> {
    if xs.is_empty() {
        return [0.0; D];
    }
    let base = xs[0];
    let mut acc = [0.0; D];
    for x in xs {
        acc = vector::add(&acc, &crate::geometry::torus_displacement(&base, x));
    }
    crate::geometry::wrap(&vector::axpy(&base, 1.0 / xs.len() as f64, &acc))
}

/// Greedy clustering tree: edges in time order, skipping those that would
/// close a cycle (these, and repeated pairs, are recollisions).
pub fn classify_edges<const D: usize>(members: &[usize], edges: &[GraphEdge<D>]) -> Classification<D> {
    let local = |p: usize| members.binary_search(&p).expect("edge endpoint outside members");
    let mut uf = UnionFind::new(members.len());
    let mut tree = Vec::new();
    let mut tree_edges = Vec::new();
    let mut recollision_edges = Vec::new();
    for e in edges {
        let (a, b) = (local(e.i), local(e.j));
        if uf.union(a, b) {
            tree.push((a.min(b), a.max(b)));
            tree_edges.push(*e);
        } else {
            recollision_edges.push(*e);
        }
    }
    Classification {
        is_minimal: recollision_edges.is_empty() && tree.len() + 1 == members.len(),
        tree: OrderedTree::new(members.len(), tree),
        tree_edges,
        recollision_edges,
    }
}

/// `(is_minimal, clustering tree)` of a path.
pub fn classify_minimal<const D: usize>(path: &ClusterPath<D>) -> (bool, OrderedTree) {
    let c = classify_edges(&path.members, &path.edges);
    (c.is_minimal, c.tree)
}

/// Connected components of the interaction graph, each with its member
/// trajectories. Isolated particles are singleton paths. Paths are ordered
/// by smallest member.
pub fn partition_cluster_paths<const D: usize>(
    graph: &InteractionGraph<D>,
    trajectories: &[Trajectory<D>],
) -> Vec<ClusterPath<D>> {
    assert_eq!(graph.n, trajectories.len());
    let mut uf = UnionFind::new(graph.n);
    for e in &graph.edges {
        uf.union(e.i, e.j);
    }
    let comps = uf.components();
    let mut slot = vec![0usize; graph.n];
    for (c, members) in comps.iter().enumerate() {
        for &m in members {
            slot[m] = c;
        }
    }
    let mut edges: Vec<Vec<GraphEdge<D>>> = vec![Vec::new(); comps.len()];
    for e in &graph.edges {
        edges[slot[e.i]].push(*e);
    }
    comps
        .into_iter()
        .zip(edges)
        .enumerate()
        .map(|(id, (members, edges))| {
            let trajectories: Vec<Trajectory<D>> = members.iter().map(|&m| trajectories[m].clone()).collect();
            let energy = trajectories.iter().map(|t| 0.5 * vector::norm2(&t.initial().v)).sum();
            let classification = classify_edges(&members, &edges);
            ClusterPath {
                id,
                members,
                edges,
                trajectories,
                classification,
                energy,
            }
        })
        .collect()
}

/// Checks that `paths` partition `0..n`, that every logged collision stays
/// inside one path, and that each path's edges connect its members.
pub fn check_partition<const D: usize>(n: usize, log: &[CollisionRecord<D>], paths: &[ClusterPath<D>]) -> Result<(), String> {
    let mut owner = vec![usize::MAX; n];
    for (p, path) in paths.iter().enumerate() {
        for &m in &path.members {
            if m >= n {
                return Err(format!("member {m} out of range"));
            }
            if owner[m] != usize::MAX {
                return Err(format!("particle {m} in two paths"));
            }
            owner[m] = p;
        }
    }
    if let Some(m) = owner.iter().position(|&o| o == usize::MAX) {
        return Err(format!("particle {m} in no path"));
    }
    for r in log {
        if owner[r.i] != owner[r.j] {
            return Err(format!("collision {}-{} at {} crosses paths", r.i, r.j, r.t));
        }
    }
    for path in paths {
        if path.classification.tree.edges.len() + 1 != path.size() {
            return Err(format!("path {} is not connected", path.id));
        }
    }
    Ok(())
}

/// Overlap between two paths: earliest contact over member pairs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OverlapEdge<const D: usize> {
    pub tau: f64,
    pub paths: (usize, usize),
    /// `particle_id`s of the first contacting members.
    pub particles: (usize, usize),
    pub omega: Vector<D>,
    /// Contact already holds at the window start.
    pub at_start: bool,
    /// Number of member pairs that come into contact.
    pub contacts: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OverlapGraph<const D: usize> {
    pub k: usize,
    pub edges: Vec<OverlapEdge<D>>,
}

impl<const D: usize> OverlapGraph<D> {
    pub fn simple_graph(&self) -> SimpleGraph {
        let mut g = SimpleGraph::new(self.k);
        for e in &self.edges {
            g.add_edge(e.paths.0, e.paths.1);
        }
        g
    }
}

struct Ball<const D: usize> {
    centre: Vector<D>,
    radius: f64,
}

fn bounding_ball<const D: usize>(paths: &[Trajectory<D>], window: (f64, f64)) -> Ball<D> {
    let centre = paths[0].state_at(window.0).x;
    let mut radius: f64 = 0.0;
    for tr in paths {
        let d = torus_distance(&centre, &tr.state_at(window.0).x);
        radius = radius.max(d + tr.max_speed() * (window.1 - window.0));
    }
    Ball { centre, radius }
}

/// Overlap graph of `paths` over `window`.
pub fn detect_overlaps<const D: usize, P: AsRef<[Trajectory<D>]>>(
    paths: &[P],
    eps: f64,
    window: (f64, f64),
) -> OverlapGraph<D> {
    let balls: Vec<Ball<D>> = paths.iter().map(|p| bounding_ball(p.as_ref(), window)).collect();
    let mut edges = Vec::new();
    for a in 0..paths.len() {
        for b in a + 1..paths.len() {
            let reach = balls[a].radius + balls[b].radius + eps;
            if torus_distance(&balls[a].centre, &balls[b].centre) > reach * (1.0 + 1e-12) {
                continue;
            }
            let mut best: Option<OverlapEdge<D>> = None;
            let mut contacts = 0;
            for ti in paths[a].as_ref() {
                for tj in paths[b].as_ref() {
                    if let Some(c) = first_contact_time(ti, tj, eps, window) {
                        contacts += 1;
                        if best.is_none_or(|e| c.t < e.tau) {
                            best = Some(OverlapEdge {
                                tau: c.t,
                                paths: (a, b),
                                particles: (ti.particle_id, tj.particle_id),
                                omega: c.omega,
                                at_start: false,
                                contacts: 0,
                            });
                        }
                    }
                }
            }
            if let Some(mut e) = best {
                e.contacts = contacts;
                e.at_start = e.tau <= window.0;
                edges.push(e);
            }
        }
    }
    OverlapGraph { k: paths.len(), edges }
}

/// Connectivity and minimality of an overlap graph.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregateStatus {
    pub connected: bool,
    pub is_min_aggregate: bool,
    /// Path-level tree ordered by contact time, when minimal.
    pub overlap_tree: Option<OrderedTree>,
}

impl AggregateStatus {
    /// `(-1)^(k-1)` on minimal aggregates.
    pub fn phi_min(&self, k: usize) -> Option<i64> {
        self.is_min_aggregate.then_some(if k % 2 == 1 { 1 } else { -1 })
    }
}

/// A minimal aggregate is connected with exactly `k - 1` overlapping path
/// pairs, each touching through a single member pair, none at time zero.
pub fn aggregate_connectivity<const D: usize>(og: &OverlapGraph<D>) -> AggregateStatus {
    let mut uf = UnionFind::new(og.k);
    for e in &og.edges {
        uf.union(e.paths.0, e.paths.1);
    }
    let connected = og.k <= 1 || uf.set_size(0) == og.k;
    let minimal = connected
        && og.edges.len() + 1 == og.k.max(1)
        && og.edges.iter().all(|e| e.contacts == 1 && !e.at_start);
    let overlap_tree = minimal.then(|| {
        let mut es = og.edges.clone();
        es.sort_by(|x, y| x.tau.total_cmp(&y.tau).then(x.paths.cmp(&y.paths)));
        OrderedTree::new(og.k, es.iter().map(|e| e.paths).collect())
    });
    AggregateStatus {
        connected,
        is_min_aggregate: minimal,
        overlap_tree,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trajectory::Breakpoint;

    fn edge(t: f64, i: usize, j: usize) -> GraphEdge<2> {
        GraphEdge {
            t,
            i,
            j,
            omega: [1.0, 0.0],
        }
    }

    fn still(id: usize, x: [f64; 2]) -> Trajectory<2> {
        let mut t = Trajectory::new(id, Breakpoint { t: 0.0, x, v: [0.0, 0.0] });
        t.push(Breakpoint { t: 1.0, x, v: [0.0, 0.0] });
        t
    }

    fn graph(n: usize, pairs: &[(usize, usize)]) -> (InteractionGraph<2>, Vec<Trajectory<2>>) {
        let edges = pairs.iter().enumerate().map(|(k, &(i, j))| edge(0.1 * (k + 1) as f64, i, j)).collect();
        let trs = (0..n).map(|i| still(i, [0.1 * i as f64, 0.5])).collect();
        (InteractionGraph { n, edges }, trs)
    }

    #[test]
    fn partition_examples() {
        let (g, t) = graph(4, &[(0, 1), (1, 2)]);
        let p = partition_cluster_paths(&g, &t);
        assert_eq!(p.iter().map(|c| c.members.clone()).collect::<Vec<_>>(), vec![vec![0, 1, 2], vec![3]]);
        let (g, t) = graph(3, &[]);
        assert_eq!(partition_cluster_paths(&g, &t).len(), 3);
        let (g, t) = graph(4, &[(0, 1), (2, 3), (1, 2)]);
        let p = partition_cluster_paths(&g, &t);
        assert_eq!(p.len(), 1);
        assert!(p[0].is_minimal());
    }

    #[test]
    fn classification_examples() {
        let c = classify_edges(&[0, 1, 2], &[edge(0.1, 0, 1), edge(0.2, 1, 2)]);
        assert!(c.is_minimal);
        assert_eq!(c.tree.edges, vec![(0, 1), (1, 2)]);
        let c = classify_edges(&[0, 1, 2], &[edge(0.1, 0, 1), edge(0.2, 1, 2), edge(0.3, 0, 2)]);
        assert!(!c.is_minimal);
        assert_eq!(c.tree.edges, vec![(0, 1), (1, 2)]);
        assert_eq!(c.recollision_edges.len(), 1);
        assert_eq!((c.recollision_edges[0].i, c.recollision_edges[0].j), (0, 2));
        let c = classify_edges::<2>(&[5], &[]);
        assert!(c.is_minimal && c.tree.edges.is_empty());
        // repeated pair is a recollision
        let c = classify_edges(&[0, 1], &[edge(0.1, 0, 1), edge(0.2, 0, 1)]);
        assert!(!c.is_minimal);
    }

    #[test]
    fn head_on_singletons_overlap() {
        let mut a = Trajectory::new(0, Breakpoint { t: 0.0, x: [0.2, 0.5], v: [1.0, 0.0] });
        a.push(Breakpoint { t: 1.0, x: [0.2, 0.5], v: [1.0, 0.0] });
        let b = still(1, [0.7, 0.5]);
        let og = detect_overlaps(&[vec![a], vec![b]], 0.1, (0.0, 1.0));
        assert_eq!(og.edges.len(), 1);
        assert!((og.edges[0].tau - 0.4).abs() < 1e-12);
        let st = aggregate_connectivity(&og);
        assert!(st.is_min_aggregate);
        assert_eq!(st.phi_min(2), Some(-1));
    }

    #[test]
    fn distant_paths_do_not_overlap() {
        let og = detect_overlaps(&[vec![still(0, [0.1, 0.1])], vec![still(1, [0.6, 0.1])]], 0.1, (0.0, 1.0));
        assert!(og.edges.is_empty());
        let st = aggregate_connectivity(&og);
        assert!(!st.connected);
    }

    fn og(k: usize, pairs: &[(usize, usize)]) -> OverlapGraph<2> {
        OverlapGraph {
            k,
            edges: pairs
                .iter()
                .enumerate()
                .map(|(n, &p)| OverlapEdge {
                    tau: 0.1 * (n + 1) as f64,
                    paths: p,
                    particles: p,
                    omega: [1.0, 0.0],
                    at_start: false,
                    contacts: 1,
                })
                .collect(),
        }
    }

    #[test]
    fn aggregate_examples() {
        let s = aggregate_connectivity(&og(3, &[(0, 1), (1, 2), (0, 2)]));
        assert!(s.connected && !s.is_min_aggregate);
        let s = aggregate_connectivity(&og(3, &[(0, 1), (1, 2)]));
        assert!(s.is_min_aggregate);
        assert_eq!(s.phi_min(3), Some(1));
        let mut g = og(2, &[(0, 1)]);
        g.edges[0].at_start = true;
        assert!(!aggregate_connectivity(&g).is_min_aggregate);
    }
}
