use crate::error::{Error, Result};
use crate::union_find::UnionFind;

/// Largest vertex count accepted by [`phi`] and [`spanning_tree_count`].
pub const PHI_MAX_VERTICES: usize = 16;

/// Undirected simple graph on `k <= 32` vertices as adjacency bitmasks.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SimpleGraph {
    k: usize,
    adj: Vec<u32>,
}

impl SimpleGraph {
    pub fn new(k: usize) -> Self {
        assert!(k <= 32, "SimpleGraph holds at most 32 vertices");
        Self { k, adj: vec![0; k] }
    }

    pub fn from_edges(k: usize, edges: &[(usize, usize)]) -> Self {
        let mut g = Self::new(k);
        for &(a, b) in edges {
            g.add_edge(a, b);
        }
        g
    }

    pub fn complete(k: usize) -> Self {
        let mut g = Self::new(k);
        for a in 0..k {
            for b in 0..a {
                g.add_edge(a, b);
            }
        }
        g
    }

    /// Inserts the edge `{a, b}`; repeated insertions are idempotent.
    pub fn add_edge(&mut self, a: usize, b: usize) {
        assert!(a != b, "self-loop {a}");
        assert!(a < self.k && b < self.k);
        self.adj[a] |= 1 << b;
        self.adj[b] |= 1 << a;
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.adj[a] >> b & 1 == 1
    }

    pub fn neighbors_mask(&self, a: usize) -> u32 {
        self.adj[a]
    }

    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut e = Vec::new();
        for a in 0..self.k {
            for b in a + 1..self.k {
                if self.has_edge(a, b) {
                    e.push((a, b));
                }
            }
        }
        e
    }

    pub fn n_edges(&self) -> usize {
        self.adj.iter().map(|m| m.count_ones() as usize).sum::<usize>() / 2
    }

    pub fn is_connected(&self) -> bool {
        self.k <= 1 || reach(&self.adj, 1, full_mask(self.k)) == full_mask(self.k)
    }

    pub fn is_tree(&self) -> bool {
        self.n_edges() + 1 == self.k && self.is_connected()
    }
}

#[inline]
fn full_mask(k: usize) -> u32 {
    if k == 32 {
        u32::MAX
    } else {
        (1u32 << k) - 1
    }
}

/// Vertices reachable from `seed` inside `within`.
fn reach(adj: &[u32], seed: u32, within: u32) -> u32 {
    let mut seen = seed & within;
    let mut frontier = seen;
    while frontier != 0 {
        let v = frontier.trailing_zeros() as usize;
        frontier &= frontier - 1;
        let new = adj[v] & within & !seen;
        seen |= new;
        frontier |= new;
    }
    seen
}

/// Evaluation strategy for [`phi_with`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhiMode {
    /// Recursion over vertex subsets, `O(3^k)`. Uses that a spanning subgraph
    /// splits uniquely into the component of the smallest vertex and the
    /// rest, and that the signed sum over all spanning subgraphs of an
    /// induced graph vanishes unless it has no edges.
    VertexSubsets,
    /// Direct sum over subsets of the present edges, `O(2^|E|)`; `|E| <= 30`.
    EdgeSubsets,
    /// Sum over every labeled graph on `k` vertices that is a connected
    /// subgraph of `g`; `k <= 6`.
    LabeledGraphs,
}

/// `phi(g) = sum over connected spanning subgraphs C of (-1)^{|C|}`.
pub fn phi(g: &SimpleGraph) -> Result<i64> {
    phi_with(g, PhiMode::VertexSubsets)
}

pub fn phi_with(g: &SimpleGraph, mode: PhiMode) -> Result<i64> {
    let k = g.k;
    match mode {
        PhiMode::VertexSubsets => {
            if k > PHI_MAX_VERTICES {
                return Err(Error::SizeLimit {
                    what: "phi vertex count",
                    value: k,
                    limit: PHI_MAX_VERTICES,
                });
            }
            Ok(phi_vertex_subsets(g))
        }
        PhiMode::EdgeSubsets => {
            let m = g.n_edges();
            if m > 30 {
                return Err(Error::SizeLimit {
                    what: "phi edge count",
                    value: m,
                    limit: 30,
                });
            }
            Ok(phi_edge_subsets(g))
        }
        PhiMode::LabeledGraphs => {
            if k > 6 {
                return Err(Error::SizeLimit {
                    what: "phi cross-check vertex count",
                    value: k,
                    limit: 6,
                });
            }
            Ok(phi_labeled(g))
        }
    }
}

fn phi_vertex_subsets(g: &SimpleGraph) -> i64 {
    let k = g.k;
    if k == 0 {
        return 0;
    }
    if !g.is_connected() {
        return 0;
    }
    let n = 1usize << k;
    // independent[s]: s spans no edge of g
    let mut independent = vec![false; n];
    independent[0] = true;
    for s in 1..n {
        let v = s.trailing_zeros() as usize;
        let rest = s & (s - 1);
        independent[s] = independent[rest] && (g.adj[v] as usize & rest) == 0;
    }
    let mut c = vec![0i64; n];
    for s in 1..n {
        let low = s & s.wrapping_neg();
        let rest = s ^ low;
        let mut acc = independent[s] as i64;
        // proper subsets u of rest: t = low | u, s \ t = rest ^ u nonempty
        let mut u = rest;
        while u != 0 {
            u = (u - 1) & rest;
            if independent[rest ^ u] {
                acc -= c[low | u];
            }
        }
        c[s] = acc;
    }
    c[n - 1]
}

fn phi_edge_subsets(g: &SimpleGraph) -> i64 {
    let k = g.k;
    if k == 0 {
        return 0;
    }
    let edges = g.edges();
    let m = edges.len();
    let all = full_mask(k);
    let mut total = 0i64;
    let mut adj = vec![0u32; k];
    for mask in 0u64..(1u64 << m) {
        adj.iter_mut().for_each(|a| *a = 0);
        for (e, &(a, b)) in edges.iter().enumerate() {
            if mask >> e & 1 == 1 {
                adj[a] |= 1 << b;
                adj[b] |= 1 << a;
            }
        }
        if reach(&adj, 1, all) == all {
            total += if mask.count_ones() % 2 == 0 { 1 } else { -1 };
        }
    }
    total
}

fn phi_labeled(g: &SimpleGraph) -> i64 {
    let k = g.k;
    if k == 0 {
        return 0;
    }
    let pairs: Vec<(usize, usize)> = (0..k).flat_map(|a| (a + 1..k).map(move |b| (a, b))).collect();
    let all = full_mask(k);
    let mut total = 0i64;
    let mut adj = vec![0u32; k];
    for mask in 0u64..(1u64 << pairs.len()) {
        adj.iter_mut().for_each(|a| *a = 0);
        let mut inside = true;
        for (e, &(a, b)) in pairs.iter().enumerate() {
            if mask >> e & 1 == 1 {
                if !g.has_edge(a, b) {
                    inside = false;
                    break;
                }
                adj[a] |= 1 << b;
                adj[b] |= 1 << a;
            }
        }
        if inside && reach(&adj, 1, all) == all {
            total += if mask.count_ones() % 2 == 0 { 1 } else { -1 };
        }
    }
    total
}

/// Spanning-tree count by the matrix-tree theorem (fraction-free Gaussian
/// elimination on a Laplacian cofactor).
pub fn spanning_tree_count(g: &SimpleGraph) -> Result<u64> {
    let k = g.k;
    if k > PHI_MAX_VERTICES {
        return Err(Error::SizeLimit {
            what: "spanning tree vertex count",
            value: k,
            limit: PHI_MAX_VERTICES,
        });
    }
    if k <= 1 {
        return Ok(k as u64);
    }
    let n = k - 1;
    let mut m = vec![vec![0i128; n]; n];
    for a in 0..n {
        m[a][a] = g.adj[a].count_ones() as i128;
        for b in 0..n {
            if a != b && g.has_edge(a, b) {
                m[a][b] = -1;
            }
        }
    }
    // Bareiss
    let mut prev = 1i128;
    let mut sign = 1i128;
    for p in 0..n {
        if m[p][p] == 0 {
            let Some(r) = (p + 1..n).find(|&r| m[r][p] != 0) else {
                return Ok(0);
            };
            m.swap(p, r);
            sign = -sign;
        }
        for r in p + 1..n {
            for c in p + 1..n {
                m[r][c] = (m[r][c] * m[p][p] - m[r][p] * m[p][c]) / prev;
            }
        }
        prev = m[p][p];
    }
    let det = sign * m[n - 1][n - 1];
    Ok(det as u64)
}

/// Spanning-tree count by enumerating `(k-1)`-edge subsets; `|E| <= 30`.
pub fn spanning_tree_count_enumerated(g: &SimpleGraph) -> Result<u64> {
    let edges = g.edges();
    if edges.len() > 30 {
        return Err(Error::SizeLimit {
            what: "enumeration edge count",
            value: edges.len(),
            limit: 30,
        });
    }
    let k = g.k;
    if k <= 1 {
        return Ok(k as u64);
    }
    let mut count = 0;
    for mask in 0u32..(1u32 << edges.len()) {
        if mask.count_ones() as usize != k - 1 {
            continue;
        }
        let mut uf = UnionFind::new(k);
        let acyclic = edges
            .iter()
            .enumerate()
            .filter(|(e, _)| mask >> e & 1 == 1)
            .all(|(_, &(a, b))| uf.union(a, b));
        if acyclic {
            count += 1;
        }
    }
    Ok(count)
}

/// Number of labeled trees on `k` vertices with the given degrees,
/// `(k-2)! / prod (d_i - 1)!`.
pub fn count_trees_with_degrees(k: usize, degrees: &[usize]) -> Result<u64> {
    if degrees.len() != k {
        return Err(Error::DegreeMismatch(format!(
            "{} degrees given for {k} vertices",
            degrees.len()
        )));
    }
    if k == 1 {
        return if degrees[0] == 0 {
            Ok(1)
        } else {
            Err(Error::DegreeMismatch("a single vertex has degree 0".into()))
        };
    }
    if k == 0 || degrees.contains(&0) || degrees.iter().sum::<usize>() != 2 * k - 2 {
        return Err(Error::DegreeMismatch(format!(
            "degrees {degrees:?} violate sum = 2k - 2 with every degree >= 1"
        )));
    }
    // multinomial (k-2)! / prod (d_i - 1)! built as a product of binomials
    let mut total: u128 = 1;
    let mut placed = 0u128;
    for &d in degrees {
        let r = (d - 1) as u128;
        for s in 1..=r {
            total = total * (placed + s) / s;
        }
        placed += r;
    }
    u64::try_from(total).map_err(|_| Error::SizeLimit {
        what: "tree count",
        value: k,
        limit: 20,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn phi_small_cases() {
        assert_eq!(phi(&SimpleGraph::new(1)).unwrap(), 1);
        assert_eq!(phi(&SimpleGraph::complete(2)).unwrap(), -1);
        assert_eq!(phi(&SimpleGraph::complete(3)).unwrap(), 2);
        assert_eq!(phi(&SimpleGraph::complete(4)).unwrap(), -6);
        assert_eq!(phi(&SimpleGraph::new(3)).unwrap(), 0);
        assert_eq!(phi(&SimpleGraph::from_edges(3, &[(0, 1)])).unwrap(), 0);
    }

    #[test]
    fn phi_size_limit() {
        assert!(matches!(phi(&SimpleGraph::new(17)), Err(Error::SizeLimit { .. })));
        assert!(matches!(
            phi_with(&SimpleGraph::complete(7), PhiMode::LabeledGraphs),
            Err(Error::SizeLimit { .. })
        ));
    }

    #[test]
    fn spanning_tree_examples() {
        let path = SimpleGraph::from_edges(4, &[(0, 1), (1, 2), (2, 3)]);
        assert_eq!(spanning_tree_count(&path).unwrap(), 1);
        assert_eq!(spanning_tree_count(&SimpleGraph::complete(3)).unwrap(), 3);
        assert_eq!(spanning_tree_count(&SimpleGraph::complete(5)).unwrap(), 125);
        assert_eq!(spanning_tree_count(&SimpleGraph::new(3)).unwrap(), 0);
    }

    #[test]
    fn degree_counts() {
        assert_eq!(count_trees_with_degrees(3, &[2, 1, 1]).unwrap(), 1);
        assert_eq!(count_trees_with_degrees(4, &[3, 1, 1, 1]).unwrap(), 1);
        assert_eq!(count_trees_with_degrees(4, &[2, 2, 1, 1]).unwrap(), 2);
        assert!(matches!(
            count_trees_with_degrees(4, &[2, 2, 2, 1]),
            Err(Error::DegreeMismatch(_))
        ));
        assert!(matches!(
            count_trees_with_degrees(3, &[2, 2, 0]),
            Err(Error::DegreeMismatch(_))
        ));
    }
}
