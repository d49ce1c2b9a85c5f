use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::union_find::UnionFind;

/// Largest `n` for full enumeration of ordered trees.
pub const ENUMERATION_MAX: usize = 7;

/// Spanning tree on `0..n` with edges listed in clustering order. Each edge
/// is stored as given; use [`OrderedTree::canonical`] to compare trees.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct OrderedTree {
    pub n: usize,
    pub edges: Vec<(usize, usize)>,
}

impl OrderedTree {
    pub fn new(n: usize, edges: Vec<(usize, usize)>) -> Self {
        Self { n, edges }
    }

    pub fn is_spanning_tree(&self) -> bool {
        if self.edges.len() + 1 != self.n.max(1) {
            return false;
        }
        let mut uf = UnionFind::new(self.n);
        self.edges.iter().all(|&(a, b)| a < self.n && b < self.n && a != b && uf.union(a, b))
    }

    /// Same tree with each edge written `(min, max)`.
    pub fn canonical(&self) -> OrderedTree {
        OrderedTree {
            n: self.n,
            edges: self.edges.iter().map(|&(a, b)| (a.min(b), a.max(b))).collect(),
        }
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut d = vec![0; self.n];
        for &(a, b) in &self.edges {
            d[a] += 1;
            d[b] += 1;
        }
        d
    }
}

/// Ordered tree whose edges carry a sign: +1 for a collision, -1 for an
/// overlap.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SignedOrderedTree {
    pub n: usize,
    pub edges: Vec<(usize, usize, i8)>,
}

impl SignedOrderedTree {
    pub fn unsigned(&self) -> OrderedTree {
        OrderedTree {
            n: self.n,
            edges: self.edges.iter().map(|&(a, b, _)| (a, b)).collect(),
        }
    }

    pub fn sign(&self) -> i64 {
        self.edges.iter().map(|&(_, _, s)| s as i64).product()
    }
}

/// `n^(n-2) (n-1)!`, the number of ordered trees on `n` labeled vertices.
pub fn ordered_tree_count(n: usize) -> u128 {
    if n <= 1 {
        return 1;
    }
    let cayley = (n as u128).pow(n as u32 - 2);
    (1..n as u128).fold(cayley, |acc, k| acc * k)
}

/// Edge set (as `(min, max)` pairs) of the tree with Prüfer sequence `seq`
/// on `seq.len() + 2` vertices.
pub fn prufer_decode(seq: &[usize]) -> Vec<(usize, usize)> {
    let n = seq.len() + 2;
    let mut degree = vec![1usize; n];
    for &s in seq {
        degree[s] += 1;
    }
    let mut edges = Vec::with_capacity(n - 1);
    for &s in seq {
        let leaf = (0..n).find(|&v| degree[v] == 1).expect("a leaf exists");
        edges.push((leaf.min(s), leaf.max(s)));
        degree[leaf] -= 1;
        degree[s] -= 1;
    }
    let rest: Vec<usize> = (0..n).filter(|&v| degree[v] == 1).collect();
    edges.push((rest[0], rest[1]));
    edges
}

/// All labeled trees on `n` vertices (as edge sets), via Prüfer sequences.
pub fn labeled_trees(n: usize) -> Vec<Vec<(usize, usize)>> {
    match n {
        0 | 1 => vec![Vec::new()],
        2 => vec![vec![(0, 1)]],
        _ => {
            let len = n - 2;
            let total = n.pow(len as u32);
            let mut out = Vec::with_capacity(total);
            let mut seq = vec![0usize; len];
            for _ in 0..total {
                out.push(prufer_decode(&seq));
                for s in seq.iter_mut() {
                    *s += 1;
                    if *s < n {
                        break;
                    }
                    *s = 0;
                }
            }
            out
        }
    }
}

/// Lexicographic permutations of `0..m`.
struct Permutations {
    cur: Vec<usize>,
    done: bool,
}

impl Iterator for Permutations {
    type Item = Vec<usize>;
    fn next(&mut self) -> Option<Vec<usize>> {
        if self.done {
            return None;
        }
        let out = self.cur.clone();
        let m = self.cur.len();
        match (0..m.saturating_sub(1)).rev().find(|&i| self.cur[i] < self.cur[i + 1]) {
            None => self.done = true,
            Some(i) => {
                let j = (i + 1..m).rev().find(|&j| self.cur[j] > self.cur[i]).unwrap();
                self.cur.swap(i, j);
                self.cur[i + 1..].reverse();
            }
        }
        Some(out)
    }
}

fn check_enum(n: usize) -> Result<()> {
    if n == 0 || n > ENUMERATION_MAX {
        return Err(Error::SizeLimit {
            what: "ordered tree enumeration size",
            value: n,
            limit: ENUMERATION_MAX,
        });
    }
    Ok(())
}

/// Every ordered tree on `n` vertices: each labeled tree in every edge order.
pub fn enumerate_ordered_trees(n: usize) -> Result<impl Iterator<Item = OrderedTree>> {
    check_enum(n)?;
    Ok(labeled_trees(n).into_iter().flat_map(move |tree| {
        Permutations {
            cur: (0..n - 1).collect(),
            done: false,
        }
        .map(move |p| OrderedTree {
            n,
            edges: p.iter().map(|&k| tree[k]).collect(),
        })
    }))
}

/// Every signed ordered tree on `n` vertices.
pub fn enumerate_signed_ordered_trees(n: usize) -> Result<impl Iterator<Item = SignedOrderedTree>> {
    let trees = enumerate_ordered_trees(n)?;
    Ok(trees.flat_map(move |t| {
        (0u32..1 << (n - 1)).map(move |signs| SignedOrderedTree {
            n,
            edges: t
                .edges
                .iter()
                .enumerate()
                .map(|(e, &(a, b))| (a, b, if signs >> e & 1 == 1 { -1 } else { 1 }))
                .collect(),
        })
    }))
}

/// Uniform ordered tree: uniform Prüfer sequence, uniform edge order.
pub fn sample_ordered_tree<R: Rng + ?Sized>(n: usize, rng: &mut R) -> OrderedTree {
    let mut edges = match n {
        0 | 1 => Vec::new(),
        2 => vec![(0, 1)],
        _ => {
            let seq: Vec<usize> = (0..n - 2).map(|_| rng.random_range(0..n)).collect();
            prufer_decode(&seq)
        }
    };
    edges.shuffle(rng);
    OrderedTree { n, edges }
}

pub fn sample_signed_ordered_tree<R: Rng + ?Sized>(n: usize, rng: &mut R) -> SignedOrderedTree {
    let t = sample_ordered_tree(n, rng);
    SignedOrderedTree {
        n,
        edges: t
            .edges
            .into_iter()
            .map(|(a, b)| (a, b, if rng.random::<bool>() { 1 } else { -1 }))
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn enumeration_counts() {
        assert_eq!(enumerate_ordered_trees(1).unwrap().count(), 1);
        assert_eq!(enumerate_ordered_trees(2).unwrap().count(), 1);
        assert_eq!(enumerate_signed_ordered_trees(2).unwrap().count(), 2);
        assert_eq!(enumerate_ordered_trees(3).unwrap().count(), 6);
        assert_eq!(enumerate_ordered_trees(4).unwrap().count(), 96);
        assert!(matches!(enumerate_ordered_trees(8), Err(Error::SizeLimit { .. })));
    }

    #[test]
    fn enumerated_trees_are_distinct_spanning_trees() {
        let all: Vec<OrderedTree> = enumerate_ordered_trees(5).unwrap().collect();
        assert_eq!(all.len() as u128, ordered_tree_count(5));
        assert!(all.iter().all(|t| t.is_spanning_tree()));
        let set: std::collections::HashSet<_> = all.iter().collect();
        assert_eq!(set.len(), all.len());
    }

    #[test]
    fn prufer_round_trip_shape() {
        assert_eq!(prufer_decode(&[3, 3, 3]), vec![(0, 3), (1, 3), (2, 3), (3, 4)]);
        assert_eq!(labeled_trees(4).len(), 16);
    }
}
