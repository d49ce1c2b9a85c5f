//! Deterministic oracle suites: geometry identities, combinatorial
//! exhaustives and the event engine against the all-pairs oracle.

use std::collections::HashMap;

use rand::Rng;

use crate::combinatorics::{
    enumerate_ordered_trees, labeled_trees, ordered_tree_count, phi, phi_with, sample_ordered_tree,
    spanning_tree_count, spanning_tree_count_enumerated, PhiMode, SimpleGraph,
};
use crate::engine::{naive_run, run_with_options, EngineOptions};
use crate::geometry::{
    free_flight, kappa, pair_collision_time, pair_collision_time_scan, sample_unit_vector, scatter,
    torus_displacement, PhasePoint,
};
use crate::rng::{stream, Domain, StreamRng};
use crate::sampler::{min_pair_distance, sample_maxwellian, Configuration};
use crate::trajectory::RunRecord;
use crate::vector::{self, Vector};

/// Outcome of one suite.
#[derive(Debug, Clone, PartialEq)]
pub struct SuiteReport {
    pub name: String,
    pub checks: usize,
    pub failures: Vec<String>,
}

impl SuiteReport {
    fn new(name: &str) -> Self {
        Self {
            name: name.into(),
            checks: 0,
            failures: Vec::new(),
        }
    }

    fn check(&mut self, ok: bool, what: impl FnOnce() -> String) {
        self.checks += 1;
        if !ok && self.failures.len() < 20 {
            self.failures.push(what());
        }
    }

    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

fn close<const D: usize>(a: &Vector<D>, b: &Vector<D>, tol: f64) -> bool {
    vector::norm(&vector::sub(a, b)) <= tol
}

/// Scattering, torus and free-flight identities on random inputs.
pub fn geometry_suite(seed: u64, samples: usize) -> SuiteReport {
    let mut rep = SuiteReport::new("geometry");
    let mut rng = stream(seed, Domain::Validation, 0);
    for _ in 0..samples {
        let vi: Vector<3> = sample_maxwellian(1.0, &mut rng);
        let vj: Vector<3> = sample_maxwellian(1.0, &mut rng);
        let om: Vector<3> = sample_unit_vector(&mut rng);
        let (a, b) = scatter(&vi, &vj, &om);
        let (c, d) = scatter(&a, &b, &om);
        rep.check(close(&c, &vi, 1e-12) && close(&d, &vj, 1e-12), || "scatter is not an involution".into());
        let e0 = vector::norm2(&vi) + vector::norm2(&vj);
        let e1 = vector::norm2(&a) + vector::norm2(&b);
        rep.check((e0 - e1).abs() <= 1e-12 * e0.max(1.0), || format!("energy {e0} -> {e1}"));
        rep.check(close(&vector::add(&vi, &vj), &vector::add(&a, &b), 1e-12), || "momentum".into());
        let n0 = vector::dot(&vector::sub(&vi, &vj), &om);
        let n1 = vector::dot(&vector::sub(&a, &b), &om);
        rep.check((n0 + n1).abs() <= 1e-12, || "normal relative velocity not reversed".into());

        let x: Vector<2> = std::array::from_fn(|_| rng.random::<f64>());
        let y: Vector<2> = std::array::from_fn(|_| rng.random::<f64>());
        let dxy = torus_displacement(&x, &y);
        rep.check(dxy.iter().all(|c| (-0.5..0.5).contains(c)), || format!("displacement {dxy:?}"));
        let v: Vector<2> = sample_maxwellian(1.0, &mut rng);
        let z = PhasePoint { x, v };
        let (s, t) = (rng.random::<f64>(), rng.random::<f64>());
        let p = free_flight(&free_flight(&z, s), t);
        let q = free_flight(&z, s + t);
        rep.check(vector::norm(&torus_displacement(&p.x, &q.x)) <= 1e-12, || "free flight composition".into());

        let zi = PhasePoint { x, v };
        let zj = PhasePoint {
            x: y,
            v: sample_maxwellian(1.0, &mut rng),
        };
        let eps = 0.05;
        if torus_displacement(&x, &y).iter().map(|c| c * c).sum::<f64>().sqrt() > eps {
            let a = pair_collision_time(&zi, &zj, eps, 0.3).ok().flatten();
            let b = pair_collision_time(&zj, &zi, eps, 0.3).ok().flatten();
            rep.check(
                match (a, b) {
                    (None, None) => true,
                    (Some(a), Some(b)) => (a.t - b.t).abs() <= 1e-12 && close(&a.omega, &vector::scale(-1.0, &b.omega), 1e-9),
                    _ => false,
                },
                || "pair collision time not symmetric".into(),
            );
            let s = pair_collision_time_scan(&zi, &zj, eps, 0.3).ok().flatten();
            if let (Some(a), Some(s)) = (a, s) {
                rep.check(s.t <= a.t + 1e-12, || "image scan later than nearest image".into());
            }
        }
    }
    for d in [2usize, 3] {
        let m = 200_000;
        let mut acc = 0.0;
        let mut r = stream(seed, Domain::Validation, d as u64);
        for _ in 0..m {
            let w = if d == 2 {
                sample_unit_vector::<2, _>(&mut r)[0]
            } else {
                sample_unit_vector::<3, _>(&mut r)[0]
            };
            acc += w.max(0.0);
        }
        let est = acc / m as f64 * crate::geometry::sphere_area(d);
        rep.check((est - kappa(d)).abs() < 0.02 * kappa(d), || format!("kappa_{d}: {est} vs {}", kappa(d)));
    }
    rep
}

fn random_graph(k: usize, p: f64, rng: &mut StreamRng) -> SimpleGraph {
    let mut g = SimpleGraph::new(k);
    for a in 0..k {
        for b in a + 1..k {
            if rng.random::<f64>() < p {
                g.add_edge(a, b);
            }
        }
    }
    g
}

/// Exhaustive checks of the truncated function and tree counts.
pub fn combinatorics_suite(seed: u64, random_graphs: usize) -> SuiteReport {
    let mut rep = SuiteReport::new("combinatorics");
    // every graph on up to 6 vertices
    for k in 1..=6usize {
        let pairs: Vec<(usize, usize)> = (0..k).flat_map(|a| (a + 1..k).map(move |b| (a, b))).collect();
        for mask in 0u32..1 << pairs.len() {
            let edges: Vec<(usize, usize)> = (0..pairs.len()).filter(|&e| mask >> e & 1 == 1).map(|e| pairs[e]).collect();
            let g = SimpleGraph::from_edges(k, &edges);
            let f = phi(&g).expect("phi");
            let st = spanning_tree_count(&g).expect("trees");
            rep.check(f.unsigned_abs() <= st, || format!("|phi| > trees for {edges:?}"));
            if g.is_tree() {
                rep.check(f == if k % 2 == 1 { 1 } else { -1 }, || format!("phi(tree) = {f} for {edges:?}"));
            }
            if !g.is_connected() {
                rep.check(f == 0, || format!("phi = {f} on disconnected {edges:?}"));
            }
            if k <= 5 {
                let e = phi_with(&g, PhiMode::EdgeSubsets).expect("edge subsets");
                rep.check(e == f, || format!("phi modes disagree on {edges:?}: {f} vs {e}"));
                let es = spanning_tree_count_enumerated(&g).expect("enumerated");
                rep.check(es == st, || format!("spanning tree counts disagree on {edges:?}"));
            }
        }
    }
    // complete graphs through the brute-force sum over labeled graphs
    for k in 1..=5usize {
        let g = SimpleGraph::complete(k);
        let f = phi_with(&g, PhiMode::LabeledGraphs).expect("labeled");
        let fact: i64 = (1..k as i64).product();
        let want = if k % 2 == 1 { fact } else { -fact };
        rep.check(f == want, || format!("phi(K_{k}) = {f}, expected {want}"));
        rep.check(phi(&g).unwrap() == want, || format!("phi(K_{k}) by subsets"));
    }
    // random graphs on up to 12 vertices
    let mut rng = stream(seed, Domain::Validation, 100);
    for _ in 0..random_graphs {
        let k = rng.random_range(2..=12);
        let p = rng.random_range(0.15..0.9);
        let g = random_graph(k, p, &mut rng);
        let f = phi(&g).expect("phi");
        let st = spanning_tree_count(&g).expect("trees");
        rep.check(f.unsigned_abs() <= st, || format!("|phi| = {} > {st} on k = {k}", f.abs()));
    }
    // Cayley and ordered-tree counts
    for n in 1..=7usize {
        let cayley = if n == 1 { 1 } else { (n as u64).pow(n as u32 - 2) };
        rep.check(spanning_tree_count(&SimpleGraph::complete(n)).unwrap() == cayley, || format!("Cayley n = {n}"));
        rep.check(labeled_trees(n).len() as u64 == cayley, || format!("Pruefer count n = {n}"));
        let fact: u128 = (1..n as u128).product();
        rep.check(ordered_tree_count(n) == cayley as u128 * fact, || format!("ordered count n = {n}"));
        if n <= 6 {
            let c = enumerate_ordered_trees(n).unwrap().count() as u128;
            rep.check(c == ordered_tree_count(n), || format!("enumeration n = {n}: {c}"));
        }
    }
    rep
}

/// Wilson–Hilferty upper quantile of the chi-square law with `dof`
/// degrees of freedom at standard-normal quantile `z`.
pub fn chi_square_critical(dof: f64, z: f64) -> f64 {
    let a = 2.0 / (9.0 * dof);
    dof * (1.0 - a + z * a.sqrt()).powi(3)
}

/// Chi-square statistic of `draws` samples of `sample_ordered_tree(n)`
/// against the uniform law on all ordered trees, with its degrees of freedom.
pub fn tree_sampler_chi_square(n: usize, draws: usize, seed: u64) -> (f64, f64) {
    let all: Vec<_> = enumerate_ordered_trees(n).expect("enumerable").collect();
    let index: HashMap<_, usize> = all.iter().cloned().enumerate().map(|(k, t)| (t, k)).collect();
    let mut counts = vec![0u64; all.len()];
    let mut rng = stream(seed, Domain::Validation, 200);
    for _ in 0..draws {
        let t = sample_ordered_tree(n, &mut rng);
        counts[index[&t]] += 1;
    }
    let e = draws as f64 / all.len() as f64;
    let chi2 = counts.iter().map(|&c| (c as f64 - e).powi(2) / e).sum();
    (chi2, all.len() as f64 - 1.0)
}

/// Random hard-core configuration of `n` particles.
pub fn random_configuration<const D: usize>(n: usize, eps: f64, rng: &mut StreamRng) -> Configuration<D> {
    let mut ps: Vec<PhasePoint<D>> = Vec::with_capacity(n);
    while ps.len() < n {
        let x: Vector<D> = std::array::from_fn(|_| rng.random::<f64>());
        if ps.iter().all(|p| vector::norm(&torus_displacement(&p.x, &x)) > eps * (1.0 + 1e-9)) {
            ps.push(PhasePoint {
                x,
                v: sample_maxwellian(1.0, rng),
            });
        }
    }
    Configuration { particles: ps, eps }
}

/// Compares collision logs: identical pair sequences, times within `tol`.
pub fn compare_logs<const D: usize>(a: &RunRecord<D>, b: &RunRecord<D>, tol: f64) -> Result<(), String> {
    if a.log.len() != b.log.len() {
        return Err(format!("{} vs {} collisions", a.log.len(), b.log.len()));
    }
    for (k, (x, y)) in a.log.iter().zip(&b.log).enumerate() {
        if x.pair() != y.pair() {
            return Err(format!("event {k}: pair {:?} vs {:?}", x.pair(), y.pair()));
        }
        if (x.t - y.t).abs() > tol {
            return Err(format!("event {k}: time {} vs {}", x.t, y.t));
        }
    }
    Ok(())
}

/// Event engine (cell lists and all-pairs mode) against the naive oracle
/// on `configs` random configurations of 2 to 6 particles.
pub fn engine_suite<const D: usize>(seed: u64, configs: usize) -> SuiteReport {
    let mut rep = SuiteReport::new(&format!("engine-vs-naive (d = {D})"));
    let mut rng = stream(seed, Domain::Validation, 300 + D as u64);
    let mut events = 0;
    for c in 0..configs {
        let n = rng.random_range(2..=6);
        let eps = rng.random_range(0.05..0.15);
        let horizon = 1.0;
        let config = random_configuration::<D>(n, eps, &mut rng);
        let naive = match naive_run(&config, horizon) {
            Ok(r) => r,
            Err(e) => {
                rep.check(false, || format!("config {c}: naive oracle failed: {e}"));
                continue;
            }
        };
        events += naive.log.len();
        for (mode, opts) in [
            ("cells", EngineOptions { cells_per_dim: Some(5) }),
            ("all-pairs", EngineOptions { cells_per_dim: Some(1) }),
        ] {
            match run_with_options(&config, horizon, opts) {
                Ok(r) => {
                    let cmp = compare_logs(&r, &naive, 1e-9);
                    rep.check(cmp.is_ok(), || format!("config {c} ({mode}): {}", cmp.unwrap_err()));
                    let ok = min_pair_distance(&r.final_states().iter().map(|z| z.x).collect::<Vec<_>>()) >= eps * (1.0 - 1e-9);
                    rep.check(ok, || format!("config {c} ({mode}): overlap at the end"));
                }
                Err(e) => rep.check(false, || format!("config {c} ({mode}): {e}")),
            }
        }
    }
    rep.check(events > 0, || "no collisions in any configuration".into());
    rep
}

/// Every suite at its default size.
pub fn all_suites(seed: u64) -> Vec<SuiteReport> {
    vec![
        geometry_suite(seed, 10_000),
        combinatorics_suite(seed, 1000),
        engine_suite::<2>(seed, 200),
        engine_suite::<3>(seed, 100),
    ]
}
