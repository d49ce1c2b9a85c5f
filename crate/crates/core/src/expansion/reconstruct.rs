use crate::combinatorics::OrderedTree;
use crate::engine;
use crate::error::{Error, Result};
use crate::geometry::{scatter, wrap, PhasePoint};
use crate::sampler::{min_pair_distance, Configuration};
use crate::trajectory::{RunRecord, Trajectory};
use crate::vector::{self, Vector};

/// Tolerance for matching replayed collision times and directions against
/// the prescribed ones.
pub const ROUND_TRIP_TOL: f64 = 1e-9;

/// Tree coordinates of a cluster path: ordered tree, root (centre of mass
/// at time zero), initial velocities, collision times and directions.
/// For the `e`-th tree edge `(a, b)`, `omegas[e] = (x_a - x_b) / eps` at
/// `times[e]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DecoratedTreeParams<const D: usize> {
    pub tree: OrderedTree,
    pub root: Vector<D>,
    pub velocities: Vec<Vector<D>>,
    pub times: Vec<f64>,
    pub omegas: Vec<Vector<D>>,
}

impl<const D: usize> DecoratedTreeParams<D> {
    pub fn n(&self) -> usize {
        self.tree.n
    }

    pub fn validate(&self, horizon: f64) -> Result<()> {
        let n = self.tree.n;
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if !self.tree.is_spanning_tree() {
            return bad(format!("tree {:?} does not span {n} vertices", self.tree.edges));
        }
        if self.velocities.len() != n || self.times.len() + 1 != n || self.omegas.len() + 1 != n {
            return bad("parameter lengths do not match the tree size".into());
        }
        let mut prev = 0.0;
        for &t in &self.times {
            if !(t > prev && t <= horizon) {
                return bad(format!("collision times {:?} not increasing in (0, {horizon}]", self.times));
            }
            prev = t;
        }
        if self.omegas.iter().any(|w| (vector::norm(w) - 1.0).abs() > 1e-12) {
            return bad("deflection vectors must be unit".into());
        }
        Ok(())
    }
}

/// Why a reconstruction is not a minimal cluster path with the prescribed
/// clustering collisions.
#[derive(Debug, Clone, PartialEq)]
pub enum Incompatibility {
    /// Prescribed collision `edge` has outgoing relative velocity.
    NonIncoming { edge: usize },
    /// Reconstructed time-zero data violate the hard core.
    InitialOverlap,
    /// The replayed dynamics differ from the prescription (earlier contact,
    /// recollision, or missing collision).
    LogMismatch { expected: usize, found: usize, first_difference: usize },
    Engine(String),
}

#[derive(Debug, Clone)]
pub struct Reconstruction<const D: usize> {
    /// Time-zero states in tree-vertex order.
    pub initial: Vec<PhasePoint<D>>,
    /// `prod_e (-(v_a - v_b) . omega_e)_+` with pre-collision velocities.
    pub cross_section: f64,
    pub compatible: bool,
    pub diagnostic: Option<Incompatibility>,
    /// Replayed run, when the initial data were admissible.
    pub record: Option<RunRecord<D>>,
}

/// Inverts the tree coordinates: builds time-zero data whose dynamics
/// should produce exactly the prescribed clustering collisions, then replays
/// the hard-sphere flow on `[0, horizon]` to decide compatibility.
pub fn reconstruct_cluster_path<const D: usize>(
    params: &DecoratedTreeParams<D>,
    eps: f64,
    horizon: f64,
) -> Reconstruction<D> {
    let n = params.n();
    // unwrapped initial positions and current (time, position, velocity)
    let mut x0: Vec<Vector<D>> = vec![[0.0; D]; n];
    let mut cur: Vec<(f64, Vector<D>, Vector<D>)> = params.velocities.iter().map(|v| (0.0, [0.0; D], *v)).collect();
    let mut comp: Vec<usize> = (0..n).collect();
    let mut cross_section = 1.0;
    let mut diagnostic = None;
    for (e, (&(a, b), (&tau, omega))) in params
        .tree
        .edges
        .iter()
        .zip(params.times.iter().zip(&params.omegas))
        .enumerate()
    {
        let at = |k: usize, cur: &[(f64, Vector<D>, Vector<D>)]| vector::axpy(&cur[k].1, tau - cur[k].0, &cur[k].2);
        let xa = at(a, &cur);
        let xb = at(b, &cur);
        let shift = vector::sub(&vector::axpy(&xa, -eps, omega), &xb);
        let (ca, cb) = (comp[a], comp[b]);
        for k in 0..n {
            if comp[k] == cb {
                x0[k] = vector::add(&x0[k], &shift);
                cur[k].1 = vector::add(&cur[k].1, &shift);
                comp[k] = ca;
            }
        }
        let xb = vector::axpy(&xa, -eps, omega);
        let (va, vb) = (cur[a].2, cur[b].2);
        let radial = -vector::dot(&vector::sub(&va, &vb), omega);
        if radial <= 0.0 {
            cross_section = 0.0;
            diagnostic.get_or_insert(Incompatibility::NonIncoming { edge: e });
        } else {
            cross_section *= radial;
        }
        let (va2, vb2) = scatter(&va, &vb, omega);
        cur[a] = (tau, xa, va2);
        cur[b] = (tau, xb, vb2);
    }
    let com = {
        let mut s = [0.0; D];
        for x in &x0 {
            s = vector::add(&s, x);
        }
        vector::scale(1.0 / n as f64, &s)
    };
    let shift = vector::sub(&params.root, &com);
    let initial: Vec<PhasePoint<D>> = x0
        .iter()
        .zip(&params.velocities)
        .map(|(x, v)| PhasePoint {
            x: wrap(&vector::add(x, &shift)),
            v: *v,
        })
        .collect();
    let mut out = Reconstruction {
        initial,
        cross_section,
        compatible: false,
        diagnostic,
        record: None,
    };
    if out.diagnostic.is_some() {
        return out;
    }
    let xs: Vec<Vector<D>> = out.initial.iter().map(|p| p.x).collect();
    if min_pair_distance(&xs) < eps {
        out.diagnostic = Some(Incompatibility::InitialOverlap);
        return out;
    }
    let config = Configuration {
        particles: out.initial.clone(),
        eps,
    };
    let record = match engine::run(&config, horizon) {
        Ok(r) => r,
        Err(e) => {
            out.diagnostic = Some(Incompatibility::Engine(e.to_string()));
            return out;
        }
    };
    out.diagnostic = compare_log(params, &record);
    out.compatible = out.diagnostic.is_none();
    out.record = Some(record);
    out
}

fn compare_log<const D: usize>(params: &DecoratedTreeParams<D>, record: &RunRecord<D>) -> Option<Incompatibility> {
    let expected = params.tree.edges.len();
    let found = record.log.len();
    let scale = record.horizon.max(1.0);
    for (m, &(a, b)) in params.tree.edges.iter().enumerate() {
        let Some(r) = record.log.get(m) else {
            return Some(Incompatibility::LogMismatch {
                expected,
                found,
                first_difference: m,
            });
        };
        let same_pair = r.pair() == (a.min(b), a.max(b));
        if !same_pair || (r.t - params.times[m]).abs() > ROUND_TRIP_TOL * scale {
            return Some(Incompatibility::LogMismatch {
                expected,
                found,
                first_difference: m,
            });
        }
    }
    if found != expected {
        return Some(Incompatibility::LogMismatch {
            expected,
            found,
            first_difference: expected,
        });
    }
    None
}

/// Unwrapped displacement of a particle over `[0, t]`.
fn travel<const D: usize>(tr: &Trajectory<D>, t: f64) -> Vector<D> {
    let bps = tr.breakpoints();
    let mut s = [0.0; D];
    for (k, b) in bps.iter().enumerate() {
        if b.t >= t {
            break;
        }
        let end = bps.get(k + 1).map_or(t, |n| n.t.min(t));
        s = vector::axpy(&s, end - b.t, &b.v);
    }
    s
}

/// Centre of mass at time zero with positions unwrapped along the tree
/// edges, using the exact contact displacement at each edge time.
fn tree_root<const D: usize>(tree: &OrderedTree, record: &RunRecord<D>) -> Vector<D> {
    let n = tree.n;
    let trs = &record.trajectories;
    let mut pos: Vec<Option<Vector<D>>> = vec![None; n];
    pos[0] = Some(trs[0].initial().x);
    let mut changed = true;
    while changed {
        changed = false;
        for (e, &(a, b)) in tree.edges.iter().enumerate() {
            let Some(r) = record.log.get(e) else { continue };
            let omega = if r.i == a { r.omega } else { vector::scale(-1.0, &r.omega) };
            // x_b(t) - x_a(t) = -eps omega at the edge time
            let rel_t = vector::scale(-record.eps, &omega);
            let rel_0 = vector::sub(&rel_t, &vector::sub(&travel(&trs[b], r.t), &travel(&trs[a], r.t)));
            match (pos[a], pos[b]) {
                (Some(xa), None) => {
                    pos[b] = Some(vector::add(&xa, &rel_0));
                    changed = true;
                }
                (None, Some(xb)) => {
                    pos[a] = Some(vector::sub(&xb, &rel_0));
                    changed = true;
                }
                _ => {}
            }
        }
    }
    let xs: Vec<Vector<D>> = pos.into_iter().map(|p| p.unwrap_or([f64::NAN; D])).collect();
    let mut c = [0.0; D];
    for x in &xs {
        c = vector::axpy(&c, 1.0 / n as f64, x);
    }
    wrap(&c)
}

/// Reads tree coordinates back from a replayed run whose collision log
/// realizes `tree` (edge orientation taken from `tree`).
pub fn extract_params<const D: usize>(tree: &OrderedTree, record: &RunRecord<D>) -> DecoratedTreeParams<D> {
    let initial = record.initial_states();
    let times = record.log.iter().map(|r| r.t).collect();
    let omegas = record
        .log
        .iter()
        .zip(&tree.edges)
        .map(|(r, &(a, _))| if r.i == a { r.omega } else { vector::scale(-1.0, &r.omega) })
        .collect();
    DecoratedTreeParams {
        tree: tree.clone(),
        root: tree_root(tree, record),
        velocities: initial.iter().map(|p| p.v).collect(),
        times,
        omegas,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_particle_is_free_flight() {
        let p = DecoratedTreeParams {
            tree: OrderedTree::new(1, vec![]),
            root: [0.3, 0.4],
            velocities: vec![[1.0, 0.5]],
            times: vec![],
            omegas: vec![],
        };
        let r = reconstruct_cluster_path(&p, 0.01, 0.2);
        assert!(r.compatible);
        assert_eq!(r.cross_section, 1.0);
        assert_eq!(r.initial[0].x, [0.3, 0.4]);
    }

    #[test]
    fn head_on_two_body() {
        let p = DecoratedTreeParams {
            tree: OrderedTree::new(2, vec![(0, 1)]),
            root: [0.45, 0.5],
            velocities: vec![[1.0, 0.0], [0.0, 0.0]],
            times: vec![0.4],
            omegas: vec![[-1.0, 0.0]],
        };
        let r = reconstruct_cluster_path(&p, 0.1, 1.0);
        assert!(r.compatible, "{:?}", r.diagnostic);
        assert!((r.initial[0].x[0] - 0.2).abs() < 1e-12 && (r.initial[1].x[0] - 0.7).abs() < 1e-12);
        assert!((r.cross_section - 1.0).abs() < 1e-15);
        let rec = r.record.unwrap();
        assert_eq!(rec.log.len(), 1);
        assert!((rec.log[0].t - 0.4).abs() < 1e-12);
        let back = extract_params(&p.tree, &rec);
        assert!((back.omegas[0][0] + 1.0).abs() < 1e-12);
        assert!((back.root[0] - 0.45).abs() < 1e-12);
    }

    #[test]
    fn outgoing_prescription_is_incompatible() {
        let p = DecoratedTreeParams {
            tree: OrderedTree::new(2, vec![(0, 1)]),
            root: [0.45, 0.5],
            velocities: vec![[1.0, 0.0], [0.0, 0.0]],
            times: vec![0.4],
            omegas: vec![[1.0, 0.0]],
        };
        let r = reconstruct_cluster_path(&p, 0.1, 1.0);
        assert!(!r.compatible);
        assert_eq!(r.cross_section, 0.0);
        assert_eq!(r.diagnostic, Some(Incompatibility::NonIncoming { edge: 0 }));
    }

    #[test]
    fn validation_rejects_bad_times() {
        let p = DecoratedTreeParams {
            tree: OrderedTree::new(3, vec![(0, 1), (1, 2)]),
            root: [0.5, 0.5],
            velocities: vec![[0.0; 2]; 3],
            times: vec![0.2, 0.1],
            omegas: vec![[1.0, 0.0]; 2],
        };
        assert!(p.validate(1.0).is_err());
    }
}
