//! Piecewise-linear particle paths and the collision log of a run.

use serde::{Deserialize, Serialize};

use crate::geometry::{serde_arrays, wrap, PhasePoint};
use crate::vector::{self, Vector};

/// A path breakpoint: position at `t` and the velocity leaving `t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Breakpoint<const D: usize> {
    pub t: f64,
    #[serde(with = "serde_arrays")]
    pub x: Vector<D>,
    #[serde(with = "serde_arrays")]
    pub v: Vector<D>,
}

/// Path of one particle on `[0, T]`: free flight between breakpoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory<const D: usize> {
    pub particle_id: usize,
    breakpoints: Vec<Breakpoint<D>>,
}

impl<const D: usize> Trajectory<D> {
    pub fn new(particle_id: usize, start: Breakpoint<D>) -> Self {
        Self {
            particle_id,
            breakpoints: vec![start],
        }
    }

    /// Builds a path from explicit breakpoints (times must increase).
    pub fn from_breakpoints(particle_id: usize, breakpoints: Vec<Breakpoint<D>>) -> Self {
        assert!(!breakpoints.is_empty());
        debug_assert!(breakpoints.windows(2).all(|w| w[0].t <= w[1].t));
        Self {
            particle_id,
            breakpoints,
        }
    }

    pub fn push(&mut self, bp: Breakpoint<D>) {
        debug_assert!(bp.t >= self.breakpoints.last().unwrap().t);
        self.breakpoints.push(bp);
    }

    pub fn breakpoints(&self) -> &[Breakpoint<D>] {
        &self.breakpoints
    }

    pub fn len(&self) -> usize {
        self.breakpoints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.breakpoints.is_empty()
    }

    pub fn start_time(&self) -> f64 {
        self.breakpoints[0].t
    }

    pub fn end_time(&self) -> f64 {
        self.breakpoints.last().unwrap().t
    }

    pub fn initial(&self) -> PhasePoint<D> {
        let b = &self.breakpoints[0];
        PhasePoint { x: b.x, v: b.v }
    }

    pub fn last(&self) -> &Breakpoint<D> {
        self.breakpoints.last().unwrap()
    }

    fn segment(&self, t: f64) -> &Breakpoint<D> {
        let k = self.breakpoints.partition_point(|b| b.t <= t);
        &self.breakpoints[k.saturating_sub(1)]
    }

    /// State at `t`; the velocity is right-continuous (outgoing at a breakpoint).
    pub fn state_at(&self, t: f64) -> PhasePoint<D> {
        let b = self.segment(t);
        PhasePoint {
            x: wrap(&vector::axpy(&b.x, t - b.t, &b.v)),
            v: b.v,
        }
    }

    pub fn position_at(&self, t: f64) -> Vector<D> {
        self.state_at(t).x
    }

    /// Largest speed over all segments.
    pub fn max_speed(&self) -> f64 {
        self.breakpoints
            .iter()
            .map(|b| vector::norm(&b.v))
            .fold(0.0, f64::max)
    }

    /// Number of velocity changes (interior breakpoints).
    pub fn n_collisions(&self) -> usize {
        self.breakpoints.len().saturating_sub(2)
    }
}

/// One logged collision with pre- and post-collision velocities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CollisionRecord<const D: usize> {
    pub t: f64,
    pub i: usize,
    pub j: usize,
    /// `(x_i - x_j) / eps` at contact.
    #[serde(with = "serde_arrays")]
    pub omega: Vector<D>,
    #[serde(with = "serde_arrays")]
    pub vi_pre: Vector<D>,
    #[serde(with = "serde_arrays")]
    pub vj_pre: Vector<D>,
    #[serde(with = "serde_arrays")]
    pub vi_post: Vector<D>,
    #[serde(with = "serde_arrays")]
    pub vj_post: Vector<D>,
}

impl<const D: usize> CollisionRecord<D> {
    /// Unordered pair key `(min, max)`.
    pub fn pair(&self) -> (usize, usize) {
        (self.i.min(self.j), self.i.max(self.j))
    }
}

pub type CollisionLog<const D: usize> = Vec<CollisionRecord<D>>;

/// Full record of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord<const D: usize> {
    pub eps: f64,
    pub horizon: f64,
    pub trajectories: Vec<Trajectory<D>>,
    pub log: CollisionLog<D>,
    pub stats: EngineStats,
}

impl<const D: usize> RunRecord<D> {
    pub fn n(&self) -> usize {
        self.trajectories.len()
    }

    pub fn initial_states(&self) -> Vec<PhasePoint<D>> {
        self.trajectories.iter().map(|t| t.initial()).collect()
    }

    pub fn final_states(&self) -> Vec<PhasePoint<D>> {
        self.trajectories
            .iter()
            .map(|t| {
                let b = t.last();
                PhasePoint { x: b.x, v: b.v }
            })
            .collect()
    }

    pub fn states_at(&self, t: f64) -> Vec<PhasePoint<D>> {
        self.trajectories.iter().map(|tr| tr.state_at(t)).collect()
    }
}

/// Engine bookkeeping counters.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EngineStats {
    pub collisions: usize,
    pub cell_crossings: usize,
    pub stale_pops: usize,
    pub max_queue_len: usize,
    pub cells_per_dim: usize,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn state_lookup_is_right_continuous() {
        let mut tr = Trajectory::new(
            0,
            Breakpoint {
                t: 0.0,
                x: [0.5, 0.5],
                v: [1.0, 0.0],
            },
        );
        tr.push(Breakpoint {
            t: 0.25,
            x: [0.75, 0.5],
            v: [0.0, 1.0],
        });
        tr.push(Breakpoint {
            t: 1.0,
            x: [0.75, 0.25],
            v: [0.0, 1.0],
        });
        assert_eq!(tr.state_at(0.25).v, [0.0, 1.0]);
        assert_eq!(tr.state_at(0.1).x, [0.6, 0.5]);
        assert_eq!(tr.position_at(0.75), [0.75, 0.0]);
        assert_eq!(tr.n_collisions(), 1);
    }
}
