//! Reference models for the low-density limit: DSMC for the Boltzmann
//! equation and a stochastic coagulation process of limiting cluster paths.

mod coagulation;
mod dsmc;
mod size_law;

pub use coagulation::{
    coagulation_run, merge_clusters, CoagulationOptions, CoagulationRun, CoagulationSnapshot, LimitCluster,
};
pub use dsmc::{
    density_modes, dsmc_run, dsmc_step, CellSummary, DsmcOptions, DsmcRun, DsmcSnapshot, DsmcState,
    VelocityMoments,
};
pub use size_law::{cluster_size_law, largest_fraction, md_cluster_size_law, mean_cluster_size};

use crate::vector::Vector;

/// Cells per dimension for cell side `cell_size` (must divide the unit torus).
pub(crate) fn cells_per_dim(cell_size: f64) -> crate::Result<usize> {
    let nc = (1.0 / cell_size).round();
    if !(cell_size > 0.0) || nc < 1.0 || ((1.0 / cell_size) - nc).abs() > 1e-9 * nc {
        return Err(crate::Error::InvalidParameter(format!(
            "cell size {cell_size} must be 1/n for an integer n"
        )));
    }
    Ok(nc as usize)
}

pub(crate) fn cell_of<const D: usize>(x: &Vector<D>, nc: usize) -> usize {
    let mut c = 0;
    for k in (0..D).rev() {
        let i = ((x[k] * nc as f64) as usize).min(nc - 1);
        c = c * nc + i;
    }
    c
}

/// Particle indices grouped by cell (counting sort, stable in index).
pub(crate) fn cell_lists<const D: usize>(xs: impl Iterator<Item = Vector<D>>, nc: usize) -> (Vec<usize>, Vec<usize>) {
    let cells: Vec<usize> = xs.map(|x| cell_of(&x, nc)).collect();
    let n_cells = nc.pow(D as u32);
    let mut start = vec![0usize; n_cells + 1];
    for &c in &cells {
        start[c + 1] += 1;
    }
    for c in 0..n_cells {
        start[c + 1] += start[c];
    }
    let mut fill = start.clone();
    let mut order = vec![0usize; cells.len()];
    for (p, &c) in cells.iter().enumerate() {
        order[fill[c]] = p;
        fill[c] += 1;
    }
    (start, order)
}
