use crate::cluster::ClusterPath;
use crate::stats::Histogram;

/// Histogram over cluster sizes with energy sums, normalized by
/// `normalization` (the activity for MD ensembles, `M` for coagulation).
pub fn cluster_size_law(clusters: impl IntoIterator<Item = (usize, f64)>, normalization: f64) -> Histogram {
    let mut h = Histogram::new();
    for (size, energy) in clusters {
        h.add(size, energy);
    }
    h.normalization = normalization;
    h
}

/// Size law of one MD run's cluster-path partition.
pub fn md_cluster_size_law<const D: usize>(paths: &[ClusterPath<D>], mu: f64) -> Histogram {
    cluster_size_law(paths.iter().map(|p| (p.size(), p.energy)), mu)
}

/// Fraction of particles in the largest cluster.
pub fn largest_fraction(sizes: &[usize]) -> f64 {
    let total: usize = sizes.iter().sum();
    if total == 0 {
        return 0.0;
    }
    *sizes.iter().max().unwrap() as f64 / total as f64
}

/// Particles per cluster.
pub fn mean_cluster_size(sizes: &[usize]) -> f64 {
    if sizes.is_empty() {
        return 0.0;
    }
    sizes.iter().sum::<usize>() as f64 / sizes.len() as f64
}
