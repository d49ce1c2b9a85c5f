//! Mergeable accumulators, histograms, jackknife errors and weighted fits.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

/// Streaming moments to fourth order.
///
/// `push` uses the one-pass central-moment updates; `merge` the matching
/// pairwise combination formulas, so merging accumulators of disjoint
/// chunks agrees with streaming everything through one accumulator up to
/// rounding. Reductions over many workers go through [`Estimator::merge_tree`],
/// whose fixed pairing makes the result independent of thread scheduling.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Estimator {
    pub n: u64,
    pub mean: f64,
    /// Sums of 2nd, 3rd, 4th powers of deviations from the mean.
    pub m2: f64,
    pub m3: f64,
    pub m4: f64,
}

impl Estimator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_slice(xs: &[f64]) -> Self {
        let mut e = Self::new();
        for &x in xs {
            e.push(x);
        }
        e
    }

    pub fn push(&mut self, x: f64) {
        let n1 = self.n as f64;
        self.n += 1;
        let n = self.n as f64;
        let delta = x - self.mean;
        let dn = delta / n;
        let dn2 = dn * dn;
        let term1 = delta * dn * n1;
        self.mean += dn;
        self.m4 += term1 * dn2 * (n * n - 3.0 * n + 3.0) + 6.0 * dn2 * self.m2 - 4.0 * dn * self.m3;
        self.m3 += term1 * dn * (n - 2.0) - 3.0 * dn * self.m2;
        self.m2 += term1;
    }

    pub fn merge(&self, other: &Estimator) -> Estimator {
        if self.n == 0 {
            return *other;
        }
        if other.n == 0 {
            return *self;
        }
        let (na, nb) = (self.n as f64, other.n as f64);
        let n = na + nb;
        let d = other.mean - self.mean;
        let (d2, d3, d4) = (d * d, d * d * d, d * d * d * d);
        Estimator {
            n: self.n + other.n,
            mean: self.mean + d * nb / n,
            m2: self.m2 + other.m2 + d2 * na * nb / n,
            m3: self.m3 + other.m3 + d3 * na * nb * (na - nb) / (n * n)
                + 3.0 * d * (na * other.m2 - nb * self.m2) / n,
            m4: self.m4
                + other.m4
                + d4 * na * nb * (na * na - na * nb + nb * nb) / (n * n * n)
                + 6.0 * d2 * (na * na * other.m2 + nb * nb * self.m2) / (n * n)
                + 4.0 * d * (na * other.m3 - nb * self.m3) / n,
        }
    }

    /// Pairwise-tree reduction in index order: `((0,1),(2,3)),...`.
    pub fn merge_tree(parts: &[Estimator]) -> Estimator {
        match parts.len() {
            0 => Estimator::new(),
            1 => parts[0],
            n => {
                let (a, b) = parts.split_at(n.div_ceil(2));
                Self::merge_tree(a).merge(&Self::merge_tree(b))
            }
        }
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    /// Unbiased variance.
    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            return f64::NAN;
        }
        self.m2 / (self.n as f64 - 1.0)
    }

    pub fn std_dev(&self) -> f64 {
        self.variance().sqrt()
    }

    /// Standard error of the mean.
    pub fn stderr(&self) -> f64 {
        (self.variance() / self.n as f64).sqrt()
    }

    /// Unbiased third cumulant (k-statistic).
    pub fn k3(&self) -> f64 {
        let n = self.n as f64;
        n * self.m3 / ((n - 1.0) * (n - 2.0))
    }

    /// Unbiased fourth cumulant (k-statistic).
    pub fn k4(&self) -> f64 {
        let n = self.n as f64;
        (n * (n + 1.0) * self.m4 - 3.0 * (n - 1.0) * self.m2 * self.m2) / ((n - 1.0) * (n - 2.0) * (n - 3.0))
    }
}

/// Counts by integer bin (cluster size), with per-bin energy sums and a
/// normalization (e.g. total activity or particle number across runs).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub counts: BTreeMap<usize, u64>,
    pub energy: BTreeMap<usize, f64>,
    pub normalization: f64,
}

impl Histogram {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, bin: usize, energy: f64) {
        *self.counts.entry(bin).or_insert(0) += 1;
        *self.energy.entry(bin).or_insert(0.0) += energy;
    }

    pub fn merge(&mut self, other: &Histogram) {
        for (&b, &c) in &other.counts {
            *self.counts.entry(b).or_insert(0) += c;
        }
        for (&b, &e) in &other.energy {
            *self.energy.entry(b).or_insert(0.0) += e;
        }
        self.normalization += other.normalization;
    }

    pub fn total(&self) -> u64 {
        self.counts.values().sum()
    }

    /// Fraction of entries in each bin.
    pub fn frequencies(&self) -> BTreeMap<usize, f64> {
        let t = self.total() as f64;
        self.counts.iter().map(|(&b, &c)| (b, c as f64 / t)).collect()
    }

    /// Counts divided by the normalization.
    pub fn normalized(&self) -> BTreeMap<usize, f64> {
        self.counts.iter().map(|(&b, &c)| (b, c as f64 / self.normalization)).collect()
    }

    /// Sum over bins of `bin * count`.
    pub fn mass(&self) -> u64 {
        self.counts.iter().map(|(&b, &c)| b as u64 * c).sum()
    }
}

/// Total-variation distance between two probability vectors keyed by bin.
pub fn total_variation(p: &BTreeMap<usize, f64>, q: &BTreeMap<usize, f64>) -> f64 {
    let mut keys: Vec<usize> = p.keys().chain(q.keys()).copied().collect();
    keys.sort_unstable();
    keys.dedup();
    0.5 * keys
        .iter()
        .map(|k| (p.get(k).copied().unwrap_or(0.0) - q.get(k).copied().unwrap_or(0.0)).abs())
        .sum::<f64>()
}

/// Delete-one-block jackknife. `stat(None)` is the full estimate and
/// `stat(Some(b))` the estimate without block `b`.
pub fn jackknife(n_blocks: usize, stat: impl Fn(Option<usize>) -> f64) -> (f64, f64) {
    let full = stat(None);
    if n_blocks < 2 {
        return (full, f64::NAN);
    }
    let loo: Vec<f64> = (0..n_blocks).map(|b| stat(Some(b))).collect();
    let m = loo.iter().sum::<f64>() / n_blocks as f64;
    let b = n_blocks as f64;
    let var = (b - 1.0) / b * loo.iter().map(|x| (x - m) * (x - m)).sum::<f64>();
    (full, var.sqrt())
}

/// Unbiased cumulant estimates (k-statistics) of orders 1..=3 from power
/// sums of centred data.
pub fn k_statistics(n: f64, s1: f64, s2: f64, s3: f64) -> [f64; 3] {
    let k1 = s1 / n;
    let k2 = (n * s2 - s1 * s1) / (n * (n - 1.0));
    let k3 = (2.0 * s1 * s1 * s1 - 3.0 * n * s1 * s2 + n * n * s3) / (n * (n - 1.0) * (n - 2.0));
    [k1, k2, k3]
}

/// k-statistics of `xs` with delete-one jackknife standard errors.
pub fn cumulants_with_errors(xs: &[f64]) -> [(f64, f64); 3] {
    let n = xs.len() as f64;
    let c = xs.iter().sum::<f64>() / n;
    let (mut s1, mut s2, mut s3) = (0.0, 0.0, 0.0);
    for &x in xs {
        let y = x - c;
        s1 += y;
        s2 += y * y;
        s3 += y * y * y;
    }
    let full = k_statistics(n, s1, s2, s3);
    let mut loo = vec![[0.0; 3]; xs.len()];
    for (r, &x) in xs.iter().enumerate() {
        let y = x - c;
        loo[r] = k_statistics(n - 1.0, s1 - y, s2 - y * y, s3 - y * y * y);
    }
    let mut out = [(0.0, 0.0); 3];
    for o in 0..3 {
        let m = loo.iter().map(|k| k[o]).sum::<f64>() / n;
        let var = (n - 1.0) / n * loo.iter().map(|k| (k[o] - m).powi(2)).sum::<f64>();
        let est = if o == 0 { full[0] + c } else { full[o] };
        out[o] = (est, var.sqrt());
    }
    out
}

/// Weighted least-squares line `y = intercept + slope x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_stderr: f64,
    pub intercept_stderr: f64,
    pub chi2: f64,
}

impl LinearFit {
    /// 95% normal-approximation interval for the slope.
    pub fn slope_ci95(&self) -> (f64, f64) {
        (self.slope - 1.96 * self.slope_stderr, self.slope + 1.96 * self.slope_stderr)
    }
}

pub fn weighted_linear_fit(x: &[f64], y: &[f64], sigma: &[f64]) -> LinearFit {
    assert!(x.len() == y.len() && y.len() == sigma.len() && x.len() >= 2);
    let (mut s, mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for k in 0..x.len() {
        let w = 1.0 / (sigma[k] * sigma[k]);
        s += w;
        sx += w * x[k];
        sy += w * y[k];
        sxx += w * x[k] * x[k];
        sxy += w * x[k] * y[k];
    }
    let det = s * sxx - sx * sx;
    let slope = (s * sxy - sx * sy) / det;
    let intercept = (sxx * sy - sx * sxy) / det;
    let chi2 = (0..x.len())
        .map(|k| ((y[k] - intercept - slope * x[k]) / sigma[k]).powi(2))
        .sum();
    LinearFit {
        slope,
        intercept,
        slope_stderr: (s / det).sqrt(),
        intercept_stderr: (sxx / det).sqrt(),
        chi2,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn estimator_matches_two_pass() {
        let xs: Vec<f64> = (0..1000).map(|k| ((k * 7919) % 1013) as f64 / 100.0 + (k as f64).sin()).collect();
        let e = Estimator::from_slice(&xs);
        let n = xs.len() as f64;
        let m = xs.iter().sum::<f64>() / n;
        let c = |p: i32| xs.iter().map(|x| (x - m).powi(p)).sum::<f64>();
        assert!((e.mean - m).abs() < 1e-12);
        assert!((e.m2 - c(2)).abs() < 1e-9 * c(2));
        assert!((e.m3 - c(3)).abs() < 1e-9 * c(3).abs().max(1.0));
        assert!((e.m4 - c(4)).abs() < 1e-9 * c(4));
        let parts: Vec<Estimator> = xs.chunks(37).map(Estimator::from_slice).collect();
        let t = Estimator::merge_tree(&parts);
        assert_eq!(t.n, e.n);
        assert!((t.mean - e.mean).abs() < 1e-12);
        assert!((t.m2 - e.m2).abs() < 1e-12 * e.m2);
        assert!((t.m4 - e.m4).abs() < 1e-12 * e.m4);
    }

    #[test]
    fn k_statistics_small_sample() {
        // exact values for {1, 2, 4}: k2 = 7/3, k3 = 10/3
        let [k1, k2, k3] = k_statistics(3.0, 7.0, 21.0, 73.0);
        assert!((k1 - 7.0 / 3.0).abs() < 1e-12);
        assert!((k2 - 7.0 / 3.0).abs() < 1e-12);
        assert!((k3 - 10.0 / 3.0).abs() < 1e-12);
        let e = Estimator::from_slice(&[1.0, 2.0, 4.0]);
        assert!((e.k3() - 10.0 / 3.0).abs() < 1e-12);
        let c = cumulants_with_errors(&[1.0, 2.0, 4.0, 8.0]);
        assert!((c[0].0 - 3.75).abs() < 1e-12);
    }

    #[test]
    fn linear_fit_exact_line() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y = [1.0, 3.0, 5.0, 7.0];
        let f = weighted_linear_fit(&x, &y, &[0.1; 4]);
        assert!((f.slope - 2.0).abs() < 1e-12 && (f.intercept - 1.0).abs() < 1e-12);
        assert!(f.chi2 < 1e-20);
    }

    #[test]
    fn tv_distance() {
        let p: BTreeMap<usize, f64> = [(1, 0.5), (2, 0.5)].into_iter().collect();
        let q: BTreeMap<usize, f64> = [(1, 0.25), (3, 0.75)].into_iter().collect();
        assert!((total_variation(&p, &q) - 0.75).abs() < 1e-15);
    }

    #[test]
    fn jackknife_of_mean_is_standard_error() {
        let xs = [1.0, 3.0, 4.0, 10.0];
        let (m, se) = jackknife(4, |skip| {
            let v: Vec<f64> = xs.iter().enumerate().filter(|(k, _)| Some(*k) != skip).map(|(_, &x)| x).collect();
            v.iter().sum::<f64>() / v.len() as f64
        });
        let e = Estimator::from_slice(&xs);
        assert!((m - e.mean).abs() < 1e-12 && (se - e.stderr()).abs() < 1e-12);
    }
}
