use crate::cluster::{partition_cluster_paths, InteractionGraph};
use crate::error::{Error, Result};
use crate::stats::{cumulants_with_errors, weighted_linear_fit, LinearFit};
use crate::trajectory::RunRecord;

use super::functional::TestFunctional;

/// Largest exponent accepted before `exp` is considered unsafe.
pub const EXPONENT_GUARD: f64 = 700.0;

/// `sum_i h(z_i([0,T]))` for each run. Fails for cluster-level functionals.
pub fn single_particle_sums<const D: usize>(runs: &[RunRecord<D>], h: &TestFunctional<D>) -> Result<Vec<f64>> {
    if !h.is_single_particle() {
        return Err(Error::InvalidParameter(
            "single-particle sums need a single-particle functional".into(),
        ));
    }
    Ok(runs
        .iter()
        .map(|r| r.trajectories.iter().map(|t| h.eval_single(t).unwrap_or(0.0)).sum())
        .collect())
}

/// `sum_lambda H(lambda)` over each run's cluster paths.
pub fn cluster_sums<const D: usize>(runs: &[RunRecord<D>], h: &TestFunctional<D>) -> Vec<f64> {
    runs.iter()
        .map(|r| {
            let g = InteractionGraph::from_log(r.n(), &r.log);
            partition_cluster_paths(&g, &r.trajectories)
                .iter()
                .map(|p| h.eval(&p.trajectories))
                .sum()
        })
        .collect()
}

/// `mu^-1 log E[exp(u S)]` at one `u`, with delete-one jackknife error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LambdaPoint {
    pub u: f64,
    pub value: f64,
    pub stderr: f64,
}

fn log_mean_exp(xs: impl Iterator<Item = f64> + Clone, skip: Option<usize>) -> f64 {
    let a = xs
        .clone()
        .enumerate()
        .filter(|(r, _)| Some(*r) != skip)
        .map(|(_, x)| x)
        .fold(f64::NEG_INFINITY, f64::max);
    let mut s = 0.0;
    let mut m = 0usize;
    for (r, x) in xs.enumerate() {
        if Some(r) != skip {
            s += (x - a).exp();
            m += 1;
        }
    }
    a + (s / m as f64).ln()
}

/// Empirical exponential moment from per-run sums `S_r` (see
/// [`single_particle_sums`], [`cluster_sums`]).
pub fn empirical_exponential_moment(sums: &[f64], mu: f64, u_grid: &[f64]) -> Result<Vec<LambdaPoint>> {
    if sums.len() < 2 {
        return Err(Error::InvalidParameter("need at least two runs".into()));
    }
    let n = sums.len();
    u_grid
        .iter()
        .map(|&u| {
            if let Some(x) = sums.iter().map(|s| u * s).find(|x| x.abs() > EXPONENT_GUARD) {
                return Err(Error::OverflowGuard(x));
            }
            if u == 0.0 || sums.iter().all(|&s| s == 0.0) {
                return Ok(LambdaPoint { u, value: 0.0, stderr: 0.0 });
            }
            let xs = sums.iter().map(move |s| u * s);
            let full = log_mean_exp(xs.clone(), None) / mu;
            let loo: Vec<f64> = (0..n).map(|r| log_mean_exp(xs.clone(), Some(r)) / mu).collect();
            let m = loo.iter().sum::<f64>() / n as f64;
            let var = (n as f64 - 1.0) / n as f64 * loo.iter().map(|x| (x - m).powi(2)).sum::<f64>();
            Ok(LambdaPoint {
                u,
                value: full,
                stderr: var.sqrt(),
            })
        })
        .collect()
}

/// `E[exp(i u S)]` as `(u, re, im)`; every weight has modulus one.
pub fn empirical_characteristic_function(sums: &[f64], u_grid: &[f64]) -> Vec<(f64, f64, f64)> {
    let n = sums.len().max(1) as f64;
    u_grid
        .iter()
        .map(|&u| {
            let (re, im) = sums
                .iter()
                .fold((0.0, 0.0), |(a, b), s| (a + (u * s).cos(), b + (u * s).sin()));
            (u, re / n, im / n)
        })
        .collect()
}

/// Cumulants of `mu^-1 S` of orders 1..=3 (k-statistics of `S` divided by
/// `mu^n`), with delete-one jackknife errors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CumulantEstimate {
    pub mu: f64,
    pub n_runs: usize,
    pub values: [f64; 3],
    pub stderrs: [f64; 3],
}

pub fn cumulant_estimates(sums: &[f64], mu: f64) -> Result<CumulantEstimate> {
    if sums.len() < 4 {
        return Err(Error::InvalidParameter("need at least four runs for cumulants".into()));
    }
    let c = cumulants_with_errors(sums);
    let mut values = [0.0; 3];
    let mut stderrs = [0.0; 3];
    for o in 0..3 {
        let scale = mu.powi(o as i32 + 1);
        values[o] = c[o].0 / scale;
        stderrs[o] = c[o].1 / scale;
    }
    Ok(CumulantEstimate {
        mu,
        n_runs: sums.len(),
        values,
        stderrs,
    })
}

/// Fit of `log |kappa_n|` against `log mu` for `order` in 1..=3. The log
/// error is the relative error of the cumulant.
pub fn fit_cumulant_decay(points: &[CumulantEstimate], order: usize) -> Result<LinearFit> {
    if !(1..=3).contains(&order) || points.len() < 2 {
        return Err(Error::InvalidParameter("decay fit needs order 1..=3 and two points".into()));
    }
    let o = order - 1;
    let mut x = Vec::new();
    let mut y = Vec::new();
    let mut s = Vec::new();
    for p in points {
        let v = p.values[o];
        if v == 0.0 || !v.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "cumulant of order {order} vanishes at mu = {}",
                p.mu
            )));
        }
        x.push(p.mu.ln());
        y.push(v.abs().ln());
        s.push((p.stderrs[o] / v.abs()).max(1e-12));
    }
    Ok(weighted_linear_fit(&x, &y, &s))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_functional_gives_zero() {
        let sums = vec![0.0; 10];
        let pts = empirical_exponential_moment(&sums, 50.0, &[-1.0, 0.5, 2.0]).unwrap();
        assert!(pts.iter().all(|p| p.value == 0.0));
    }

    #[test]
    fn overflow_guard() {
        let sums = vec![1.0, 800.0];
        assert!(matches!(
            empirical_exponential_moment(&sums, 1.0, &[1.0]),
            Err(Error::OverflowGuard(_))
        ));
    }

    #[test]
    fn derivative_at_zero_is_mean() {
        let sums: Vec<f64> = (0..200).map(|r| ((r * 37) % 23) as f64).collect();
        let mu = 10.0;
        let h = 1e-4;
        let pts = empirical_exponential_moment(&sums, mu, &[-h, h]).unwrap();
        let d = (pts[1].value - pts[0].value) / (2.0 * h);
        let mean = sums.iter().sum::<f64>() / sums.len() as f64 / mu;
        assert!((d - mean).abs() < 1e-6, "{d} vs {mean}");
    }

    #[test]
    fn characteristic_function_has_unit_modulus_bound() {
        let sums = [0.3, 1.7, 2.2];
        for (_, re, im) in empirical_characteristic_function(&sums, &[0.0, 1.0, 5.0]) {
            assert!(re * re + im * im <= 1.0 + 1e-12);
        }
        assert_eq!(empirical_characteristic_function(&sums, &[0.0])[0].1, 1.0);
    }

    #[test]
    fn decay_fit_recovers_power_law() {
        let pts: Vec<CumulantEstimate> = [10.0f64, 20.0, 40.0]
            .iter()
            .map(|&mu| CumulantEstimate {
                mu,
                n_runs: 100,
                values: [1.0, 2.0 / mu, 3.0 / (mu * mu)],
                stderrs: [0.01, 0.01 / mu, 0.01 / (mu * mu)],
            })
            .collect();
        assert!((fit_cumulant_decay(&pts, 2).unwrap().slope + 1.0).abs() < 1e-12);
        assert!((fit_cumulant_decay(&pts, 3).unwrap().slope + 2.0).abs() < 1e-12);
    }
}
