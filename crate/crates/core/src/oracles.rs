//! Reference values computed independently of the estimators they check:
//! one-dimensional quadratures of Gaussian integrals and a direct rejection
//! sampler for the swept tube of a moving disk.

use rand::Rng;

use crate::rng::{stream, Domain};
use crate::vector::{self, Vector};

/// Composite Simpson rule with `n` (even) intervals.
pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let n = n + n % 2;
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for k in 1..n {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + k as f64 * h);
    }
    s * h / 3.0
}

/// `int_{S^{d-1}} (e . omega)_+ d omega` by quadrature in the polar angle.
pub fn kappa_quadrature(d: usize) -> f64 {
    let pi = std::f64::consts::PI;
    match d {
        2 => simpson(|th: f64| th.cos().max(0.0), -pi, pi, 20_000),
        3 => 2.0 * pi * simpson(|th: f64| th.cos().max(0.0) * th.sin(), 0.0, pi, 20_000),
        _ => unimplemented!("d = 2, 3"),
    }
}

/// `E|v - v'|` for independent Maxwellian velocities at inverse
/// temperature `beta` in dimension `d`: the relative velocity is centred
/// Gaussian with variance `2/beta` per component, so its norm has density
/// proportional to `r^(d-1) exp(-beta r^2 / 4)`.
pub fn mean_relative_speed(d: usize, beta: f64) -> f64 {
    let cut = 40.0 / beta.sqrt();
    let g = |p: i32| move |r: f64| r.powi(p) * (-beta * r * r / 4.0).exp();
    simpson(g(d as i32), 0.0, cut, 200_000) / simpson(g(d as i32 - 1), 0.0, cut, 200_000)
}

/// Small-diameter limit of the two-body cluster-path integral per unit
/// activity: `(1/2) T kappa_d E|v - v'|`.
pub fn two_body_limit(d: usize, beta: f64, horizon: f64) -> f64 {
    0.5 * horizon * kappa_quadrature(d) * mean_relative_speed(d, beta)
}

/// Probability that two points at independent uniform positions on the
/// unit torus, one at rest and one moving with velocity `w`, come within
/// distance `eps` during `(0, T]` without being within `eps` at time zero.
/// Rejection sampling of the relative position, with the point-to-segment
/// distance; returns the estimate and its standard error.
pub fn tube_overlap_probability<const D: usize>(eps: f64, w: &Vector<D>, horizon: f64, samples: usize, seed: u64) -> (f64, f64) {
    let mut rng = stream(seed, Domain::Validation, 1000);
    let seg = vector::scale(horizon, w);
    let len2 = vector::norm2(&seg);
    let mut hits = 0u64;
    for _ in 0..samples {
        let r: Vector<D> = std::array::from_fn(|_| rng.random::<f64>() - 0.5);
        if vector::norm(&r) < eps {
            continue;
        }
        // closest point of the segment r + s * seg, s in [0, 1], to the origin
        let s = if len2 > 0.0 {
            (-vector::dot(&r, &seg) / len2).clamp(0.0, 1.0)
        } else {
            0.0
        };
        if vector::norm(&vector::axpy(&r, s, &seg)) < eps {
            hits += 1;
        }
    }
    let p = hits as f64 / samples as f64;
    (p, (p * (1.0 - p) / samples as f64).sqrt())
}

/// Cosine mode `k` of the `x_1` density at time `t` under free transport
/// from `(1 + a cos 2 pi x_1) M_beta(v)`, by quadrature over `v_1`.
pub fn free_transport_mode(a: f64, beta: f64, k: usize, t: f64) -> f64 {
    if k != 1 {
        return 0.0;
    }
    let pi = std::f64::consts::PI;
    let m = |v: f64| (beta / (2.0 * pi)).sqrt() * (-beta * v * v / 2.0).exp();
    let cut = 40.0 / beta.sqrt();
    0.5 * a * simpson(|v| (2.0 * pi * v * t).cos() * m(v), -cut, cut, 200_000)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratures_match_closed_forms() {
        assert!((kappa_quadrature(2) - 2.0).abs() < 1e-8);
        assert!((kappa_quadrature(3) - std::f64::consts::PI).abs() < 1e-8);
        // Rayleigh mean with scale sqrt(2)
        assert!((mean_relative_speed(2, 1.0) - std::f64::consts::PI.sqrt()).abs() < 1e-9);
        let g = free_transport_mode(0.5, 1.0, 1, 0.2);
        let exact = 0.25 * (-(2.0 * std::f64::consts::PI * 0.2f64).powi(2) / 2.0).exp();
        assert!((g - exact).abs() < 1e-10);
    }

    #[test]
    fn tube_probability_near_swept_area() {
        let (p, se) = tube_overlap_probability(0.01, &[1.0, 0.0], 0.2, 400_000, 1);
        assert!((p - 0.004).abs() < 4.0 * se, "{p} +- {se}");
    }
}
