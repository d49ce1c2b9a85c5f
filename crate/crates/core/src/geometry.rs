//! Torus geometry, free flight, pair collision prediction, scattering and
//! first-contact root finding on recorded piecewise-linear paths.
//!
//! Conventions: `omega` always points from particle `j` to particle `i`
//! (`omega = (x_i - x_j) / eps` at contact), so a pair is incoming iff
//! `(v_i - v_j) . omega < 0`.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trajectory::Trajectory;
use crate::vector::{self, Vector};

/// Relative tolerance on separations, in units of `eps`.
pub const CONTACT_TOL: f64 = 1e-9;
/// Radial relative speeds below this are grazing and produce no collision.
pub const GRAZING_TOL: f64 = 1e-12;

/// Position on the unit torus plus velocity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhasePoint<const D: usize> {
    #[serde(with = "serde_arrays")]
    pub x: Vector<D>,
    #[serde(with = "serde_arrays")]
    pub v: Vector<D>,
}

impl<const D: usize> PhasePoint<D> {
    /// Checked constructor: `x` must already lie in `[0,1)^D`, `v` finite.
    pub fn new(x: Vector<D>, v: Vector<D>) -> Result<Self> {
        if !x.iter().all(|c| (0.0..1.0).contains(c)) {
            return Err(Error::CorruptState(format!("position {x:?} outside [0,1)")));
        }
        if !vector::is_finite(&v) {
            return Err(Error::CorruptState(format!("non-finite velocity {v:?}")));
        }
        Ok(Self { x, v })
    }

    /// Wraps `x` onto the torus.
    pub fn wrapped(x: Vector<D>, v: Vector<D>) -> Self {
        Self { x: wrap(&x), v }
    }
}

/// Contact time and direction for a pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Contact<const D: usize> {
    pub t: f64,
    pub omega: Vector<D>,
}

/// A contact attributed to a particle pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContactEvent<const D: usize> {
    pub t: f64,
    pub omega: Vector<D>,
    pub pair: (usize, usize),
}

#[inline]
pub fn wrap_coord(c: f64) -> f64 {
    let w = c - c.floor();
    // c slightly below an integer can round up to exactly 1.0
    if w >= 1.0 {
        0.0
    } else {
        w
    }
}

#[inline]
pub fn wrap<const D: usize>(x: &Vector<D>) -> Vector<D> {
    std::array::from_fn(|k| wrap_coord(x[k]))
}

/// Minimal-image representative of `b - a`, each component in `[-1/2, 1/2)`.
#[inline]
pub fn torus_displacement<const D: usize>(a: &Vector<D>, b: &Vector<D>) -> Vector<D> {
    std::array::from_fn(|k| {
        let d = b[k] - a[k];
        d - (d + 0.5).floor()
    })
}

#[inline]
pub fn torus_distance<const D: usize>(a: &Vector<D>, b: &Vector<D>) -> f64 {
    vector::norm(&torus_displacement(a, b))
}

pub fn free_flight<const D: usize>(z: &PhasePoint<D>, dt: f64) -> PhasePoint<D> {
    PhasePoint {
        x: wrap(&vector::axpy(&z.x, dt, &z.v)),
        v: z.v,
    }
}

/// Specular exchange of the normal relative velocity component.
#[inline]
pub fn scatter<const D: usize>(
    vi: &Vector<D>,
    vj: &Vector<D>,
    omega: &Vector<D>,
) -> (Vector<D>, Vector<D>) {
    let c = vector::dot(&vector::sub(vi, vj), omega);
    (vector::axpy(vi, -c, omega), vector::axpy(vj, c, omega))
}

/// Earliest `t >= 0` with `|r + t w| = eps` reached from outside while
/// approaching. `r` is `x_i - x_j`, `w` is `v_i - v_j`. Grazing roots are
/// dropped when `grazing` is set.
#[inline]
pub(crate) fn entry_root<const D: usize>(
    r: &Vector<D>,
    w: &Vector<D>,
    eps: f64,
    grazing: bool,
) -> Option<f64> {
    let b = vector::dot(r, w);
    if b >= 0.0 {
        return None;
    }
    let a = vector::norm2(w);
    let c = vector::norm2(r) - eps * eps;
    let disc = b * b - a * c;
    if disc < 0.0 {
        return None;
    }
    let sq = disc.sqrt();
    if grazing && sq <= GRAZING_TOL * eps {
        return None;
    }
    // c / (-b + sq) is the small root without cancellation
    Some((c / (sq - b)).max(0.0))
}

fn check_separation<const D: usize>(r: &Vector<D>, eps: f64) -> Result<()> {
    let lim = eps * (1.0 - CONTACT_TOL);
    if vector::norm2(r) < lim * lim {
        return Err(Error::CorruptState(format!(
            "pair separation {} below diameter {eps}",
            vector::norm(r)
        )));
    }
    Ok(())
}

/// Nearest-image collision prediction.
///
/// Valid when the pair cannot reach another periodic image within
/// `horizon`; the event engine guarantees this through its cell-crossing
/// horizons. Use [`pair_collision_time_scan`] otherwise.
pub fn pair_collision_time<const D: usize>(
    zi: &PhasePoint<D>,
    zj: &PhasePoint<D>,
    eps: f64,
    horizon: f64,
) -> Result<Option<Contact<D>>> {
    let r = torus_displacement(&zj.x, &zi.x);
    check_separation(&r, eps)?;
    let w = vector::sub(&zi.v, &zj.v);
    Ok(contact_from(&r, &w, eps, horizon, true))
}

#[inline]
fn contact_from<const D: usize>(
    r: &Vector<D>,
    w: &Vector<D>,
    eps: f64,
    horizon: f64,
    grazing: bool,
) -> Option<Contact<D>> {
    let t = entry_root(r, w, eps, grazing)?;
    if t > horizon {
        return None;
    }
    let rc = vector::axpy(r, t, w);
    Some(Contact {
        t,
        omega: vector::normalized(&rc)?,
    })
}

/// Collision prediction scanning every periodic image the relative motion
/// sweeps through within `horizon` (which must be finite).
pub fn pair_collision_time_scan<const D: usize>(
    zi: &PhasePoint<D>,
    zj: &PhasePoint<D>,
    eps: f64,
    horizon: f64,
) -> Result<Option<Contact<D>>> {
    let r0 = torus_displacement(&zj.x, &zi.x);
    check_separation(&r0, eps)?;
    let w = vector::sub(&zi.v, &zj.v);
    Ok(scan_images(&r0, &w, eps, horizon, true))
}

/// Earliest entry over all images `r0 + k`, `k` in `Z^D`, within `horizon`.
/// The zero image is evaluated with exactly the arithmetic of the
/// nearest-image predictor, so the two agree bit-for-bit when it wins.
pub(crate) fn scan_images<const D: usize>(
    r0: &Vector<D>,
    w: &Vector<D>,
    eps: f64,
    horizon: f64,
    grazing: bool,
) -> Option<Contact<D>> {
    assert!(horizon.is_finite(), "image scan needs a finite horizon");
    let mut lo = [0i64; D];
    let mut hi = [0i64; D];
    for c in 0..D {
        let end = r0[c] + horizon * w[c];
        let (mn, mx) = if end < r0[c] { (end, r0[c]) } else { (r0[c], end) };
        lo[c] = (-eps - mx).ceil() as i64;
        hi[c] = (eps - mn).floor() as i64;
        if lo[c] > hi[c] {
            return None;
        }
    }
    let mut best = contact_from(r0, w, eps, horizon, grazing);
    let mut k = lo;
    loop {
        if k.iter().any(|&c| c != 0) {
            let r: Vector<D> = std::array::from_fn(|c| r0[c] + k[c] as f64);
            if let Some(ct) = contact_from(&r, w, eps, horizon, grazing) {
                if best.is_none_or(|b| ct.t < b.t) {
                    best = Some(ct);
                }
            }
        }
        // odometer increment
        let mut c = 0;
        loop {
            if c == D {
                return best;
            }
            if k[c] < hi[c] {
                k[c] += 1;
                break;
            }
            k[c] = lo[c];
            c += 1;
        }
    }
}

/// Infimum time in `window` at which the two recorded paths are within
/// `eps` of each other (torus distance), with `omega = (x_i - x_j)/|..|`.
pub fn first_contact_time<const D: usize>(
    path_i: &Trajectory<D>,
    path_j: &Trajectory<D>,
    eps: f64,
    window: (f64, f64),
) -> Option<Contact<D>> {
    let (t0, t1) = window;
    let mut grid: Vec<f64> = Vec::with_capacity(path_i.len() + path_j.len() + 2);
    grid.push(t0);
    for bp in path_i.breakpoints().iter().chain(path_j.breakpoints()) {
        if bp.t > t0 && bp.t < t1 {
            grid.push(bp.t);
        }
    }
    grid.push(t1);
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    let inside = eps * eps * (1.0 + 2.0 * GRAZING_TOL);
    for win in grid.windows(2) {
        let (a, b) = (win[0], win[1]);
        let zi = path_i.state_at(a);
        let zj = path_j.state_at(a);
        let r0 = torus_displacement(&zj.x, &zi.x);
        if vector::norm2(&r0) <= inside {
            let omega = vector::normalized(&r0).unwrap_or_else(|| {
                let mut e = [0.0; D];
                e[0] = 1.0;
                e
            });
            return Some(Contact { t: a, omega });
        }
        let w = vector::sub(&zi.v, &zj.v);
        if let Some(ct) = scan_images(&r0, &w, eps, b - a, false) {
            return Some(Contact {
                t: a + ct.t,
                omega: ct.omega,
            });
        }
    }
    None
}

/// Surface area of the unit sphere in R^d.
pub fn sphere_area(d: usize) -> f64 {
    match d {
        1 => 2.0,
        2 => 2.0 * std::f64::consts::PI,
        3 => 4.0 * std::f64::consts::PI,
        _ => sphere_area(d - 2) * 2.0 * std::f64::consts::PI / (d as f64 - 2.0),
    }
}

/// `kappa_d = integral over the unit sphere of (e . omega)_+`.
pub fn kappa(d: usize) -> f64 {
    assert!(d >= 2);
    sphere_area(d - 1) / (d as f64 - 1.0)
}

pub fn sample_unit_vector<const D: usize, R: Rng + ?Sized>(rng: &mut R) -> Vector<D> {
    loop {
        let g: Vector<D> = std::array::from_fn(|_| rng.sample::<f64, _>(StandardNormal));
        if let Some(u) = vector::normalized(&g) {
            return u;
        }
    }
}

/// Draws `omega` on the sphere with density proportional to `(u . omega)_+`
/// for a unit vector `u`. Supported for D = 2 and D = 3.
pub fn sample_cross_section_direction<const D: usize, R: Rng + ?Sized>(
    u: &Vector<D>,
    rng: &mut R,
) -> Vector<D> {
    match D {
        2 => {
            let th = (2.0 * rng.random::<f64>() - 1.0).asin();
            let (s, c) = th.sin_cos();
            let mut o = [0.0; D];
            o[0] = c * u[0] - s * u[1];
            o[1] = s * u[0] + c * u[1];
            o
        }
        3 => {
            let ct = rng.random::<f64>().sqrt();
            let st = (1.0 - ct * ct).max(0.0).sqrt();
            let ph = 2.0 * std::f64::consts::PI * rng.random::<f64>();
            // orthonormal frame around u
            let a = if u[0].abs() < 0.9 { [1.0, 0.0, 0.0] } else { [0.0, 1.0, 0.0] };
            let u3 = [u[0], u[1], u[2]];
            let e1 = vector::normalized(&cross(&u3, &a)).expect("frame");
            let e2 = cross(&u3, &e1);
            let mut o = [0.0; D];
            for k in 0..3 {
                o[k] = ct * u3[k] + st * (ph.cos() * e1[k] + ph.sin() * e2[k]);
            }
            o
        }
        _ => unimplemented!("cross-section sampling is provided for d = 2, 3"),
    }
}

fn cross(a: &[f64; 3], b: &[f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

/// serde support for const-generic arrays (serde only derives up to 32 via
/// its own impls for fixed lengths, not for generic `N`).
pub(crate) mod serde_arrays {
    use serde::de::{Deserialize, Deserializer, Error};
    use serde::ser::{Serialize, Serializer};

    pub fn serialize<S: Serializer, const N: usize>(a: &[f64; N], s: S) -> Result<S::Ok, S::Error> {
        a.as_slice().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>, const N: usize>(d: D) -> Result<[f64; N], D::Error> {
        let v = Vec::<f64>::deserialize(d)?;
        v.try_into()
            .map_err(|v: Vec<f64>| D::Error::custom(format!("expected {N} components, got {}", v.len())))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn pp(x: [f64; 2], v: [f64; 2]) -> PhasePoint<2> {
        PhasePoint::new(x, v).unwrap()
    }

    #[test]
    fn displacement_examples() {
        let d = torus_displacement(&[0.1, 0.1], &[0.9, 0.1]);
        assert!((d[0] + 0.2).abs() < 1e-15 && d[1] == 0.0);
        assert_eq!(torus_displacement(&[0.3, 0.7], &[0.3, 0.7]), [0.0, 0.0]);
        assert_eq!(torus_displacement(&[0.0, 0.0], &[0.5, 0.0]), [-0.5, 0.0]);
        assert_eq!(torus_displacement(&[0.5, 0.0], &[0.0, 0.0]), [-0.5, 0.0]);
    }

    #[test]
    fn free_flight_examples() {
        let z = free_flight(&pp([0.5, 0.5], [1.0, 0.0]), 0.25);
        assert_eq!(z.x, [0.75, 0.5]);
        let z = free_flight(&pp([0.9, 0.5], [1.0, 0.0]), 0.2);
        assert!((z.x[0] - 0.1).abs() < 1e-15 && z.x[1] == 0.5);
        let z0 = pp([0.3, 0.2], [-0.4, 2.0]);
        assert_eq!(free_flight(&z0, 0.0), z0);
    }

    #[test]
    fn collision_examples() {
        let zi = pp([0.2, 0.5], [1.0, 0.0]);
        let zj = pp([0.7, 0.5], [0.0, 0.0]);
        let c = pair_collision_time(&zi, &zj, 0.1, 1.0).unwrap().unwrap();
        assert!((c.t - 0.4).abs() < 1e-12);
        assert!((c.omega[0] + 1.0).abs() < 1e-12 && c.omega[1].abs() < 1e-12);

        let zi = pp([0.2, 0.5], [-1.0, 0.0]);
        assert!(pair_collision_time(&zi, &zj, 0.1, 0.3).unwrap().is_none());
        assert!(pair_collision_time_scan(&zi, &zj, 0.1, 0.3).unwrap().is_none());
        // the long-way image is reached once the horizon admits it
        let c = pair_collision_time_scan(&zi, &zj, 0.1, 1.0).unwrap().unwrap();
        assert!((c.t - 0.4).abs() < 1e-12 && (c.omega[0] - 1.0).abs() < 1e-12);

        let zi = pp([0.95, 0.5], [1.0, 0.0]);
        let zj = pp([0.10, 0.5], [0.0, 0.0]);
        let c = pair_collision_time(&zi, &zj, 0.05, 1.0).unwrap().unwrap();
        assert!((c.t - 0.10).abs() < 1e-12);
    }

    #[test]
    fn overlapping_pair_is_corrupt() {
        let zi = pp([0.2, 0.5], [1.0, 0.0]);
        let zj = pp([0.25, 0.5], [0.0, 0.0]);
        assert!(matches!(
            pair_collision_time(&zi, &zj, 0.1, 1.0),
            Err(Error::CorruptState(_))
        ));
    }

    #[test]
    fn grazing_is_no_collision() {
        // exactly representable tangent approach
        let zi = pp([0.25, 0.625], [1.0, 0.0]);
        let zj = pp([0.75, 0.5], [0.0, 0.0]);
        assert!(pair_collision_time(&zi, &zj, 0.125, 1.0).unwrap().is_none());
    }

    #[test]
    fn scatter_examples() {
        assert_eq!(
            scatter(&[1.0, 0.0], &[-1.0, 0.0], &[1.0, 0.0]),
            ([-1.0, 0.0], [1.0, 0.0])
        );
        assert_eq!(
            scatter(&[1.0, 0.0], &[0.0, 0.0], &[0.0, 1.0]),
            ([1.0, 0.0], [0.0, 0.0])
        );
    }

    #[test]
    fn kappa_values() {
        assert!((kappa(2) - 2.0).abs() < 1e-15);
        assert!((kappa(3) - std::f64::consts::PI).abs() < 1e-15);
        // sphere quadrature in d = 3: integral of max(cos th, 0) sin th dth dphi
        let n = 20000;
        let h = std::f64::consts::PI / n as f64;
        let q: f64 = (0..n)
            .map(|k| {
                let th = (k as f64 + 0.5) * h;
                th.cos().max(0.0) * th.sin() * h
            })
            .sum::<f64>()
            * 2.0
            * std::f64::consts::PI;
        assert!((q - kappa(3)).abs() < 1e-6);
    }

    #[test]
    fn cross_section_direction_density() {
        // E[(u . omega)] under density (u.omega)_+/kappa equals
        // integral of (u.omega)_+^2 / kappa: pi/4 in d=2, 2/3 in d=3.
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let u2 = [0.6, 0.8];
        let m2: f64 = (0..100_000)
            .map(|_| vector::dot(&u2, &sample_cross_section_direction(&u2, &mut rng)))
            .sum::<f64>()
            / 1e5;
        assert!((m2 - std::f64::consts::PI / 4.0).abs() < 0.005);
        let u3 = [0.0, 0.6, 0.8];
        let m3: f64 = (0..100_000)
            .map(|_| vector::dot(&u3, &sample_cross_section_direction(&u3, &mut rng)))
            .sum::<f64>()
            / 1e5;
        assert!((m3 - 2.0 / 3.0).abs() < 0.005);
    }
}
