//! Small fixed-size vector helpers on `[f64; D]`.

pub type Vector<const D: usize> = [f64; D];

#[inline]
pub fn zero<const D: usize>() -> Vector<D> {
    [0.0; D]
}

#[inline]
pub fn dot<const D: usize>(a: &Vector<D>, b: &Vector<D>) -> f64 {
    let mut s = 0.0;
    for k in 0..D {
        s += a[k] * b[k];
    }
    s
}

#[inline]
pub fn norm2<const D: usize>(a: &Vector<D>) -> f64 {
    dot(a, a)
}

#[inline]
pub fn norm<const D: usize>(a: &Vector<D>) -> f64 {
    norm2(a).sqrt()
}

#[inline]
pub fn add<const D: usize>(a: &Vector<D>, b: &Vector<D>) -> Vector<D> {
    std::array::from_fn(|k| a[k] + b[k])
}

#[inline]
pub fn sub<const D: usize>(a: &Vector<D>, b: &Vector<D>) -> Vector<D> {
    std::array::from_fn(|k| a[k] - b[k])
}

#[inline]
pub fn scale<const D: usize>(s: f64, a: &Vector<D>) -> Vector<D> {
    std::array::from_fn(|k| s * a[k])
}

/// `a + s * b`
#[inline]
pub fn axpy<const D: usize>(a: &Vector<D>, s: f64, b: &Vector<D>) -> Vector<D> {
    std::array::from_fn(|k| a[k] + s * b[k])
}

#[inline]
pub fn is_finite<const D: usize>(a: &Vector<D>) -> bool {
    a.iter().all(|c| c.is_finite())
}

/// Unit vector along `a`, or `None` for the zero vector.
pub fn normalized<const D: usize>(a: &Vector<D>) -> Option<Vector<D>> {
    let n = norm(a);
    if n > 0.0 && n.is_finite() {
        Some(scale(1.0 / n, a))
    } else {
        None
    }
}
