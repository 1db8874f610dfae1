//! Thin wrappers over `libm` so the crate stays `no_std`.

#[inline]
pub(crate) fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

#[inline]
pub(crate) fn abs(x: f64) -> f64 {
    libm::fabs(x)
}

/// Euclidean length of a 2-vector.
#[inline]
pub(crate) fn hypot(dx: f64, dy: f64) -> f64 {
    sqrt(dx * dx + dy * dy)
}
