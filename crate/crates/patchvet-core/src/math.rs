//! Thin wrappers over [`libm`] for the float transcendentals used in this
//! crate.
//!
//! Routing every call through one place guarantees bit-identical results on
//! every platform and under `no_std`, which the reproducibility guarantees of
//! the evaluation pipeline depend on. Do not call `f64::exp` and friends
//! directly elsewhere in the crate.

/// `e^x`.
#[inline]
pub fn exp(x: f64) -> f64 {
    libm::exp(x)
}

/// Natural logarithm.
#[inline]
pub fn ln(x: f64) -> f64 {
    libm::log(x)
}

/// Square root.
#[inline]
pub fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

/// Hyperbolic tangent.
#[inline]
pub fn tanh(x: f64) -> f64 {
    libm::tanh(x)
}

/// `x^y` for real exponents.
#[inline]
pub fn pow(x: f64, y: f64) -> f64 {
    libm::pow(x, y)
}

/// Absolute value. (`f64::abs` lives in `std`, not `core`.)
#[inline]
pub fn abs(x: f64) -> f64 {
    libm::fabs(x)
}

/// Complementary error function, used by the normal approximation of the
/// Wilcoxon signed-rank test.
#[inline]
pub fn erfc(x: f64) -> f64 {
    libm::erfc(x)
}

/// Standard normal survival function `P(Z >= z)`.
#[inline]
pub fn normal_sf(z: f64) -> f64 {
    0.5 * erfc(z / core::f64::consts::SQRT_2)
}
