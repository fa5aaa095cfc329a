//! Gaussian helpers shared by the measurement models.

use std::f64::consts::SQRT_2;

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

#[inline]
pub fn normal_pdf(x: f64, mean: f64, sigma: f64) -> f64 {
    let u = (x - mean) / sigma;
    INV_SQRT_2PI / sigma * (-0.5 * u * u).exp()
}

/// Standard normal CDF, accurate in both tails.
#[inline]
pub fn std_normal_cdf(u: f64) -> f64 {
    0.5 * libm::erfc(-u / SQRT_2)
}

/// Standard normal survival function `1 - Φ(u)`, accurate in the upper tail.
#[inline]
pub fn std_normal_sf(u: f64) -> f64 {
    0.5 * libm::erfc(u / SQRT_2)
}

#[inline]
pub fn normal_cdf(x: f64, mean: f64, sigma: f64) -> f64 {
    std_normal_cdf((x - mean) / sigma)
}

/// Probability mass of `N(mean, sigma²)` on `[lo, hi]`, computed on the side of
/// the distribution where the subtraction does not cancel.
pub fn normal_interval_mass(lo: f64, hi: f64, mean: f64, sigma: f64) -> f64 {
    if hi <= lo {
        return 0.0;
    }
    let a = (lo - mean) / sigma;
    let b = (hi - mean) / sigma;
    let mass = if a > 0.0 {
        std_normal_sf(a) - std_normal_sf(b)
    } else if b < 0.0 {
        std_normal_cdf(b) - std_normal_cdf(a)
    } else {
        1.0 - std_normal_cdf(a) - std_normal_sf(b)
    };
    mass.max(0.0)
}

/// Gaussian on the circle approximated by the wrapped residual.
#[inline]
pub fn wrapped_normal_pdf(residual: f64, sigma: f64) -> f64 {
    INV_SQRT_2PI / sigma * (-0.5 * (residual / sigma).powi(2)).exp()
}
