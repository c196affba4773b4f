//! Shared numerical machinery: FFT helpers, quadrature rules, local polynomial
//! interpolation, small dense least-squares, and the parallel-iteration shim.

pub mod fft;
pub mod lstsq;
pub mod par;
pub mod poly;
pub mod quad;

use num_complex::Complex64;

pub const TWO_PI: f64 = std::f64::consts::TAU;

/// Euler-Mascheroni constant.
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

#[inline]
pub fn c64(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Max norm of a complex vector.
pub fn max_norm(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Euclidean norm of a complex vector.
pub fn l2_norm(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Relative max-norm distance between two vectors, scaled by `max |a|`.
pub fn rel_max_err(a: &[Complex64], b: &[Complex64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let denom = max_norm(a).max(f64::MIN_POSITIVE);
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
        / denom
}

/// Relative L2 distance between two vectors.
pub fn rel_l2_err(a: &[Complex64], b: &[Complex64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let denom = l2_norm(a).max(f64::MIN_POSITIVE);
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum();
    diff.sqrt() / denom
}

#[inline]
pub fn next_pow2(n: usize) -> usize {
    n.next_power_of_two()
}
