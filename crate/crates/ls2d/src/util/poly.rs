//! Local polynomial interpolation helpers (Neville's scheme).

use num_complex::Complex64;

/// Interpolates the polynomial through `(xs[i], ys[i])` at `x`.
pub fn neville(xs: &[f64], ys: &[Complex64], x: f64) -> Complex64 {
    let n = xs.len();
    let mut p = ys.to_vec();
    for level in 1..n {
        for i in 0..n - level {
            let denom = xs[i] - xs[i + level];
            p[i] = ((x - xs[i + level]) * p[i] - (x - xs[i]) * p[i + 1]) / denom;
        }
    }
    p[0]
}

/// Real-valued variant.
pub fn neville_real(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    let zs: Vec<Complex64> = ys.iter().map(|&y| Complex64::new(y, 0.0)).collect();
    neville(xs, &zs, x).re
}

/// Degree-`d` interpolation on a uniform grid `x_i = x0 + i*dx`,
/// `i = 0..len`, using the stencil of `d+1` nodes nearest to `x` (clamped to
/// the grid ends).
pub fn uniform_local_interp(
    x0: f64,
    dx: f64,
    values: &[Complex64],
    d: usize,
    x: f64,
) -> Complex64 {
    let len = values.len();
    let d = d.min(len - 1);
    let pos = (x - x0) / dx;
    let mut i0 = (pos - d as f64 / 2.0).round() as i64;
    i0 = i0.clamp(0, (len - 1 - d) as i64);
    let i0 = i0 as usize;
    let xs: Vec<f64> = (0..=d).map(|j| x0 + (i0 + j) as f64 * dx).collect();
    neville(&xs, &values[i0..=i0 + d], x)
}

/// Same stencil selection on a periodic uniform grid covering one period
/// `[x0, x0 + len*dx)`.
pub fn periodic_local_interp(
    x0: f64,
    dx: f64,
    values: &[Complex64],
    d: usize,
    x: f64,
) -> Complex64 {
    let len = values.len() as i64;
    let pos = (x - x0) / dx;
    let i0 = (pos - d as f64 / 2.0).round() as i64;
    let mut xs = Vec::with_capacity(d + 1);
    let mut ys = Vec::with_capacity(d + 1);
    for j in 0..=d as i64 {
        let i = i0 + j;
        xs.push(x0 + i as f64 * dx);
        ys.push(values[i.rem_euclid(len) as usize]);
    }
    neville(&xs, &ys, x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::util::c64;

    #[test]
    fn neville_reproduces_cubic() {
        let xs = [0.0, 1.0, 2.5, 4.0];
        let f = |x: f64| c64(2.0 * x * x * x - x + 1.0, x * x);
        let ys: Vec<Complex64> = xs.iter().map(|&x| f(x)).collect();
        for &x in &[0.3, 1.7, 3.9] {
            assert!((neville(&xs, &ys, x) - f(x)).norm() < 1e-12);
        }
    }

    #[test]
    fn periodic_interp_wraps() {
        let n = 32;
        let dx = 1.0 / n as f64;
        let f = |x: f64| c64((2.0 * std::f64::consts::TAU * x).cos(), 0.0);
        let vals: Vec<Complex64> = (0..n).map(|i| f(i as f64 * dx)).collect();
        let v = periodic_local_interp(0.0, dx, &vals, 6, 0.995);
        assert!((v - f(0.995)).norm() < 1e-6);
    }
}
