//! Quadrature rules: Gauss-Legendre (Newton on the Legendre recurrence),
//! adaptive panel integration, closed Clenshaw-Curtis, and composite Boole
//! (5-point Newton-Cotes) weights on uniform grids.

use num_complex::Complex64;
use std::sync::OnceLock;

/// Gauss-Legendre nodes and weights on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        // Chebyshev-like initial guess for the i-th positive root
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_pd(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
        let (_, d) = legendre_pd(n, 0.0);
        weights[n / 2] = 2.0 / (d * d);
    }
    (nodes, weights)
}

fn legendre_pd(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

fn gl12() -> &'static (Vec<f64>, Vec<f64>) {
    static GL: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    GL.get_or_init(|| gauss_legendre(12))
}

/// Fixed 12-point Gauss-Legendre on [a, b].
pub fn gl_fixed<F>(f: &F, a: f64, b: f64) -> Complex64
where
    F: Fn(f64) -> Complex64,
{
    let (xs, ws) = gl12();
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut acc = Complex64::default();
    for (x, w) in xs.iter().zip(ws) {
        acc += f(mid + half * x) * *w;
    }
    acc * half
}

/// Adaptive bisection quadrature with a Gauss-Legendre panel rule. The error
/// estimate on each panel compares the single-panel value against the sum over
/// its halves. Returns `(integral, error_estimate)`.
pub fn adaptive_quad<F>(f: &F, a: f64, b: f64, tol: f64) -> (Complex64, f64)
where
    F: Fn(f64) -> Complex64,
{
    fn recurse<F>(
        f: &F,
        a: f64,
        b: f64,
        whole: Complex64,
        tol: f64,
        depth: usize,
        err: &mut f64,
    ) -> Complex64
    where
        F: Fn(f64) -> Complex64,
    {
        let m = 0.5 * (a + b);
        let left = gl_fixed(f, a, m);
        let right = gl_fixed(f, m, b);
        let two = left + right;
        let delta = (two - whole).norm();
        // the relative floor keeps the recursion from chasing tolerances
        // below machine noise
        if delta < tol.max(4e-16 * two.norm()) || depth >= 40 {
            *err += delta;
            return two;
        }
        recurse(f, a, m, left, tol * 0.5, depth + 1, err)
            + recurse(f, m, b, right, tol * 0.5, depth + 1, err)
    }
    let whole = gl_fixed(f, a, b);
    let mut err = 0.0;
    let v = recurse(f, a, b, whole, tol, 0, &mut err);
    (v, err)
}

/// Real-valued adaptive quadrature.
pub fn adaptive_quad_real<F>(f: &F, a: f64, b: f64, tol: f64) -> (f64, f64)
where
    F: Fn(f64) -> f64,
{
    let (v, e) = adaptive_quad(&|x| Complex64::new(f(x), 0.0), a, b, tol);
    (v.re, e)
}

/// Closed Clenshaw-Curtis rule with `n+1` nodes on [a, b] (n even). Returns
/// nodes in increasing order with their weights.
pub fn clenshaw_curtis(n: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 2 && n % 2 == 0);
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let mut nodes = vec![0.0; n + 1];
    let mut weights = vec![0.0; n + 1];
    for j in 0..=n {
        let theta = std::f64::consts::PI * j as f64 / n as f64;
        // cos(theta) decreasing; store reversed for increasing nodes
        nodes[n - j] = mid + half * theta.cos();
        let mut s = 1.0;
        for k in 1..=n / 2 {
            let bk = if k == n / 2 { 1.0 } else { 2.0 };
            s -= bk * (2.0 * k as f64 * theta).cos() / ((4 * k * k - 1) as f64);
        }
        let cj = if j == 0 || j == n { 1.0 } else { 2.0 };
        weights[n - j] = half * cj * s / n as f64;
    }
    (nodes, weights)
}

/// Weights of the composite Boole (5-point Newton-Cotes, order Q=5) rule on a
/// uniform grid of `n` nodes spanning [a, b]; requires n = 1 (mod 4).
pub fn composite_boole_weights(n: usize, a: f64, b: f64) -> Vec<f64> {
    assert!(n >= 5 && (n - 1) % 4 == 0, "need n = 1 (mod 4), got {n}");
    let h = (b - a) / (n - 1) as f64;
    let mut w = vec![0.0; n];
    let panel = [7.0, 32.0, 12.0, 32.0, 7.0];
    let scale = 2.0 * h / 45.0;
    let mut i = 0;
    while i + 4 < n {
        for (j, pw) in panel.iter().enumerate() {
            w[i + j] += scale * pw;
        }
        i += 4;
    }
    w
}

/// Single 5-point Boole panel over `[x0, x0 + 4*h]`: node positions and
/// weights. Used for the partial panels of the split transverse integral.
pub fn boole_panel(x0: f64, h: f64) -> ([f64; 5], [f64; 5]) {
    let nodes = [x0, x0 + h, x0 + 2.0 * h, x0 + 3.0 * h, x0 + 4.0 * h];
    let s = 2.0 * h / 45.0;
    let weights = [7.0 * s, 32.0 * s, 12.0 * s, 32.0 * s, 7.0 * s];
    (nodes, weights)
}
