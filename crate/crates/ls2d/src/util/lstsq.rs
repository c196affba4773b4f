//! Small dense complex SVD (one-sided Jacobi) and truncated minimum-norm
//! least squares. The collocation systems this backs are ill conditioned by
//! construction, so solves go through a singular-value cutoff relative to the
//! largest singular value.

use num_complex::Complex64;

/// Column-major dense complex matrix.
#[derive(Clone)]
pub struct CMat {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<Complex64>, // column major
}

impl CMat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        CMat {
            rows,
            cols,
            data: vec![Complex64::default(); rows * cols],
        }
    }

    #[inline]
    pub fn at(&self, r: usize, c: usize) -> Complex64 {
        self.data[c * self.rows + r]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: Complex64) {
        self.data[c * self.rows + r] = v;
    }

    pub fn col(&self, c: usize) -> &[Complex64] {
        &self.data[c * self.rows..(c + 1) * self.rows]
    }

    pub fn matvec(&self, x: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(x.len(), self.cols);
        let mut y = vec![Complex64::default(); self.rows];
        for c in 0..self.cols {
            let xc = x[c];
            for r in 0..self.rows {
                y[r] += self.at(r, c) * xc;
            }
        }
        y
    }
}

/// Thin SVD `A = U diag(s) V^H` computed by one-sided Jacobi rotations on the
/// columns. Requires `rows >= cols`.
pub struct Svd {
    pub u: CMat,      // rows x cols, orthonormal columns
    pub v: CMat,      // cols x cols, unitary
    pub s: Vec<f64>,  // singular values, unsorted but positive
}

impl Svd {
    pub fn new(a: &CMat) -> Svd {
        assert!(a.rows >= a.cols, "one-sided Jacobi wants rows >= cols");
        let m = a.rows;
        let n = a.cols;
        let mut u = a.clone();
        let mut v = CMat::zeros(n, n);
        for i in 0..n {
            v.set(i, i, Complex64::new(1.0, 0.0));
        }
        let eps = 1e-15;
        for _sweep in 0..64 {
            let mut off = 0.0f64;
            for p in 0..n {
                for q in p + 1..n {
                    let mut alpha = 0.0;
                    let mut beta = 0.0;
                    let mut g = Complex64::default();
                    for r in 0..m {
                        let ap = u.at(r, p);
                        let aq = u.at(r, q);
                        alpha += ap.norm_sqr();
                        beta += aq.norm_sqr();
                        g += ap.conj() * aq;
                    }
                    let gn = g.norm();
                    if gn <= eps * (alpha * beta).sqrt() || gn == 0.0 {
                        continue;
                    }
                    off = off.max(gn / (alpha * beta).sqrt().max(f64::MIN_POSITIVE));
                    let phase = g / gn;
                    let zeta = (beta - alpha) / (2.0 * gn);
                    let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                    let c = 1.0 / (1.0 + t * t).sqrt();
                    let s = c * t;
                    for r in 0..m {
                        let ap = u.at(r, p);
                        let aq = u.at(r, q) * phase.conj();
                        u.set(r, p, ap * c - aq * s);
                        u.set(r, q, ap * s + aq * c);
                    }
                    for r in 0..n {
                        let vp = v.at(r, p);
                        let vq = v.at(r, q) * phase.conj();
                        v.set(r, p, vp * c - vq * s);
                        v.set(r, q, vp * s + vq * c);
                    }
                }
            }
            if off < 1e-14 {
                break;
            }
        }
        let mut s = vec![0.0; n];
        for c in 0..n {
            let norm: f64 = u.col(c).iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            s[c] = norm;
            if norm > 0.0 {
                let inv = 1.0 / norm;
                for r in 0..m {
                    let val = u.at(r, c) * inv;
                    u.set(r, c, val);
                }
            }
        }
        Svd { u, v, s }
    }

    /// Minimum-norm least-squares solve with singular values below
    /// `rtol * max(s)` truncated.
    pub fn solve(&self, b: &[Complex64], rtol: f64) -> Vec<Complex64> {
        let smax = self.s.iter().cloned().fold(0.0, f64::max);
        let n = self.v.rows;
        let mut x = vec![Complex64::default(); n];
        for j in 0..self.s.len() {
            if self.s[j] <= rtol * smax {
                continue;
            }
            let mut coef = Complex64::default();
            for r in 0..self.u.rows {
                coef += self.u.at(r, j).conj() * b[r];
            }
            coef /= self.s[j];
            for r in 0..n {
                x[r] += self.v.at(r, j) * coef;
            }
        }
        x
    }

    pub fn smin_smax(&self) -> (f64, f64) {
        let smax = self.s.iter().cloned().fold(0.0, f64::max);
        let smin = self.s.iter().cloned().fold(f64::INFINITY, f64::min);
        (smin, smax)
    }
}

/// Least squares for possibly underdetermined systems: factors `A` when tall,
/// otherwise `A^H`, and returns the truncated minimum-norm solution.
pub struct LstSq {
    svd: Svd,
    transposed: bool,
}

impl LstSq {
    pub fn new(a: &CMat) -> LstSq {
        if a.rows >= a.cols {
            LstSq {
                svd: Svd::new(a),
                transposed: false,
            }
        } else {
            let mut ah = CMat::zeros(a.cols, a.rows);
            for r in 0..a.rows {
                for c in 0..a.cols {
                    ah.set(c, r, a.at(r, c).conj());
                }
            }
            LstSq {
                svd: Svd::new(&ah),
                transposed: true,
            }
        }
    }

    pub fn solve(&self, b: &[Complex64], rtol: f64) -> Vec<Complex64> {
        if !self.transposed {
            return self.svd.solve(b, rtol);
        }
        // A = V S U^H  (from A^H = U S V^H); min-norm x = U S^+ V^H b
        let smax = self.svd.s.iter().cloned().fold(0.0, f64::max);
        let mut x = vec![Complex64::default(); self.svd.u.rows];
        for j in 0..self.svd.s.len() {
            if self.svd.s[j] <= rtol * smax {
                continue;
            }
            let mut coef = Complex64::default();
            for r in 0..self.svd.v.rows {
                coef += self.svd.v.at(r, j).conj() * b[r];
            }
            coef /= self.svd.s[j];
            for r in 0..self.svd.u.rows {
                x[r] += self.svd.u.at(r, j) * coef;
            }
        }
        x
    }

    pub fn smin_smax(&self) -> (f64, f64) {
        self.svd.smin_smax()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::util::c64;

    fn residual(a: &CMat, x: &[Complex64], b: &[Complex64]) -> f64 {
        let ax = a.matvec(x);
        ax.iter()
            .zip(b)
            .map(|(p, q)| (p - q).norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    #[test]
    fn overdetermined_consistent_system() {
        let mut a = CMat::zeros(6, 3);
        for r in 0..6 {
            for c in 0..3 {
                a.set(
                    r,
                    c,
                    c64(
                        ((r * 3 + c) as f64 * 0.37).sin(),
                        ((r + c) as f64 * 0.21).cos(),
                    ),
                );
            }
        }
        let xt = vec![c64(1.0, -2.0), c64(0.5, 0.25), c64(-3.0, 1.0)];
        let b = a.matvec(&xt);
        let x = LstSq::new(&a).solve(&b, 1e-13);
        assert!(residual(&a, &x, &b) < 1e-10);
        for (p, q) in x.iter().zip(&xt) {
            assert!((p - q).norm() < 1e-10);
        }
    }

    #[test]
    fn underdetermined_min_norm_reproduces_data() {
        let mut a = CMat::zeros(4, 9);
        for r in 0..4 {
            for c in 0..9 {
                a.set(
                    r,
                    c,
                    c64(((r * 9 + c) as f64).sin(), ((r * 5 + 2 * c) as f64).cos()),
                );
            }
        }
        let b = vec![c64(1.0, 0.0), c64(0.0, 1.0), c64(2.0, -1.0), c64(0.3, 0.7)];
        let x = LstSq::new(&a).solve(&b, 1e-13);
        assert!(residual(&a, &x, &b) < 1e-10);
    }
}
