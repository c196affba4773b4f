//! Cross-grid coupling: evaluation of base-grid fields at boundary targets
//! (boundary-base interaction) and of boundary-grid fields at base targets in
//! the tube (base-boundary interaction), by FFT-refined polynomial
//! interpolation.

use crate::base_atm::{chebyshev_analyze, chebyshev_eval};
use crate::geometry::{CutoffSpec, Scatterer, Vec2};
use crate::grids::{BoundaryGrid, CartesianBaseGrid, PolarBaseGrid};
use crate::util::fft::{fft_inplace, fourier_upsample, ifft_inplace};
use crate::util::poly::{neville, periodic_local_interp};
use crate::util::TWO_PI;
use crate::{Error, Result};
use num_complex::Complex64;

/// Trigonometric refinement factor of the local interpolants.
pub const REFINE_FACTOR: usize = 4;
/// Local polynomial degree.
pub const POLY_DEGREE: usize = 6;

/// Smooth window, 1 on a rectangle containing the scatterer and decaying to 0
/// before the edge of the base square so the periodic extension stays smooth.
#[derive(Debug, Clone, Copy)]
pub struct WindowFunction {
    pub r_in: f64,
    pub r_out: f64,
}

impl WindowFunction {
    pub fn for_grid(scatterer: &Scatterer, grid: &CartesianBaseGrid) -> Result<WindowFunction> {
        let (lo, hi) = scatterer.shape.bounding_box();
        let r_in = lo.x.abs().max(lo.y.abs()).max(hi.x.abs()).max(hi.y.abs()) + 0.5 * grid.h;
        let r_out = grid.a - 2.0 * grid.h;
        if r_in >= r_out {
            return Err(Error::Config(format!(
                "window has no room to decay: {r_in} >= {r_out}"
            )));
        }
        Ok(WindowFunction { r_in, r_out })
    }

    fn profile(&self, u: f64) -> f64 {
        CutoffSpec { tau0: 1.0 }.eta((u.abs() - self.r_in) / (self.r_out - self.r_in))
    }

    pub fn eval(&self, p: Vec2) -> f64 {
        self.profile(p.x) * self.profile(p.y)
    }
}

/// Interpolant of `omega * field` on the Cartesian base grid by local
/// tensor polynomials of degree 6 on the windowed samples.
///
/// A trigonometrically refined intermediate grid (the route taken for the
/// ring interpolants, where the data is genuinely periodic-analytic) is not
/// used here: the window transition spans only `tau0 + O(h)` and its sampled
/// spectrum carries an aliasing floor near the Nyquist frequency, which a
/// global Fourier refinement smears over the whole domain. The local stencil
/// sees the same windowed samples as a smooth function and converges at
/// order d+1 without that pollution.
pub struct CartesianFieldInterp {
    a: f64,
    size: usize,
    h: f64,
    values: Vec<Complex64>, // size x size, windowed samples
}

impl CartesianFieldInterp {
    pub fn new(
        grid: &CartesianBaseGrid,
        window: &WindowFunction,
        field: &[Complex64],
    ) -> CartesianFieldInterp {
        let mut values = vec![Complex64::default(); grid.len()];
        for (idx, v) in values.iter_mut().enumerate() {
            *v = field[idx] * window.eval(grid.position(idx));
        }
        CartesianFieldInterp {
            a: grid.a,
            size: grid.size,
            h: grid.h,
            values,
        }
    }

    /// Local tensor polynomial of degree [`POLY_DEGREE`].
    pub fn eval(&self, p: Vec2) -> Complex64 {
        let d = POLY_DEGREE;
        let n = self.size as i64;
        let px = (p.x + self.a) / self.h;
        let py = (p.y + self.a) / self.h;
        let i0 = ((px - d as f64 / 2.0).round() as i64).clamp(0, n - 1 - d as i64);
        let j0 = ((py - d as f64 / 2.0).round() as i64).clamp(0, n - 1 - d as i64);
        let xs: Vec<f64> = (0..=d).map(|k| (i0 + k as i64) as f64).collect();
        let ys: Vec<f64> = (0..=d).map(|k| (j0 + k as i64) as f64).collect();
        let mut col_vals = Vec::with_capacity(d + 1);
        let mut row_buf = Vec::with_capacity(d + 1);
        for kj in 0..=d {
            let j = (j0 + kj as i64) as usize;
            row_buf.clear();
            for ki in 0..=d {
                let i = (i0 + ki as i64) as usize;
                row_buf.push(self.values[i * self.size + j]);
            }
            col_vals.push(neville(&xs, &row_buf, px));
        }
        neville(&ys, &col_vals, py)
    }
}

/// Interpolant of a field given on the polar base grid: exact Fourier series
/// in the angle, per-interval Chebyshev expansion in the radius.
pub struct PolarFieldInterp {
    center: Vec2,
    radius: f64,
    n_intervals: usize,
    n_cheb: usize,
    n_theta: usize,
    /// Chebyshev coefficients per (interval, FFT bin, degree)
    coeffs: Vec<Complex64>,
}

impl PolarFieldInterp {
    pub fn new(grid: &PolarBaseGrid, field: &[Complex64]) -> PolarFieldInterp {
        let m2 = grid.m2;
        let n_theta = grid.n_theta;
        let m1 = grid.radial.len();
        // angular spectra per radial node
        let mut spectra = Vec::with_capacity(m1);
        for g in 0..m1 {
            let mut ring: Vec<Complex64> = field[g * m2..g * m2 + n_theta].to_vec();
            fft_inplace(&mut ring);
            let scale = 1.0 / n_theta as f64;
            for z in ring.iter_mut() {
                *z *= scale;
            }
            spectra.push(ring);
        }
        let nc = grid.n_cheb;
        let mut coeffs = vec![Complex64::default(); grid.n_intervals * n_theta * nc];
        for m in 0..grid.n_intervals {
            let base = m * (nc + 1);
            for bin in 0..n_theta {
                // paper's decreasing-beta node order
                let samples_desc: Vec<Complex64> = (0..nc)
                    .map(|jm1| spectra[base + 1 + (nc - 1 - jm1)][bin])
                    .collect();
                let cn = chebyshev_analyze(&samples_desc);
                let off = (m * n_theta + bin) * nc;
                coeffs[off..off + nc].copy_from_slice(&cn);
            }
        }
        PolarFieldInterp {
            center: grid.center,
            radius: grid.radius,
            n_intervals: grid.n_intervals,
            n_cheb: grid.n_cheb,
            n_theta,
            coeffs,
        }
    }

    pub fn eval(&self, p: Vec2) -> Complex64 {
        let rel = p - self.center;
        let r = rel.norm().min(self.radius * (1.0 - 1e-14));
        let theta = rel.y.atan2(rel.x);
        let dr = self.radius / self.n_intervals as f64;
        let m = ((r / dr).floor() as usize).min(self.n_intervals - 1);
        let (a, b) = (m as f64 * dr, (m + 1) as f64 * dr);
        let beta = ((r - a) - (b - r)) / (b - a);
        let nc = self.n_cheb;
        let half = self.n_theta / 2;
        let mut acc = Complex64::default();
        for bin in 0..self.n_theta {
            let ell = if bin <= half {
                bin as i64
            } else {
                bin as i64 - self.n_theta as i64
            };
            let off = (m * self.n_theta + bin) * nc;
            let radial = chebyshev_eval(&self.coeffs[off..off + nc], beta);
            acc += radial * Complex64::from_polar(1.0, ell as f64 * theta);
        }
        acc
    }
}

/// Either backend's base-field interpolant.
pub enum BaseFieldInterp {
    Cartesian(CartesianFieldInterp),
    Polar(PolarFieldInterp),
}

impl BaseFieldInterp {
    pub fn eval(&self, p: Vec2) -> Complex64 {
        match self {
            BaseFieldInterp::Cartesian(c) => c.eval(p),
            BaseFieldInterp::Polar(c) => c.eval(p),
        }
    }
}

/// Interpolant of a boundary-grid field at tube targets: per patch, FFT
/// refinement of `w_k * field` along the ring and a local polynomial across
/// transverse levels; evaluation sums the patches containing the target.
pub struct BoundaryFieldInterp {
    ring_len: usize,
    n2: usize,
    n_patches: usize,
    /// `[patch][level][refined ring]`
    rows: Vec<Vec<Vec<Complex64>>>,
}

impl BoundaryFieldInterp {
    pub fn new(grid: &BoundaryGrid, field: &[Complex64]) -> BoundaryFieldInterp {
        let ring_len = grid.cover.ring_len;
        let n2 = grid.n2;
        let k_patches = grid.cover.k_patches;
        let mut rows = vec![vec![vec![Complex64::default(); ring_len]; n2]; k_patches];
        for (i, node) in grid.nodes.iter().enumerate() {
            let w = grid
                .cover
                .pou_weight(node.patch, grid.cover.ring_g(node.ring));
            rows[node.patch][node.ti][node.ring] = field[i] * w;
        }
        let rows = rows
            .into_iter()
            .map(|levels| {
                levels
                    .into_iter()
                    .map(|r| fourier_upsample(&r, REFINE_FACTOR))
                    .collect()
            })
            .collect();
        BoundaryFieldInterp {
            ring_len,
            n2,
            n_patches: k_patches,
            rows,
        }
    }

    /// Evaluates at global ring parameter `g`, transverse coordinate
    /// `t in [0, 1]`.
    pub fn eval(&self, g: f64, t: f64) -> Complex64 {
        let ht = 1.0 / (self.n2 - 1) as f64;
        let d = POLY_DEGREE.min(self.n2 - 1);
        let pos = t / ht;
        let mut j0 = (pos - d as f64 / 2.0).round() as i64;
        j0 = j0.clamp(0, (self.n2 - 1 - d) as i64);
        let ts: Vec<f64> = (0..=d).map(|k| (j0 as usize + k) as f64 * ht).collect();
        let dx = 1.0 / (self.ring_len * REFINE_FACTOR) as f64;
        let mut acc = Complex64::default();
        for k in 0..self.n_patches {
            let mut col = Vec::with_capacity(d + 1);
            for kj in 0..=d {
                let level = j0 as usize + kj;
                col.push(periodic_local_interp(
                    0.0,
                    dx,
                    &self.rows[k][level],
                    POLY_DEGREE,
                    g.rem_euclid(1.0),
                ));
            }
            acc += neville(&ts, &col, t);
        }
        acc
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Contrast, Shape};
    use crate::grids::GridSpec;
    use crate::util::c64;

    fn disc(tau0: f64) -> Scatterer {
        Scatterer::new(
            Shape::Disc { radius: 1.0 },
            tau0,
            Contrast::Constant(c64(-1.0, 0.0)),
        )
        .unwrap()
    }

    #[test]
    fn window_is_one_on_scatterer() {
        let sc = disc(0.3);
        let grid = CartesianBaseGrid::build(&sc, 65).unwrap();
        let w = WindowFunction::for_grid(&sc, &grid).unwrap();
        for i in 0..200 {
            let t = TWO_PI * i as f64 / 200.0;
            let p = Vec2::new(0.999 * t.cos(), 0.999 * t.sin());
            assert_eq!(w.eval(p), 1.0);
        }
        // decays to zero at the base-square edge
        assert_eq!(w.eval(Vec2::new(grid.a - grid.h, 0.0)), 0.0);
    }

    #[test]
    fn cartesian_interp_known_function() {
        let sc = disc(0.3);
        let grid = CartesianBaseGrid::build(&sc, 129).unwrap();
        let w = WindowFunction::for_grid(&sc, &grid).unwrap();
        let f = |p: Vec2| {
            Complex64::from_polar(1.0, 2.0 * p.x - 1.3 * p.y) * (0.5 + 0.3 * (p.x * p.y).cos())
        };
        let samples: Vec<Complex64> = (0..grid.len()).map(|i| f(grid.position(i))).collect();
        let interp = CartesianFieldInterp::new(&grid, &w, &samples);
        // node reproduction (window is 1 inside the scatterer)
        let idx = grid.index(3, -5);
        assert!((interp.eval(grid.position(idx)) - samples[idx]).norm() < 1e-12);
        // off-grid targets inside the scatterer
        let mut worst = 0.0f64;
        for i in 0..50 {
            let t = TWO_PI * i as f64 / 50.0;
            let p = Vec2::new(0.8 * t.cos() * 0.9, 0.7 * t.sin());
            worst = worst.max((interp.eval(p) - f(p)).norm());
        }
        assert!(worst < 1e-8, "off-grid error {worst:.3e}");
        // constants are exact
        let ones: Vec<Complex64> = vec![c64(1.0, -2.0); grid.len()];
        let ci = CartesianFieldInterp::new(&grid, &w, &ones);
        assert!((ci.eval(Vec2::new(0.21, -0.39)) - c64(1.0, -2.0)).norm() < 1e-13);
    }

    #[test]
    fn cartesian_interp_order_under_refinement() {
        let sc = disc(0.3);
        let f = |p: Vec2| Complex64::from_polar(1.0, 3.0 * p.x + 1.0 * p.y);
        let err_at = |m1: usize| {
            let grid = CartesianBaseGrid::build(&sc, m1).unwrap();
            let w = WindowFunction::for_grid(&sc, &grid).unwrap();
            let samples: Vec<Complex64> = (0..grid.len()).map(|i| f(grid.position(i))).collect();
            let interp = CartesianFieldInterp::new(&grid, &w, &samples);
            let mut worst = 0.0f64;
            for i in 0..40 {
                let t = TWO_PI * i as f64 / 40.0;
                let p = Vec2::new(0.75 * t.cos(), 0.66 * t.sin());
                worst = worst.max((interp.eval(p) - f(p)).norm());
            }
            worst
        };
        let e1 = err_at(33);
        let e2 = err_at(65);
        let order = (e1 / e2.max(1e-16)).log2();
        assert!(
            order >= (POLY_DEGREE - 1) as f64,
            "interpolation order {order:.2} ({e1:.2e} -> {e2:.2e})"
        );
    }

    #[test]
    fn polar_interp_known_function() {
        let sc = disc(0.3);
        let grid = PolarBaseGrid::build(&sc, 33, 33, 4.0).unwrap();
        let f = |p: Vec2| Complex64::from_polar(1.0, 2.5 * p.x - 0.8 * p.y) + c64(0.3, 0.0);
        let samples: Vec<Complex64> = (0..grid.len()).map(|i| f(grid.position(i))).collect();
        let interp = PolarFieldInterp::new(&grid, &samples);
        // node reproduction
        let idx = 7 * grid.m2 + 3;
        assert!(
            (interp.eval(grid.position(idx)) - samples[idx]).norm() < 1e-10,
            "node reproduction"
        );
        let mut worst = 0.0f64;
        for i in 0..50 {
            let t = TWO_PI * i as f64 / 50.0;
            let p = Vec2::new(0.62 * t.cos(), 0.84 * t.sin());
            worst = worst.max((interp.eval(p) - f(p)).norm());
        }
        assert!(worst < 1e-7, "off-grid error {worst:.3e}");
    }

    #[test]
    fn boundary_interp_reproduces_and_converges() {
        let sc = disc(0.25);
        let spec = GridSpec::new(2, 65, 17, 17, 17);
        let grid = BoundaryGrid::build(&sc, &spec, 0.1).unwrap();
        // smooth test field on the tube, expressed in (ring, t)
        let f = |g: f64, t: f64| {
            Complex64::from_polar(1.0, TWO_PI * g) * (1.0 + 0.5 * t * t)
                + c64(0.2 * (TWO_PI * 2.0 * g).cos() * t, 0.1)
        };
        let samples: Vec<Complex64> = grid
            .nodes
            .iter()
            .map(|n| f(grid.cover.ring_g(n.ring), n.t))
            .collect();
        let interp = BoundaryFieldInterp::new(&grid, &samples);
        // on-grid nodes: sum of patch weights reproduces the field
        for &ni in &[11usize, 400, 1333] {
            let n = &grid.nodes[ni];
            let got = interp.eval(grid.cover.ring_g(n.ring), n.t);
            assert!((got - samples[ni]).norm() < 1e-12, "node {ni}");
        }
        // off-grid targets
        let mut worst = 0.0f64;
        for i in 0..60 {
            let g = i as f64 / 60.0 + 0.003;
            let t = 0.27 + 0.4 * ((i as f64 * 0.37) % 1.0);
            worst = worst.max((interp.eval(g, t) - f(g, t)).norm());
        }
        assert!(worst < 1e-8, "off-grid error {worst:.3e}");
        // zero field stays zero
        let zero = BoundaryFieldInterp::new(&grid, &vec![Complex64::default(); grid.len()]);
        assert_eq!(zero.eval(0.37, 0.5), Complex64::default());
    }
}
