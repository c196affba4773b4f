//! Base-base interaction by the Addition theorem on the polar grid:
//! angular Fourier analysis of the extended density, per-interval Chebyshev
//! expansion of the modal densities, one-time radial moments against the
//! J/Y kernel factors, and modal assembly
//!
//! ```text
//! (A_E v)(r, th) = sum_l e^{i l th} w_l(r),
//! w_l(r) = (i pi/2) J_l(kr) Phi_l
//!        - (pi/2) [ Y_l(kr) Inner_l(r) + J_l(kr) OuterY_l(r) ],
//! Inner_l(r)  = int_0^r J_l(kr') (v)_l(r') r' dr',
//! OuterY_l(r) = int_r^R Y_l(kr') (v)_l(r') r' dr',
//! Phi_l       = Inner_l(R),
//! ```
//! which is the variation-of-parameters solution closed by the radiation
//! condition at `r = R` (equivalently the `H = J + iY` split of the modal
//! kernel `G_{k,l}(r,r') = (i/4) H_l^1(k max(r,r')) J_l(k min(r,r'))`).

use crate::grids::PolarBaseGrid;
use crate::specfun::{bessel_j_ladder, bessel_y_ladder, chebyshev_t_ladder, Y_CLAMP};
use crate::util::fft::{fft_inplace, ifft_inplace};
use crate::util::quad::clenshaw_curtis;
use crate::util::{c64, par::par_collect};
use crate::{Error, Result};
use num_complex::Complex64;
use std::f64::consts::PI;

/// Modal kernel `G_{k,l}(r, r')`, symmetric in its radial arguments.
pub fn modal_kernel(kappa: f64, ell: i64, r: f64, rp: f64) -> Complex64 {
    let lo = kappa * r.min(rp);
    let hi = kappa * r.max(rp);
    let l = ell.unsigned_abs() as usize;
    let j = bessel_j_ladder(l, lo)[l];
    let h = c64(
        bessel_j_ladder(l, hi)[l],
        bessel_y_ladder(l, hi).expect("modal kernel wants max(r,r') > 0")[l],
    );
    c64(0.0, 0.25) * h * j
}

/// Angular Fourier coefficients of samples on one ring (convention
/// `v(th) = sum_l v_l e^{i l th}`): index `l` is stored FFT-style.
pub fn angular_fourier_ring(samples: &[Complex64]) -> Vec<Complex64> {
    let n = samples.len();
    let mut hat = samples.to_vec();
    fft_inplace(&mut hat);
    let scale = 1.0 / n as f64;
    for z in hat.iter_mut() {
        *z *= scale;
    }
    hat
}

/// Discrete Chebyshev transform on the roots grid: coefficients of
/// `f = sum_n c_n T_n` from samples at `beta_j = cos(pi (j - 1/2)/N_c)`,
/// `j = 1..N_c` (the paper's decreasing-beta convention).
pub fn chebyshev_analyze(samples_desc: &[Complex64]) -> Vec<Complex64> {
    let nc = samples_desc.len();
    let mut coeffs = vec![Complex64::default(); nc];
    for (jm1, &f) in samples_desc.iter().enumerate() {
        let beta = (PI * (jm1 as f64 + 0.5) / nc as f64).cos();
        let t = chebyshev_t_ladder(nc, beta);
        for n in 0..nc {
            coeffs[n] += f * t[n];
        }
    }
    for (n, cn) in coeffs.iter_mut().enumerate() {
        *cn *= if n == 0 { 1.0 } else { 2.0 } / nc as f64;
    }
    coeffs
}

/// Evaluate a Chebyshev expansion at `beta`.
pub fn chebyshev_eval(coeffs: &[Complex64], beta: f64) -> Complex64 {
    let t = chebyshev_t_ladder(coeffs.len(), beta);
    coeffs
        .iter()
        .zip(&t)
        .map(|(c, tv)| c * *tv)
        .sum()
}

/// One-time radial moments: per interval, per mode, per subrange between
/// consecutive radial nodes, per Chebyshev degree, the integrals of
/// `J_l(kr') T_n(alpha(r')) r'` and `Y_l(kr') T_n(alpha(r')) r'`.
pub struct RadialMoments {
    pub n_intervals: usize,
    pub n_cheb: usize,
    pub l_max: usize,
    pub mj: Vec<f64>,
    pub my: Vec<f64>,
}

impl RadialMoments {
    #[inline]
    fn idx(&self, m: usize, l: usize, u: usize, n: usize) -> usize {
        ((m * (self.l_max + 1) + l) * (self.n_cheb + 1) + u) * self.n_cheb + n
    }
}

/// Quadrature order factor: Clenshaw-Curtis with `4 N_c` points per subrange.
const CC_FACTOR: usize = 4;

fn interval_bounds(grid: &PolarBaseGrid, m: usize) -> (f64, f64) {
    let dr = grid.radius / grid.n_intervals as f64;
    (m as f64 * dr, (m + 1) as f64 * dr)
}

/// Radial node list of interval `m` in ascending order (global indices).
fn interval_nodes(grid: &PolarBaseGrid, m: usize) -> std::ops::RangeInclusive<usize> {
    m * (grid.n_cheb + 1)..=(m + 1) * (grid.n_cheb + 1)
}

pub fn precompute_moments(
    grid: &PolarBaseGrid,
    kappa: f64,
    l_max: usize,
) -> Result<RadialMoments> {
    let nc = grid.n_cheb;
    let n_sub = nc + 1;
    let len = grid.n_intervals * (l_max + 1) * n_sub * nc;
    let mut mm = RadialMoments {
        n_intervals: grid.n_intervals,
        n_cheb: nc,
        l_max,
        mj: vec![0.0; len],
        my: vec![0.0; len],
    };
    let mut worst_est = 0.0f64;
    for m in 0..grid.n_intervals {
        let (a, b) = interval_bounds(grid, m);
        let nodes: Vec<f64> = interval_nodes(grid, m).map(|g| grid.radial[g]).collect();
        for u in 0..n_sub {
            let origin = m == 0 && u == 0;
            let (lo, hi) = (nodes[u], nodes[u + 1]);
            let fine = moment_block(kappa, l_max, nc, a, b, lo, hi, CC_FACTOR * nc, origin);
            let coarse =
                moment_block(kappa, l_max, nc, a, b, lo, hi, (CC_FACTOR * nc) / 2, origin);
            // Pairing weights for the error estimate: a Y moment of this
            // subrange only ever multiplies J_l(kr) at targets below it
            // (|J_l| <= |J_l(k lo)| there), and a J moment multiplies
            // Y_l(kr) at targets above (largest at hi). Raw high-l moments
            // are astronomically scaled in opposite directions; the product
            // scale is what the assembled potential sees.
            let j_lo = bessel_j_ladder(l_max, kappa * lo);
            let y_hi = bessel_y_ladder(l_max, kappa * hi)?;
            let mut scale = 1e-30f64;
            let mut block_est = 0.0f64;
            for idx4 in 0..(l_max + 1) * nc {
                let (l, n) = (idx4 / nc, idx4 % nc);
                let wj = y_hi[l].abs().min(Y_CLAMP).max(1.0);
                let wy = j_lo[l].abs().min(1.0);
                scale = scale
                    .max(fine.0[idx4].abs() * wj)
                    .max(fine.1[idx4].abs() * wy);
                let est_j = (fine.0[idx4] - coarse.0[idx4]).abs() * wj;
                // Y moments of the origin subrange go through the adaptive
                // path below; no doubled-rule estimate applies there
                let est = if origin {
                    est_j
                } else {
                    est_j.max((fine.1[idx4] - coarse.1[idx4]).abs() * wy)
                };
                block_est = block_est.max(est);
                let id = mm.idx(m, l, u, n);
                mm.mj[id] = fine.0[idx4];
                mm.my[id] = fine.1[idx4];
            }
            worst_est = worst_est.max(block_est / scale.max(1.0));
        }
        if m == 0 {
            // origin subrange: Y_l(kr') r' has an integrable logarithmic
            // (l = 0) or jump-limit (l = 1) behavior at r' = 0; integrate
            // adaptively (interior nodes only) instead of by Clenshaw-Curtis
            let (lo, hi) = (nodes[0], nodes[1]);
            for l in 0..=1usize.min(l_max) {
                for n in 0..nc {
                    let (val, _) = crate::util::quad::adaptive_quad(
                        &|r: f64| {
                            if r <= 0.0 {
                                return Complex64::default();
                            }
                            let beta = ((r - a) - (b - r)) / (b - a);
                            let y = bessel_y_ladder(l, kappa * r).unwrap()[l];
                            c64(y * chebyshev_t_ladder(nc, beta)[n] * r, 0.0)
                        },
                        lo,
                        hi,
                        1e-13,
                    );
                    let id = mm.idx(0, l, 0, n);
                    mm.my[id] = val.re;
                }
            }
        }
    }
    if worst_est > 1e-9 {
        return Err(Error::QuadratureFailure(worst_est));
    }
    Ok(mm)
}

/// Moments over one subrange for all `(l, n)`: returns `(J block, Y block)`
/// indexed `l * nc + n`. `origin_subrange` marks the subrange touching r = 0,
/// where `Y_l` moments exist only for l <= 1 (higher ones are never consumed:
/// the only target below the first node is r = 0 itself, where `J_l(0) = 0`
/// kills those modes).
#[allow(clippy::too_many_arguments)]
fn moment_block(
    kappa: f64,
    l_max: usize,
    nc: usize,
    a: f64,
    b: f64,
    lo: f64,
    hi: f64,
    cc_points: usize,
    origin_subrange: bool,
) -> (Vec<f64>, Vec<f64>) {
    let mut bj = vec![0.0; (l_max + 1) * nc];
    let mut by = vec![0.0; (l_max + 1) * nc];
    let (xs, ws) = clenshaw_curtis(cc_points.max(4), lo, hi);
    for (x, w) in xs.iter().zip(&ws) {
        let r = *x;
        let beta = ((r - a) - (b - r)) / (b - a);
        let tn = chebyshev_t_ladder(nc, beta);
        let jl = bessel_j_ladder(l_max, kappa * r);
        let wr = w * r;
        if wr == 0.0 {
            continue;
        }
        let yl = if r > 0.0 {
            bessel_y_ladder(l_max, kappa * r).unwrap()
        } else {
            vec![0.0; l_max + 1]
        };
        for l in 0..=l_max {
            let fj = jl[l] * wr;
            // in the origin subrange only l <= 1 has an integrable Y factor
            let fy = if origin_subrange && l >= 2 {
                0.0
            } else {
                yl[l] * wr
            };
            let row = l * nc;
            for n in 0..nc {
                bj[row + n] += fj * tn[n];
                by[row + n] += fy * tn[n];
            }
        }
    }
    (bj, by)
}

/// The Addition-theorem base backend bound to one polar grid.
pub struct BaseAtm {
    pub kappa: f64,
    pub l_max: usize,
    pub moments: RadialMoments,
    grid_shape: (usize, usize, usize, usize), // (n_intervals, n_cheb, m1, m2)
    radial: Vec<f64>,
    n_theta: usize,
    /// `J_l(k r_g)` and `Y_l(k r_g)` per radial node.
    j_node: Vec<Vec<f64>>,
    y_node: Vec<Vec<f64>>,
}

impl BaseAtm {
    pub fn new(grid: &PolarBaseGrid, kappa: f64) -> Result<BaseAtm> {
        let l_max = grid.l_max();
        // nonresonant outer radius: Y_l(kR) bounded away from zero
        let ylr = bessel_y_ladder(l_max, kappa * grid.radius)?;
        let min_y = ylr.iter().fold(f64::INFINITY, |m, v| m.min(v.abs()));
        if min_y < 1e-8 {
            return Err(Error::ResonantRadius(min_y));
        }
        let moments = precompute_moments(grid, kappa, l_max)?;
        let j_node = grid
            .radial
            .iter()
            .map(|&r| bessel_j_ladder(l_max, kappa * r))
            .collect();
        let y_node = grid
            .radial
            .iter()
            .map(|&r| {
                if r > 0.0 {
                    bessel_y_ladder(l_max, kappa * r).unwrap()
                } else {
                    vec![f64::NEG_INFINITY; l_max + 1]
                }
            })
            .collect();
        Ok(BaseAtm {
            kappa,
            l_max,
            moments,
            grid_shape: (grid.n_intervals, grid.n_cheb, grid.radial.len(), grid.m2),
            radial: grid.radial.clone(),
            n_theta: grid.n_theta,
            j_node,
            y_node,
        })
    }

    /// Angular Fourier analysis of polar-grid density samples; returns
    /// per-radial-node FFT-convention spectra. Errors if the requested
    /// truncation exceeds the alias-free limit.
    pub fn angular_fourier(
        &self,
        density: &[Complex64],
        l_max: usize,
    ) -> Result<Vec<Vec<Complex64>>> {
        let limit = self.n_theta / 2 - 1;
        if l_max > limit {
            return Err(Error::AliasError { lmax: l_max, limit });
        }
        let (_, _, m1, m2) = self.grid_shape;
        if density.len() != m1 * m2 {
            return Err(Error::ShapeMismatch {
                expected: m1 * m2,
                got: density.len(),
            });
        }
        Ok((0..m1)
            .map(|g| angular_fourier_ring(&density[g * m2..g * m2 + self.n_theta]))
            .collect())
    }

    /// Applies `A_E` to extended-density samples on the polar grid
    /// (radial-major, `m2` angular slots per ring including the seam copy).
    pub fn apply(&self, density: &[Complex64]) -> Result<Vec<Complex64>> {
        let (n_int, nc, m1, m2) = self.grid_shape;
        let spectra = self.angular_fourier(density, self.l_max)?;
        let n_theta = self.n_theta;
        let l_max = self.l_max;
        let n_sub = nc + 1;

        // modal radial profiles w_l(r_g), FFT bin order
        let bins: Vec<Vec<Complex64>> = par_collect(2 * l_max + 1, |bi| {
            let ell: i64 = if bi <= l_max {
                bi as i64
            } else {
                bi as i64 - (2 * l_max + 1) as i64
            };
            let l = ell.unsigned_abs() as usize;
            // per-interval Chebyshev coefficients of the modal density
            let mut coeffs = vec![Complex64::default(); n_int * nc];
            for m in 0..n_int {
                let base = m * (nc + 1);
                // paper's decreasing-beta node order: global ascending index
                // base + 1 + jj holds beta_{nc - jj}
                let samples_desc: Vec<Complex64> = (0..nc)
                    .map(|jm1| {
                        let jj = nc - 1 - jm1; // ascending offset of beta_j
                        let g = base + 1 + jj;
                        let bin = if ell >= 0 {
                            ell as usize
                        } else {
                            (n_theta as i64 + ell) as usize
                        };
                        spectra[g][bin]
                    })
                    .collect();
                let cn = chebyshev_analyze(&samples_desc);
                coeffs[m * nc..(m + 1) * nc].copy_from_slice(&cn);
            }
            // per-subrange scalar moments, then prefix/suffix sums
            let total_sub = n_int * n_sub;
            let mut sj = vec![Complex64::default(); total_sub];
            let mut sy = vec![Complex64::default(); total_sub];
            for m in 0..n_int {
                for u in 0..n_sub {
                    let mut aj = Complex64::default();
                    let mut ay = Complex64::default();
                    for n in 0..nc {
                        let id = self.moments.idx(m, l, u, n);
                        let cn = coeffs[m * nc + n];
                        aj += cn * self.moments.mj[id];
                        ay += cn * self.moments.my[id];
                    }
                    sj[m * n_sub + u] = aj;
                    sy[m * n_sub + u] = ay;
                }
            }
            // inner[g] = sum of J moments below node g; outer[g] = Y above
            let mut profile = vec![Complex64::default(); m1];
            let mut inner = vec![Complex64::default(); m1];
            let mut acc = Complex64::default();
            for g in 0..m1 {
                inner[g] = acc;
                if g < total_sub {
                    acc += sj[g];
                }
            }
            let phi = acc;
            let mut outer = vec![Complex64::default(); m1];
            let mut acc = Complex64::default();
            for g in (0..m1).rev() {
                outer[g] = acc;
                if g > 0 {
                    acc += sy[g - 1];
                }
            }
            for g in 0..m1 {
                let r = self.radial[g];
                if r == 0.0 {
                    // only the l = 0 mode reaches the origin
                    profile[g] = if ell == 0 {
                        c64(0.0, 0.5 * PI) * phi - c64(0.5 * PI, 0.0) * outer[g]
                    } else {
                        Complex64::default()
                    };
                    continue;
                }
                let jv = self.j_node[g][l];
                let yv = self.y_node[g][l];
                let mut w = c64(0.0, 0.5 * PI) * jv * phi - c64(0.5 * PI, 0.0) * jv * outer[g];
                // deep-evanescent guard: the inner moment underflows before
                // Y saturates, and their true product is negligible
                if inner[g] != Complex64::default() && yv.abs() < Y_CLAMP {
                    w -= c64(0.5 * PI, 0.0) * yv * inner[g];
                }
                profile[g] = w;
            }
            profile
        });

        // synthesize each ring by inverse FFT
        let rings: Vec<Vec<Complex64>> = par_collect(m1, |g| {
            let mut spec = vec![Complex64::default(); n_theta];
            for (bi, bin) in bins.iter().enumerate() {
                let slot = if bi <= l_max {
                    bi
                } else {
                    n_theta - (2 * l_max + 1 - bi)
                };
                spec[slot] = bin[g];
            }
            ifft_inplace(&mut spec);
            for z in spec.iter_mut() {
                *z *= n_theta as f64;
            }
            spec
        });
        let mut out = vec![Complex64::default(); m1 * m2];
        for g in 0..m1 {
            out[g * m2..g * m2 + n_theta].copy_from_slice(&rings[g]);
            out[g * m2 + n_theta] = rings[g][0]; // seam copy
        }
        Ok(out)
    }

    /// Modal potential profiles for targets at arbitrary radii are not part
    /// of this backend; off-grid evaluation goes through the interpolation
    /// module.
    pub fn shape(&self) -> (usize, usize, usize, usize) {
        self.grid_shape
    }

    /// Serializes the moment tables; reloading reproduces applies bit for
    /// bit. Keyed by the quadrature signature.
    pub fn save_moments(&self, grid: &PolarBaseGrid) -> String {
        let mut s = String::new();
        s.push_str(&format!(
            "ls2d-moments 1 {} {} {} {} {} {}\n",
            self.kappa.to_bits(),
            grid.radius.to_bits(),
            self.moments.n_intervals,
            self.moments.n_cheb,
            self.l_max,
            self.moments.mj.len(),
        ));
        for v in self.moments.mj.iter().chain(self.moments.my.iter()) {
            s.push_str(&format!("{:x}\n", v.to_bits()));
        }
        s
    }

    /// Restores moment tables saved by [`save_moments`](Self::save_moments);
    /// returns false (leaving the freshly computed tables) on key mismatch.
    pub fn load_moments(&mut self, grid: &PolarBaseGrid, text: &str) -> bool {
        let mut lines = text.lines();
        let Some(head) = lines.next() else {
            return false;
        };
        let expect = format!(
            "ls2d-moments 1 {} {} {} {} {} {}",
            self.kappa.to_bits(),
            grid.radius.to_bits(),
            self.moments.n_intervals,
            self.moments.n_cheb,
            self.l_max,
            self.moments.mj.len(),
        );
        if head != expect {
            return false;
        }
        let n = self.moments.mj.len();
        let mut vals = Vec::with_capacity(2 * n);
        for line in lines {
            let Ok(bits) = u64::from_str_radix(line.trim(), 16) else {
                return false;
            };
            vals.push(f64::from_bits(bits));
        }
        if vals.len() != 2 * n {
            return false;
        }
        self.moments.mj.copy_from_slice(&vals[..n]);
        self.moments.my.copy_from_slice(&vals[n..]);
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Contrast, Scatterer, Shape, Vec2};
    use crate::grids::PolarBaseGrid;
    use crate::specfun::green_kernel;
    use crate::util::quad::adaptive_quad;
    use crate::util::TWO_PI;

    fn disc_setup(kappa: f64, m1: usize, m2: usize) -> (Scatterer, PolarBaseGrid) {
        let shape = Shape::Disc { radius: 1.0 };
        let tau0 = Scatterer::default_tau0(&shape, kappa);
        let sc = Scatterer::new(shape, tau0, Contrast::Constant(c64(-1.0, 0.0))).unwrap();
        let grid = PolarBaseGrid::build(&sc, m1, m2, kappa).unwrap();
        (sc, grid)
    }

    #[test]
    fn chebyshev_transform_basics() {
        let nc = 12;
        // samples of T_2 at the roots grid -> c_2 = 1
        let samples: Vec<Complex64> = (0..nc)
            .map(|jm1| {
                let beta = (PI * (jm1 as f64 + 0.5) / nc as f64).cos();
                c64(2.0 * beta * beta - 1.0, 0.0)
            })
            .collect();
        let c = chebyshev_analyze(&samples);
        for (n, cn) in c.iter().enumerate() {
            let want = if n == 2 { 1.0 } else { 0.0 };
            assert!((cn.re - want).abs() < 1e-13, "c_{n} = {cn}");
        }
        // constants map to c_0
        let ones = vec![c64(3.5, -1.0); nc];
        let c = chebyshev_analyze(&ones);
        assert!((c[0] - c64(3.5, -1.0)).norm() < 1e-13);
        for cn in &c[1..] {
            assert!(cn.norm() < 1e-13);
        }
    }

    #[test]
    fn chebyshev_truncation_decays_geometrically() {
        let nc = 16;
        let f = |beta: f64| c64((2.5 * beta).sin() * (beta * beta).exp(), 0.0);
        let samples: Vec<Complex64> = (0..nc)
            .map(|jm1| f((PI * (jm1 as f64 + 0.5) / nc as f64).cos()))
            .collect();
        let c = chebyshev_analyze(&samples);
        // reconstruction at nodes is exact
        for (jm1, s) in samples.iter().enumerate() {
            let beta = (PI * (jm1 as f64 + 0.5) / nc as f64).cos();
            assert!((chebyshev_eval(&c, beta) - s).norm() < 1e-12);
        }
        // tail coefficients decay by many orders from the peak
        let peak = c.iter().map(|z| z.norm()).fold(0.0, f64::max);
        assert!(c[nc - 1].norm() < 1e-7 * peak, "{} vs {}", c[nc - 1].norm(), peak);
    }

    #[test]
    fn angular_fourier_picks_single_modes() {
        let kappa = 2.0;
        let (_, grid) = disc_setup(kappa, 17, 17);
        let atm = BaseAtm::new(&grid, kappa).unwrap();
        let m2 = grid.m2;
        let m1 = grid.radial.len();
        // density e^{i 3 th} f(r)
        let f = |r: f64| c64(r * r + 0.25, 0.0);
        let density: Vec<Complex64> = (0..m1 * m2)
            .map(|idx| {
                let g = idx / m2;
                let q = (idx % m2) % grid.n_theta;
                let th = TWO_PI * q as f64 / grid.n_theta as f64;
                f(grid.radial[g]) * Complex64::from_polar(1.0, 3.0 * th)
            })
            .collect();
        let spectra = atm.angular_fourier(&density, atm.l_max).unwrap();
        for (g, spec) in spectra.iter().enumerate() {
            for (bin, v) in spec.iter().enumerate() {
                if bin == 3 {
                    assert!((v - f(grid.radial[g])).norm() < 1e-12);
                } else {
                    assert!(v.norm() < 1e-12, "leak in bin {bin}");
                }
            }
        }
        // alias guard
        assert!(matches!(
            atm.angular_fourier(&density, grid.n_theta / 2),
            Err(Error::AliasError { .. })
        ));
    }

    #[test]
    fn mode_decoupling_through_apply() {
        let kappa = 2.0;
        let (_, grid) = disc_setup(kappa, 17, 17);
        let atm = BaseAtm::new(&grid, kappa).unwrap();
        let m2 = grid.m2;
        let m1 = grid.radial.len();
        let density: Vec<Complex64> = (0..m1 * m2)
            .map(|idx| {
                let g = idx / m2;
                let q = (idx % m2) % grid.n_theta;
                let th = TWO_PI * q as f64 / grid.n_theta as f64;
                let r = grid.radial[g];
                c64(r, 0.0) * Complex64::from_polar(1.0, 2.0 * th)
            })
            .collect();
        let out = atm.apply(&density).unwrap();
        let spectra = atm.angular_fourier(&out, atm.l_max).unwrap();
        let peak: f64 = spectra.iter().map(|s| s[2].norm()).fold(0.0, f64::max);
        for spec in &spectra {
            for (bin, v) in spec.iter().enumerate() {
                if bin != 2 {
                    assert!(v.norm() <= 1e-12 * peak.max(1.0), "cross-mode leak");
                }
            }
        }
    }

    #[test]
    fn zero_density_maps_to_zero() {
        let kappa = 2.0;
        let (_, grid) = disc_setup(kappa, 17, 9);
        let atm = BaseAtm::new(&grid, kappa).unwrap();
        let out = atm.apply(&vec![Complex64::default(); grid.len()]).unwrap();
        assert!(out.iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn moment_complementarity_and_spot_value() {
        let kappa = 2.0;
        let (_, grid) = disc_setup(kappa, 33, 17);
        let atm = BaseAtm::new(&grid, kappa).unwrap();
        let nc = grid.n_cheb;
        let mm = &atm.moments;
        // inner + outer over complementary subranges equals the full-interval
        // moment (directly: the subrange moments must sum to the interval one)
        let m = grid.n_intervals - 1;
        let (a, b) = interval_bounds(&grid, m);
        for &(l, n) in &[(0usize, 0usize), (5, 3), (2, 1)] {
            let mut total = 0.0;
            for u in 0..=nc {
                total += mm.mj[mm.idx(m, l, u, n)];
            }
            let (full, _) = adaptive_quad(
                &|r: f64| {
                    let beta = ((r - a) - (b - r)) / (b - a);
                    let jl = bessel_j_ladder(l, kappa * r);
                    c64(jl[l] * chebyshev_t_ladder(nc, beta)[n] * r, 0.0)
                },
                a,
                b,
                1e-13,
            );
            assert!(
                (total - full.re).abs() < 1e-10 * full.re.abs().max(1e-3),
                "J moment (l={l}, n={n}): {total} vs {}",
                full.re
            );
            // and the Y family
            let mut total_y = 0.0;
            for u in 0..=nc {
                total_y += mm.my[mm.idx(m, l, u, n)];
            }
            let (full_y, _) = adaptive_quad(
                &|r: f64| {
                    let beta = ((r - a) - (b - r)) / (b - a);
                    let yl = bessel_y_ladder(l, kappa * r).unwrap();
                    c64(yl[l] * chebyshev_t_ladder(nc, beta)[n] * r, 0.0)
                },
                a,
                b,
                1e-13,
            );
            assert!(
                (total_y - full_y.re).abs() < 1e-10 * full_y.re.abs().max(1e-3),
                "Y moment (l={l}, n={n}): {total_y} vs {}",
                full_y.re
            );
        }
    }

    #[test]
    fn radial_density_matches_adaptive_kernel_quadrature() {
        let kappa = 2.0;
        let (_, grid) = disc_setup(kappa, 33, 9);
        let atm = BaseAtm::new(&grid, kappa).unwrap();
        let m2 = grid.m2;
        // radially symmetric density v(r) = (1 - (r/R)^2)^3 (smooth, vanishes
        // at R with two derivatives)
        let rr = grid.radius;
        let f = |r: f64| {
            let u = 1.0 - (r / rr) * (r / rr);
            c64(u * u * u, 0.0)
        };
        let density: Vec<Complex64> = (0..grid.len())
            .map(|idx| f(grid.radial[idx / m2]))
            .collect();
        let out = atm.apply(&density).unwrap();
        // reference: w_0(r) = (i pi/2)[H_0(kr) int_0^r J_0 f r' + J_0(kr) int_r^R H_0 f r']
        for &g in &[3usize, 12, 20, 31] {
            let r = grid.radial[g];
            let (inner, _) = adaptive_quad(
                &|rp: f64| f(rp) * bessel_j_ladder(0, kappa * rp)[0] * rp,
                0.0,
                r,
                1e-12,
            );
            let (outer, _) = adaptive_quad(
                &|rp: f64| {
                    f(rp)
                        * c64(
                            bessel_j_ladder(0, kappa * rp)[0],
                            bessel_y_ladder(0, kappa * rp).unwrap()[0],
                        )
                        * rp
                },
                r,
                rr,
                1e-12,
            );
            let h0 = c64(
                bessel_j_ladder(0, kappa * r)[0],
                bessel_y_ladder(0, kappa * r).unwrap()[0],
            );
            let j0 = bessel_j_ladder(0, kappa * r)[0];
            let want = c64(0.0, 0.5 * PI) * (h0 * inner + j0 * outer);
            let got = out[g * m2];
            assert!(
                (got - want).norm() < 1e-8 * want.norm().max(1e-6),
                "node {g}: {got} vs {want}"
            );
        }
    }

    #[test]
    fn addition_theorem_kernel_consistency() {
        // sum_l e^{i l (th - th')} G_{k,l}(r, r') converges to G_k(x - y)
        let kappa = 2.0;
        let (r, th): (f64, f64) = (0.8, 0.3);
        let (rp, thp): (f64, f64) = (0.35, 2.1);
        let x = Vec2::new(r * th.cos(), r * th.sin());
        let y = Vec2::new(rp * thp.cos(), rp * thp.sin());
        let exact = green_kernel(kappa, (x - y).norm());
        let l_max = 31;
        let mut acc = Complex64::default();
        for ell in -(l_max as i64)..=(l_max as i64) {
            acc += Complex64::from_polar(1.0, ell as f64 * (th - thp))
                * modal_kernel(kappa, ell, r, rp);
        }
        assert!(
            (acc - exact).norm() < 1e-8 * exact.norm(),
            "{acc} vs {exact}"
        );
    }

    #[test]
    fn moment_cache_round_trip_bit_exact() {
        let kappa = 2.0;
        let (_, grid) = disc_setup(kappa, 17, 9);
        let atm = BaseAtm::new(&grid, kappa).unwrap();
        let density: Vec<Complex64> = (0..grid.len())
            .map(|i| c64((i % 7) as f64 - 3.0, (i % 5) as f64))
            .collect();
        let before = atm.apply(&density).unwrap();
        let saved = atm.save_moments(&grid);
        let mut atm2 = BaseAtm::new(&grid, kappa).unwrap();
        assert!(atm2.load_moments(&grid, &saved));
        let after = atm2.apply(&density).unwrap();
        assert_eq!(
            before.iter().map(|z| z.re.to_bits()).collect::<Vec<_>>(),
            after.iter().map(|z| z.re.to_bits()).collect::<Vec<_>>()
        );
    }
}
