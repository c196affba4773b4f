//! Boundary-boundary adjacent (singular) quadrature and the direct near-field
//! quadrature for base targets.
//!
//! The windowed singular integral over one patch,
//!
//! ```text
//! int_0^1 int_0^1 G_k(x - xi(s',t')) v eta_s(s') eta_tau0(tau0 t') w_k xi' ds' dt',
//! ```
//!
//! is evaluated per transverse level by a trapezoidal rule in the graded
//! variable `tau` (`s' = s + rho(tau)`, `rho(tau) = tau^5`), with the density
//! interpolated to the `tau` nodes by FFT ring refinement plus local
//! polynomials; the transverse integral is then split at `t' = t` and
//! integrated by composite 5-point Newton-Cotes whose partial panels near
//! `t' = 0` and `t' = 1` use extra levels obtained by interpolating the
//! smooth density in `t` (never the kernel integral itself).

use crate::geometry::{CutoffSpec, PatchChart, Scatterer, Vec2};
use crate::grids::{BoundaryGrid, CellDecomposition};
use crate::specfun::green_kernel;
use crate::util::fft::fourier_upsample;
use crate::util::poly::{neville, periodic_local_interp};
use crate::util::quad::boole_panel;
use crate::{Error, Result};
use num_complex::Complex64;
use std::collections::BTreeMap;

/// Odd graded map `rho(tau) = tau^{M+1}` with `M = 4`: the first M
/// derivatives vanish at 0, and the inverse is the odd fifth root.
#[derive(Debug, Clone, Copy)]
pub struct ChangeOfVariable;

pub const VANISHING_ORDER: usize = 4;

impl ChangeOfVariable {
    #[inline]
    pub fn rho(tau: f64) -> f64 {
        tau * tau * tau * tau * tau
    }

    #[inline]
    pub fn rho_prime(tau: f64) -> f64 {
        5.0 * tau * tau * tau * tau
    }

    #[inline]
    pub fn rho_inverse(u: f64) -> f64 {
        u.signum() * u.abs().powf(0.2)
    }
}

/// Smooth cut-off in the ring parameter around a target: 1 within ring
/// distance `d0` of the center, 0 beyond `d1`, built from the cut-off family.
#[derive(Debug, Clone, Copy)]
pub struct AdjacencyWindow {
    pub center_g: f64,
    pub d0: f64,
    pub d1: f64,
}

impl AdjacencyWindow {
    /// Covers the whole ring (no far field): every source is adjacent.
    pub fn full(center_g: f64) -> Self {
        AdjacencyWindow {
            center_g,
            d0: 0.5,
            d1: 0.51,
        }
    }

    #[inline]
    pub fn ring_dist(&self, g: f64) -> f64 {
        let mut d = (g - self.center_g).abs() % 1.0;
        if d > 0.5 {
            d = 1.0 - d;
        }
        d
    }

    pub fn eval(&self, g: f64) -> f64 {
        let d = self.ring_dist(g);
        if d <= self.d0 {
            1.0
        } else if d >= self.d1 {
            0.0
        } else {
            CutoffSpec { tau0: 1.0 }.eta((d - self.d0) / (self.d1 - self.d0))
        }
    }

    /// Window for a target at ring parameter `g`: expands until some tube
    /// column leaves the 3x3 cell halo of the target's cell.
    pub fn for_target(
        g: f64,
        target_cell: (i64, i64),
        scatterer: &Scatterer,
        cells: &CellDecomposition,
        ring_len: usize,
    ) -> AdjacencyWindow {
        let dg = 1.0 / ring_len as f64;
        let mut steps_out = ring_len / 2;
        'march: for m in 1..=ring_len / 2 {
            for side in [-1.0, 1.0] {
                let gp = (g + side * m as f64 * dg).rem_euclid(1.0);
                let theta = crate::util::TWO_PI * gp;
                let p = scatterer.shape.point(theta);
                let n = scatterer.shape.normal(theta);
                for depth_frac in [0.0, 0.5, 1.0] {
                    let y = p - n.scale(scatterer.tau0 * depth_frac);
                    if !CellDecomposition::adjacent(cells.cell_of(y), target_cell) {
                        steps_out = m;
                        break 'march;
                    }
                }
            }
        }
        let r_out = steps_out as f64 * dg;
        if r_out >= 0.5 - dg {
            return AdjacencyWindow::full(g);
        }
        AdjacencyWindow {
            center_g: g,
            d0: 0.35 * r_out,
            d1: 0.9 * r_out,
        }
    }
}

/// Transverse nodes and weights of the composite 5-point rule over `[0, t]`
/// and `[t, 1]`, with panels anchored at the split point so that partial
/// panels (and their off-grid nodes) only appear near 0 and 1. The kernel
/// integral has derivative growth toward `t' = t` on both sides, so the
/// corner-adjacent panel is graded dyadically (`CORNER_LEVELS` halvings).
pub fn split_transverse_rule(t: f64, n2: usize) -> Vec<(f64, f64)> {
    const CORNER_LEVELS: usize = 3;
    let h = 1.0 / (n2 - 1) as f64;
    let mut out: Vec<(f64, f64)> = Vec::new();
    let mut push = |nodes: [f64; 5], weights: [f64; 5]| {
        for (x, w) in nodes.iter().zip(&weights) {
            out.push((*x, *w));
        }
    };
    // graded block covering [t - w, t] (or [t, t + w] for `upward`):
    // widths w/2, w/4, ..., w/2^k, w/2^k from the far end toward the corner
    let mut graded = |corner: f64, w: f64, upward: bool, push: &mut dyn FnMut([f64; 5], [f64; 5])| {
        let mut width = w;
        let mut far = w;
        for lev in 0..CORNER_LEVELS {
            width *= 0.5;
            let seg = if lev + 1 == CORNER_LEVELS { far } else { width };
            let (lo_off, len) = if lev + 1 == CORNER_LEVELS {
                (0.0, far)
            } else {
                (far - width, width)
            };
            let _ = seg;
            let (nodes, weights) = if upward {
                boole_panel(corner + lo_off, len / 4.0)
            } else {
                boole_panel(corner - lo_off - len, len / 4.0)
            };
            push(nodes, weights);
            far -= len;
            if far <= 1e-15 {
                break;
            }
        }
    };
    // [0, t], walking down from t in full panels of width 4h, the first
    // (corner-adjacent) block graded
    let mut lo = t;
    if t > 4.0 * h + 1e-13 {
        graded(t, 4.0 * h, false, &mut push);
        lo = t - 4.0 * h;
        while lo > 4.0 * h + 1e-13 {
            let (nodes, weights) = boole_panel(lo - 4.0 * h, h);
            push(nodes, weights);
            lo -= 4.0 * h;
        }
    }
    if lo > 1e-13 {
        if (lo - t).abs() < 1e-13 {
            // the whole [0, t] span fits in one graded block
            graded(t, lo, false, &mut push);
        } else {
            let (nodes, weights) = boole_panel(0.0, lo / 4.0);
            push(nodes, weights);
        }
    }
    // [t, 1], walking up
    let mut hi = t;
    if t < 1.0 - 4.0 * h - 1e-13 {
        graded(t, 4.0 * h, true, &mut push);
        hi = t + 4.0 * h;
        while hi < 1.0 - 4.0 * h - 1e-13 {
            let (nodes, weights) = boole_panel(hi, h);
            push(nodes, weights);
            hi += 4.0 * h;
        }
    }
    if hi < 1.0 - 1e-13 {
        if (hi - t).abs() < 1e-13 {
            graded(t, 1.0 - t, true, &mut push);
        } else {
            let (nodes, weights) = boole_panel(hi, (1.0 - hi) / 4.0);
            push(nodes, weights);
        }
    }
    out
}

/// Density samples blended onto the periodic ring and trigonometrically
/// refined, per transverse level, plus lazily prepared rows at the off-grid
/// levels a batch of targets needs.
pub struct RingData {
    pub ring_len: usize,
    pub refine: usize,
    pub n2: usize,
    /// `[level][refine * ring_len]` refined samples at the grid levels.
    rows: Vec<Vec<Complex64>>,
    /// base (unrefined) ring samples per level, kept for t-interpolation
    base_rows: Vec<Vec<Complex64>>,
    /// refined rows at off-grid transverse positions, keyed by t bits
    extra: BTreeMap<u64, Vec<Complex64>>,
}

pub const RING_REFINE: usize = 4;
/// Local polynomial degree of the mixed trigonometric-polynomial interpolant.
pub const RING_POLY_DEGREE: usize = 6;
/// Transverse interpolation degree for corner-refined levels (the rule order).
pub const T_POLY_DEGREE: usize = 5;

impl RingData {
    /// Blends per-patch samples into ring rows with the partition of unity
    /// (overlap columns hold two independent unknowns for the same physical
    /// point) and refines each row.
    pub fn new(grid: &BoundaryGrid, v: &[Complex64]) -> RingData {
        let ring_len = grid.cover.ring_len;
        let n2 = grid.n2;
        let mut base_rows = vec![vec![Complex64::default(); ring_len]; n2];
        let mut weight = vec![vec![0.0f64; ring_len]; n2];
        for (i, node) in grid.nodes.iter().enumerate() {
            let w = grid.cover.pou_weight(node.patch, grid.cover.ring_g(node.ring));
            base_rows[node.ti][node.ring] += v[i] * w;
            weight[node.ti][node.ring] += w;
        }
        for (row, wrow) in base_rows.iter_mut().zip(&weight) {
            for (z, w) in row.iter_mut().zip(wrow) {
                debug_assert!(*w > 1.0 - 1e-9 && *w < 1.0 + 1e-9);
                if *w > 0.0 {
                    *z /= *w;
                }
            }
        }
        let rows = base_rows
            .iter()
            .map(|r| fourier_upsample(r, RING_REFINE))
            .collect();
        RingData {
            ring_len,
            refine: RING_REFINE,
            n2,
            rows,
            base_rows,
            extra: BTreeMap::new(),
        }
    }

    /// Ensures a refined row exists at transverse position `t` (grid levels
    /// are matched by index).
    pub fn ensure_level(&mut self, t: f64) {
        if self.level_row(t).is_some() {
            return;
        }
        let ht = 1.0 / (self.n2 - 1) as f64;
        // interpolate the unrefined ring across levels, then refine
        let mut row = vec![Complex64::default(); self.ring_len];
        let d = T_POLY_DEGREE.min(self.n2 - 1);
        let pos = t / ht;
        let mut i0 = (pos - d as f64 / 2.0).round() as i64;
        i0 = i0.clamp(0, (self.n2 - 1 - d) as i64);
        let i0 = i0 as usize;
        let ts: Vec<f64> = (0..=d).map(|j| (i0 + j) as f64 * ht).collect();
        let mut col = vec![Complex64::default(); d + 1];
        for (m, slot) in row.iter_mut().enumerate() {
            for (j, c) in col.iter_mut().enumerate() {
                *c = self.base_rows[i0 + j][m];
            }
            *slot = neville(&ts, &col, t);
        }
        self.extra.insert(t.to_bits(), fourier_upsample(&row, RING_REFINE));
    }

    fn level_row(&self, t: f64) -> Option<&[Complex64]> {
        let ht = 1.0 / (self.n2 - 1) as f64;
        let j = (t / ht).round() as i64;
        if j >= 0 && (j as usize) < self.n2 && (t - j as f64 * ht).abs() < 1e-12 {
            return Some(&self.rows[j as usize]);
        }
        self.extra.get(&t.to_bits()).map(|r| r.as_slice())
    }

    /// Mixed trigonometric-polynomial interpolation of the density at ring
    /// parameter `g` on level `t` (the level must have been ensured).
    pub fn interp(&self, g: f64, t: f64) -> Complex64 {
        let row = self
            .level_row(t)
            .expect("transverse level not prepared; call ensure_level");
        let dx = 1.0 / row.len() as f64;
        periodic_local_interp(0.0, dx, row, RING_POLY_DEGREE, g.rem_euclid(1.0))
    }
}

/// The singular boundary quadrature engine for one grid at one wavenumber.
pub struct BoundaryQuad<'a> {
    pub scatterer: &'a Scatterer,
    pub grid: &'a BoundaryGrid,
    pub kappa: f64,
    pub n_tau: usize,
}

impl<'a> BoundaryQuad<'a> {
    pub fn new(scatterer: &'a Scatterer, grid: &'a BoundaryGrid, kappa: f64) -> Self {
        let n_tau = (3 * grid.n1).max(256);
        BoundaryQuad {
            scatterer,
            grid,
            kappa,
            n_tau,
        }
    }

    pub fn levels_for_target(&self, t: f64) -> Vec<f64> {
        split_transverse_rule(t, self.grid.n2)
            .into_iter()
            .map(|(tv, _)| tv)
            .collect()
    }

    /// Windowed singular integral; see module docs.
    pub fn adjacent_integral(
        &self,
        k: usize,
        s: f64,
        t: f64,
        x: Vec2,
        window: &AdjacencyWindow,
        ring: &RingData,
    ) -> Result<Complex64> {
        if !(0.0..=1.0).contains(&s) || !(0.0..=1.0).contains(&t) {
            return Err(Error::TargetOutsidePatch);
        }
        let cover = &self.grid.cover;
        let chart = PatchChart {
            scatterer: self.scatterer,
            cover,
            k,
        };
        let len_g = cover.patch_len_g();
        let delta_s = (window.d1 * 1.0001) / len_g;
        let lo_s = s - (s.min(delta_s));
        let hi_s = s + ((1.0 - s).min(delta_s));
        if hi_s - lo_s < 1e-14 {
            return Ok(Complex64::default());
        }
        let tau_lo = ChangeOfVariable::rho_inverse(lo_s - s);
        let tau_hi = ChangeOfVariable::rho_inverse(hi_s - s);
        // resolve the fastest part of the graded map (the window edges):
        // max ds'/dtau = 5 tau_end^4, so this keeps the s'-steps near the
        // edges below half an s-grid spacing
        let n_tau = self
            .n_tau
            .max((10.0 * delta_s * (self.grid.n1 - 1) as f64).ceil() as usize);
        let d_tau = (tau_hi - tau_lo) / n_tau as f64;
        struct TauGeom {
            tau: f64,
            sp: f64,
            g: f64,
            eta_s: f64,
            wk: f64,
        }
        let mut taus: Vec<TauGeom> = Vec::with_capacity(n_tau + 1);
        for it in 0..=n_tau {
            let tau = tau_lo + it as f64 * d_tau;
            let sp = (s + ChangeOfVariable::rho(tau)).clamp(0.0, 1.0);
            let g = cover.g_of_s(k, sp);
            let eta_s = window.eval(g);
            if eta_s == 0.0 {
                continue;
            }
            let wk = cover.pou_weight(k, g);
            if wk == 0.0 {
                continue;
            }
            taus.push(TauGeom {
                tau,
                sp,
                g,
                eta_s,
                wk,
            });
        }
        let mut total = Complex64::default();
        for (tv, wt) in split_transverse_rule(t, self.grid.n2) {
            let eta_factor = self.scatterer.cutoff.eta(self.scatterer.tau0 * tv);
            if wt == 0.0 || eta_factor == 0.0 {
                continue;
            }
            let mut level_acc = Complex64::default();
            for tg in &taus {
                let y = chart.xi(tg.sp, tv);
                let dist = (x - y).norm();
                if dist == 0.0 {
                    continue; // rho' vanishes fast enough to drop the point
                }
                let phi = ring.interp(tg.g, tv)
                    * (tg.eta_s * tg.wk * chart.jacobian(tg.sp, tv));
                level_acc +=
                    green_kernel(self.kappa, dist) * phi * ChangeOfVariable::rho_prime(tg.tau);
            }
            total += level_acc * (d_tau * wt * eta_factor);
        }
        Ok(total)
    }

    /// Direct near-field sum over boundary nodes adjacent to the target's
    /// cell: the `(1 - eta_s)`-weighted smooth quadrature for boundary
    /// targets carrying a window, or the plain adjacent contribution for
    /// base targets (`window = None`).
    ///
    /// `covered_patches` marks (bit per patch) which patches' eta_s-weighted
    /// portions the singular integrals handle; nodes of other patches keep
    /// their full weight even inside the window, since no integral covers
    /// them. Their densities vanish to all orders toward the patch ends, so
    /// the node quadrature stays accurate there.
    pub fn near_sum(
        &self,
        x: Vec2,
        target_cell: (i64, i64),
        window: Option<(&AdjacencyWindow, u32)>,
        v: &[Complex64],
        cell_nodes: &std::collections::HashMap<(i64, i64), Vec<usize>>,
    ) -> Complex64 {
        let mut acc = Complex64::default();
        for di in -1..=1i64 {
            for dj in -1..=1i64 {
                let key = (target_cell.0 + di, target_cell.1 + dj);
                let Some(list) = cell_nodes.get(&key) else {
                    continue;
                };
                for &ni in list {
                    let node = &self.grid.nodes[ni];
                    let w = node.quad_weight();
                    if w == 0.0 {
                        continue;
                    }
                    let smooth_factor = match window {
                        Some((win, covered)) if covered & (1 << node.patch) != 0 => {
                            1.0 - win.eval(self.grid.cover.ring_g(node.ring))
                        }
                        _ => 1.0,
                    };
                    if smooth_factor == 0.0 {
                        continue;
                    }
                    let dist = (x - node.pos).norm();
                    if dist < 1e-14 {
                        continue;
                    }
                    acc += green_kernel(self.kappa, dist) * v[ni] * (w * smooth_factor);
                }
            }
        }
        acc
    }
}
