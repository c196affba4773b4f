//! Equivalent-source acceleration of non-adjacent interactions.
//!
//! True sources inside each cell are replaced by monopole/dipole layers on a
//! regular grid over two parallel cell faces, fitted by collocation on the
//! boundary of the 3x3 cell halo. All equivalent sources live on one global
//! lattice, so their mutual fields come from two FFT convolutions; after
//! subtracting the direct contribution of the <= 9 near cells, each cell owns
//! samples of its incoming (non-adjacent) field on the halo lattice, which a
//! discretized plane-wave expansion turns into an evaluator at arbitrary
//! points of the cell.

use crate::geometry::Vec2;
use crate::grids::CellDecomposition;
use crate::specfun::{bessel_j_ladder, bessel_y_ladder, green_kernel};
use crate::util::fft::Conv2;
use crate::util::lstsq::{CMat, LstSq};
use crate::util::par::par_collect;
use crate::util::{c64, TWO_PI};
use crate::{Error, Result};
use num_complex::Complex64;
use std::collections::HashMap;

/// Singular-value cutoff of the plane-wave fit, matched to the noise floor
/// of the equivalent-source data: modes below it carry amplified noise, not
/// field.
pub const PW_TRUNCATION: f64 = 3e-10;

/// Field of a unit dipole at `y` with axis `x^` evaluated at `x`:
/// `d/dnu(y) G_k(x - y) = (i k / 4) H_1^1(k |x-y|) (x-y)_1 / |x-y|`.
fn dipole_kernel(kappa: f64, d: Vec2) -> Complex64 {
    let dist = d.norm();
    let z = kappa * dist;
    let h1 = c64(
        bessel_j_ladder(1, z)[1],
        bessel_y_ladder(1, z).expect("dipole kernel wants dist > 0")[1],
    );
    c64(0.0, 0.25 * kappa) * h1 * (d.x / dist)
}

/// Geometry of the equivalent-source machinery, identical for every cell.
pub struct EquivalentSourceLayout {
    pub h_cell: f64,
    /// equivalent-source locations relative to the cell's lower-left corner:
    /// `n_eq/2` points on each of the two faces perpendicular to the x-axis
    pub eq_offsets: Vec<Vec2>,
    /// `4 n_eq` collocation points on the halo boundary
    pub coll_offsets: Vec<Vec2>,
    /// plane-wave directions (unit vectors)
    pub dirs: Vec<Vec2>,
    /// halo equivalent-source points (fit data for the plane-wave expansion)
    pub pw_data_offsets: Vec<Vec2>,
}

impl EquivalentSourceLayout {
    pub fn new(kappa: f64, h_cell: f64) -> Self {
        let mut n_eq = ((3.0 * kappa * h_cell).ceil() as usize).max(16);
        if n_eq % 2 == 1 {
            n_eq += 1;
        }
        let per_face = n_eq / 2;
        let hy = h_cell / per_face as f64;
        let mut eq_offsets = Vec::with_capacity(n_eq);
        for face in 0..2 {
            let x = face as f64 * h_cell;
            for j in 0..per_face {
                eq_offsets.push(Vec2::new(x, (j as f64 + 0.5) * hy));
            }
        }
        // 4 n_eq points spread uniformly around the halo perimeter (side 3H)
        let n_coll = 4 * n_eq;
        let mut coll_offsets = Vec::with_capacity(n_coll);
        let perim = 12.0 * h_cell;
        for i in 0..n_coll {
            let arc = perim * (i as f64 + 0.5) / n_coll as f64;
            let side = (arc / (3.0 * h_cell)).floor() as usize;
            let along = arc - side as f64 * 3.0 * h_cell;
            let p = match side {
                0 => Vec2::new(-h_cell + along, -h_cell),
                1 => Vec2::new(2.0 * h_cell, -h_cell + along),
                2 => Vec2::new(2.0 * h_cell - along, 2.0 * h_cell),
                _ => Vec2::new(-h_cell, 2.0 * h_cell - along),
            };
            coll_offsets.push(p);
        }
        let n_dirs = 8 * n_eq;
        let dirs = (0..n_dirs)
            .map(|l| {
                let phi = TWO_PI * l as f64 / n_dirs as f64;
                Vec2::new(phi.cos(), phi.sin())
            })
            .collect();
        // Fit data for the plane-wave expansion: a closed contour around the
        // cell made of its two equivalent-source faces plus matching point
        // rows on the top and bottom edges. An open two-line contour cannot
        // see the evanescent cross modes of the incoming field; closing it
        // pins the expansion over the whole cell.
        let mut pw_data_offsets = eq_offsets.clone();
        for yrow in 0..2 {
            let y = yrow as f64 * h_cell;
            for m in 0..per_face {
                pw_data_offsets.push(Vec2::new((m as f64 + 0.5) * hy, y));
            }
        }
        EquivalentSourceLayout {
            h_cell,
            eq_offsets,
            coll_offsets,
            dirs,
            pw_data_offsets,
        }
    }

    pub fn n_eq(&self) -> usize {
        self.eq_offsets.len()
    }
}

/// Fitted equivalent sources of one cell.
#[derive(Debug, Clone)]
pub struct EquivalentSourceSet {
    pub cell: (i64, i64),
    pub monopoles: Vec<Complex64>,
    pub dipoles: Vec<Complex64>,
}

/// Plane-wave expansion of one cell's incoming non-adjacent field.
#[derive(Debug, Clone)]
pub struct PlaneWaveExpansion {
    pub cell: (i64, i64),
    pub beta: Vec<Complex64>,
}

/// Operation counters of one accelerated application, for the complexity
/// accounting.
#[derive(Debug, Clone, Copy, Default)]
pub struct AccelOpCounts {
    pub fit_ops: usize,
    pub fft_points: usize,
    pub near_subtract_ops: usize,
    pub pw_fit_ops: usize,
}

pub struct Accelerator {
    pub kappa: f64,
    pub cells: CellDecomposition,
    pub layout: EquivalentSourceLayout,
    source_fit: LstSq,
    pw_fit: LstSq,
    pw_basis: CMat,
    /// fields at the source lattice itself (vertical-face points)
    conv_mono: Conv2,
    conv_dip: Conv2,
    /// fields at the half-shifted lattice carrying the horizontal edge rows
    conv_mono_h: Conv2,
    conv_dip_h: Conv2,
    /// fine lattice: spacing (hy, hy), ghost ring of one cell per side;
    /// sources occupy every `per_face`-th column
    cols: usize,
    rows: usize,
    per_face: usize,
    hy: f64,
}

impl Accelerator {
    pub fn new(kappa: f64, cells: CellDecomposition) -> Result<Accelerator> {
        let layout = EquivalentSourceLayout::new(kappa, cells.h_cell);
        let n_eq = layout.n_eq();
        let h = cells.h_cell;
        // collocation matrix: per eq point, a monopole and a dipole column
        let mut a = CMat::zeros(layout.coll_offsets.len(), 2 * n_eq);
        for (r, cp) in layout.coll_offsets.iter().enumerate() {
            for (l, ep) in layout.eq_offsets.iter().enumerate() {
                let d = *cp - *ep;
                a.set(r, l, green_kernel(kappa, d.norm()));
                a.set(r, n_eq + l, dipole_kernel(kappa, d));
            }
        }
        let source_fit = LstSq::new(&a);
        let (smin, smax) = source_fit.smin_smax();
        if smin < 1e-12 * smax {
            return Err(Error::ResonantCell);
        }
        // plane-wave basis at the halo eq points, centered on the cell
        let center = Vec2::new(0.5 * h, 0.5 * h);
        let mut b = CMat::zeros(layout.pw_data_offsets.len(), layout.dirs.len());
        for (r, p) in layout.pw_data_offsets.iter().enumerate() {
            let rel = *p - center;
            for (l, dvec) in layout.dirs.iter().enumerate() {
                b.set(r, l, Complex64::from_polar(1.0, kappa * dvec.dot(rel)));
            }
        }
        let pw_fit = LstSq::new(&b);
        // fine global lattice with a one-cell ghost ring: grid points at
        // x = ix hy, y = (iy + 1/2) hy from the ghost corner; equivalent
        // sources sit on every per_face-th column
        let l = cells.l;
        let per_face = n_eq / 2;
        let hy = h / per_face as f64;
        let cols = (l + 2) * per_face + 1;
        let rows = (l + 2) * per_face;
        let conv_mono = Conv2::new(cols, rows, |di, dj| {
            if di == 0 && dj == 0 {
                Complex64::default()
            } else {
                let d = Vec2::new(di as f64 * hy, dj as f64 * hy);
                green_kernel(kappa, d.norm())
            }
        });
        let conv_dip = Conv2::new(cols, rows, |di, dj| {
            if di == 0 && dj == 0 {
                Complex64::default()
            } else {
                dipole_kernel(kappa, Vec2::new(di as f64 * hy, dj as f64 * hy))
            }
        });
        // kernels to the half-shifted targets (horizontal edge rows sit at
        // offset (hy/2, -hy/2) from the source lattice): never singular
        let conv_mono_h = Conv2::new(cols, rows, |di, dj| {
            let d = Vec2::new((di as f64 + 0.5) * hy, (dj as f64 - 0.5) * hy);
            green_kernel(kappa, d.norm())
        });
        let conv_dip_h = Conv2::new(cols, rows, |di, dj| {
            dipole_kernel(kappa, Vec2::new((di as f64 + 0.5) * hy, (dj as f64 - 0.5) * hy))
        });
        Ok(Accelerator {
            kappa,
            cells,
            layout,
            source_fit,
            pw_fit,
            pw_basis: b,
            conv_mono,
            conv_dip,
            conv_mono_h,
            conv_dip_h,
            cols,
            rows,
            per_face,
            hy,
        })
    }

    fn cell_origin(&self, cell: (i64, i64)) -> Vec2 {
        self.cells.origin
            + Vec2::new(
                cell.0 as f64 * self.cells.h_cell,
                cell.1 as f64 * self.cells.h_cell,
            )
    }

    /// fine-lattice slot of a vertical-face point `offset` relative to `cell`
    fn lattice_index(&self, cell: (i64, i64), offset: Vec2) -> (usize, usize) {
        let col = ((offset.x / self.hy).round() as i64
            + (cell.0 + 1) * self.per_face as i64) as usize;
        let row_f = (offset.y + self.cells.h_cell) / self.hy - 0.5
            + (cell.1 * self.per_face as i64) as f64;
        let row = row_f.round() as usize;
        (col, row)
    }

    /// fine-lattice slot whose half-shifted image is the horizontal edge
    /// point `offset` relative to `cell`
    fn lattice_index_h(&self, cell: (i64, i64), offset: Vec2) -> (usize, usize) {
        // offset = ((m + 1/2) hy, yrow * H); shifted target = lattice(ix,iy)
        // + (hy/2, -hy/2) with ix = cell-col * pf + m, iy chosen so that
        // (iy + 1/2) hy - hy/2 = (cell.1 + yrow + 1) H
        let m = (offset.x / self.hy - 0.5).round() as i64;
        let col = ((cell.0 + 1) * self.per_face as i64 + m) as usize;
        let yrow = (offset.y / self.cells.h_cell).round() as i64;
        let row = ((cell.1 + yrow + 1) * self.per_face as i64) as usize;
        (col, row)
    }

    #[inline]
    fn is_horizontal_data(&self, idx: usize) -> bool {
        idx >= self.layout.n_eq()
    }

    /// Fits the equivalent sources of one cell from its true sources.
    pub fn fit_equivalent_sources(
        &self,
        cell: (i64, i64),
        sources: &[(Vec2, Complex64)],
    ) -> EquivalentSourceSet {
        let n_eq = self.layout.n_eq();
        if sources.is_empty() {
            return EquivalentSourceSet {
                cell,
                monopoles: vec![Complex64::default(); n_eq],
                dipoles: vec![Complex64::default(); n_eq],
            };
        }
        let origin = self.cell_origin(cell);
        let b: Vec<Complex64> = self
            .layout
            .coll_offsets
            .iter()
            .map(|cp| {
                let p = origin + *cp;
                sources
                    .iter()
                    .map(|(y, s)| green_kernel(self.kappa, (p - *y).norm()) * s)
                    .sum()
            })
            .collect();
        let x = self.source_fit.solve(&b, 1e-13);
        EquivalentSourceSet {
            cell,
            monopoles: x[..n_eq].to_vec(),
            dipoles: x[n_eq..].to_vec(),
        }
    }

    /// Field of one cell's equivalent sources at an arbitrary point.
    pub fn eq_field_at(&self, set: &EquivalentSourceSet, x: Vec2) -> Complex64 {
        let origin = self.cell_origin(set.cell);
        let mut acc = Complex64::default();
        for (l, ep) in self.layout.eq_offsets.iter().enumerate() {
            let d = x - (origin + *ep);
            let dist = d.norm();
            if dist < 1e-14 {
                continue;
            }
            acc += green_kernel(self.kappa, dist) * set.monopoles[l]
                + dipole_kernel(self.kappa, d) * set.dipoles[l];
        }
        acc
    }

    /// The full accelerated pipeline: fit all cells, convolve globally,
    /// subtract near fields, and fit the per-cell plane-wave expansions.
    pub fn build_expansions(
        &self,
        grouped: &HashMap<(i64, i64), Vec<(Vec2, Complex64)>>,
    ) -> Result<(HashMap<(i64, i64), PlaneWaveExpansion>, AccelOpCounts)> {
        let mut counts = AccelOpCounts::default();
        let occupied: Vec<(i64, i64)> = {
            let mut v: Vec<_> = grouped.keys().cloned().collect();
            v.sort();
            v
        };
        let sets: Vec<EquivalentSourceSet> = par_collect(occupied.len(), |i| {
            let cell = occupied[i];
            self.fit_equivalent_sources(cell, &grouped[&cell])
        });
        counts.fit_ops = occupied.len()
            * self.layout.coll_offsets.len()
            * (grouped.values().map(|v| v.len()).sum::<usize>() / occupied.len().max(1)
                + 2 * self.layout.n_eq());
        // scatter strengths onto the global lattice
        let mut mono = vec![Complex64::default(); self.cols * self.rows];
        let mut dip = vec![Complex64::default(); self.cols * self.rows];
        for set in &sets {
            for (l, ep) in self.layout.eq_offsets.iter().enumerate() {
                let (c, r) = self.lattice_index(set.cell, *ep);
                mono[c * self.rows + r] += set.monopoles[l];
                dip[c * self.rows + r] += set.dipoles[l];
            }
        }
        let field_mono = self.conv_mono.apply(&mono);
        let field_dip = self.conv_dip.apply(&dip);
        let field_mono_h = self.conv_mono_h.apply(&mono);
        let field_dip_h = self.conv_dip_h.apply(&dip);
        counts.fft_points = 2 * self.cols * self.rows;
        // near map for the subtraction
        let by_cell: HashMap<(i64, i64), &EquivalentSourceSet> =
            sets.iter().map(|s| (s.cell, s)).collect();
        let pw_list: Vec<Result<PlaneWaveExpansion>> = par_collect(occupied.len(), |i| {
            let cell = occupied[i];
            let origin = self.cell_origin(cell);
            let data: Vec<Complex64> = self
                .layout
                .pw_data_offsets
                .iter()
                .enumerate()
                .map(|(idx, off)| {
                    let mut v = if self.is_horizontal_data(idx) {
                        let (c, r) = self.lattice_index_h(cell, *off);
                        field_mono_h[c * self.rows + r] + field_dip_h[c * self.rows + r]
                    } else {
                        let (c, r) = self.lattice_index(cell, *off);
                        field_mono[c * self.rows + r] + field_dip[c * self.rows + r]
                    };
                    // subtract the 5x5 neighborhood directly; the second
                    // ring is re-added per target from its true sources
                    for di in -2..=2i64 {
                        for dj in -2..=2i64 {
                            if let Some(near) = by_cell.get(&(cell.0 + di, cell.1 + dj)) {
                                v -= self.eq_field_at(near, origin + *off);
                            }
                        }
                    }
                    v
                })
                .collect();
            let beta = self.pw_fit.solve(&data, PW_TRUNCATION);
            // fit-quality guard
            let recon = self.pw_basis.matvec(&beta);
            let scale: f64 = data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            let resid: f64 = recon
                .iter()
                .zip(&data)
                .map(|(a, b)| (a - b).norm_sqr())
                .sum::<f64>()
                .sqrt();
            if scale > 1e-13 && resid > 1e-6 * scale {
                return Err(Error::IllConditioned(resid / scale));
            }
            Ok(PlaneWaveExpansion { cell, beta })
        });
        counts.near_subtract_ops =
            occupied.len() * self.layout.pw_data_offsets.len() * 25 * 2 * self.layout.n_eq();
        counts.pw_fit_ops =
            occupied.len() * self.layout.pw_data_offsets.len() * self.layout.dirs.len();
        let mut map = HashMap::new();
        for pw in pw_list {
            let pw = pw?;
            map.insert(pw.cell, pw);
        }
        // cells without sources still receive field; fit their expansions too
        let mut empty_cells = Vec::new();
        for ci in 0..self.cells.l as i64 {
            for cj in 0..self.cells.l as i64 {
                if !map.contains_key(&(ci, cj)) {
                    empty_cells.push((ci, cj));
                }
            }
        }
        let extra: Vec<Result<PlaneWaveExpansion>> = par_collect(empty_cells.len(), |i| {
            let cell = empty_cells[i];
            let origin = self.cell_origin(cell);
            let data: Vec<Complex64> = self
                .layout
                .pw_data_offsets
                .iter()
                .enumerate()
                .map(|(idx, off)| {
                    let mut v = if self.is_horizontal_data(idx) {
                        let (c, r) = self.lattice_index_h(cell, *off);
                        field_mono_h[c * self.rows + r] + field_dip_h[c * self.rows + r]
                    } else {
                        let (c, r) = self.lattice_index(cell, *off);
                        field_mono[c * self.rows + r] + field_dip[c * self.rows + r]
                    };
                    for di in -2..=2i64 {
                        for dj in -2..=2i64 {
                            if let Some(near) = by_cell.get(&(cell.0 + di, cell.1 + dj)) {
                                v -= self.eq_field_at(near, origin + *off);
                            }
                        }
                    }
                    v
                })
                .collect();
            let beta = self.pw_fit.solve(&data, PW_TRUNCATION);
            Ok(PlaneWaveExpansion { cell, beta })
        });
        for pw in extra {
            let pw = pw?;
            map.insert(pw.cell, pw);
        }
        Ok((map, counts))
    }

    /// Evaluates the non-adjacent field at `x`: the plane-wave expansion
    /// carries cells beyond the 5x5 neighborhood; the second ring (the 16
    /// cells between the 3x3 and 5x5 neighborhoods) is summed directly from
    /// its true sources.
    pub fn field_at(
        &self,
        expansions: &HashMap<(i64, i64), PlaneWaveExpansion>,
        grouped: &HashMap<(i64, i64), Vec<(Vec2, Complex64)>>,
        x: Vec2,
    ) -> Complex64 {
        let cell = self.cells.cell_of(x);
        let mut acc = Complex64::default();
        if let Some(pw) = expansions.get(&cell) {
            let center = self.cell_origin(cell) + Vec2::new(0.5, 0.5).scale(self.cells.h_cell);
            let rel = x - center;
            for (l, d) in self.layout.dirs.iter().enumerate() {
                acc += pw.beta[l] * Complex64::from_polar(1.0, self.kappa * d.dot(rel));
            }
        }
        for di in -2..=2i64 {
            for dj in -2..=2i64 {
                if di.abs() <= 1 && dj.abs() <= 1 {
                    continue;
                }
                if let Some(list) = grouped.get(&(cell.0 + di, cell.1 + dj)) {
                    for (y, s) in list {
                        acc += green_kernel(self.kappa, (x - *y).norm()) * s;
                    }
                }
            }
        }
        acc
    }

    /// Direct non-adjacent summation (the oracle and the unaccelerated path).
    pub fn direct_nonadjacent(
        &self,
        grouped: &HashMap<(i64, i64), Vec<(Vec2, Complex64)>>,
        x: Vec2,
    ) -> Complex64 {
        let cell = self.cells.cell_of(x);
        let mut acc = Complex64::default();
        for (c, list) in grouped {
            if CellDecomposition::adjacent(*c, cell) {
                continue;
            }
            for (y, s) in list {
                acc += green_kernel(self.kappa, (x - *y).norm()) * s;
            }
        }
        acc
    }
}

/// Groups weighted sources by cell.
pub fn group_sources(
    cells: &CellDecomposition,
    sources: impl Iterator<Item = (Vec2, Complex64)>,
) -> HashMap<(i64, i64), Vec<(Vec2, Complex64)>> {
    let mut map: HashMap<(i64, i64), Vec<(Vec2, Complex64)>> = HashMap::new();
    for (p, s) in sources {
        if s != Complex64::default() {
            map.entry(cells.cell_of(p)).or_default().push((p, s));
        }
    }
    map
}
