//! Assembly of the discrete volume-potential operator from the four grid
//! interactions and the matrix-free GMRES solve of
//! `u + kappa^2 A_h(m u) = u_inc`.

use crate::accel::{group_sources, Accelerator, PlaneWaveExpansion};
use crate::base_atm::BaseAtm;
use crate::base_pct::{BasePct, DEFAULT_P};
use crate::boundary_quad::{AdjacencyWindow, BoundaryQuad, RingData};
use crate::geometry::{Scatterer, Vec2};
use crate::grids::{build_grids, BackendKind, BaseGrid, GridSet, GridSpec, NodeClass, OmegaNode};
use crate::interp::{
    BaseFieldInterp, BoundaryFieldInterp, CartesianFieldInterp, PolarFieldInterp, WindowFunction,
};
use crate::util::par::par_collect;
use crate::util::{l2_norm, TWO_PI};
use crate::{Error, Result};
use num_complex::Complex64;
use std::collections::HashMap;
use std::sync::Mutex;
use std::time::Instant;

/// Which fast base-quadrature backend evaluates the base-base interaction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Backend {
    /// Pre-corrected trapezoidal rule on the Cartesian grid.
    Pct,
    /// Addition-theorem modal scheme on the polar grid.
    Atm,
}

enum BaseEngine {
    Pct(BasePct),
    Atm(BaseAtm),
}

/// Wall-time breakdown of the operator applications (milliseconds).
#[derive(Debug, Clone, Copy, Default)]
pub struct StageTimings {
    pub base_ms: f64,
    pub boundary_ms: f64,
    pub accel_ms: f64,
    pub interp_ms: f64,
}

/// Solve statistics and error metrics.
#[derive(Debug, Clone, Default)]
pub struct SolveReport {
    pub num_it: usize,
    pub residual: f64,
    pub timings: StageTimings,
    pub eps_inf: Option<f64>,
    pub eps_2: Option<f64>,
}

pub struct GmresParams {
    pub tol: f64,
    pub restart: usize,
    pub max_it: usize,
}

impl Default for GmresParams {
    fn default() -> Self {
        GmresParams {
            tol: 1e-10,
            restart: 200,
            max_it: 500,
        }
    }
}

/// One discretized scattering problem with all precomputations done; the
/// operator application is read-only and internally parallel.
pub struct Discretization {
    pub scatterer: Scatterer,
    pub kappa: f64,
    pub grids: GridSet,
    pub backend: Backend,
    pub accelerated: bool,
    base: BaseEngine,
    accel: Accelerator,
    window_cart: Option<WindowFunction>,
    /// per boundary node: adjacency window and cell
    windows: Vec<AdjacencyWindow>,
    bnd_cells: Vec<(i64, i64)>,
    cell_nodes: HashMap<(i64, i64), Vec<usize>>,
    /// per base node: chart coordinates (ring parameter, transverse) when in
    /// the tube
    tube_coords: Vec<Option<(f64, f64)>>,
    /// omega slot of each base node (None for exterior)
    base_slot: Vec<Option<usize>>,
    n_boundary: usize,
    /// transverse levels the singular quadrature needs, shared by all targets
    levels: Vec<f64>,
    timings: Mutex<StageTimings>,
}

impl Discretization {
    pub fn build(
        scatterer: &Scatterer,
        kappa: f64,
        spec: &GridSpec,
        backend: Backend,
        accelerated: bool,
    ) -> Result<Discretization> {
        let kind = match backend {
            Backend::Pct => BackendKind::Cartesian,
            Backend::Atm => BackendKind::Polar,
        };
        let grids = build_grids(scatterer, spec, kappa, kind)?;
        let base = match (&grids.base, backend) {
            (BaseGrid::Cartesian(g), Backend::Pct) => {
                BaseEngine::Pct(BasePct::new(g, kappa, DEFAULT_P)?)
            }
            (BaseGrid::Polar(g), Backend::Atm) => BaseEngine::Atm(BaseAtm::new(g, kappa)?),
            _ => unreachable!(),
        };
        let window_cart = match &grids.base {
            BaseGrid::Cartesian(g) => Some(WindowFunction::for_grid(scatterer, g)?),
            BaseGrid::Polar(_) => None,
        };
        let accel = Accelerator::new(kappa, grids.cells.clone())?;
        let n_boundary = grids.boundary.len();
        let bnd_cells: Vec<(i64, i64)> = grids
            .boundary
            .nodes
            .iter()
            .map(|n| grids.cells.cell_of(n.pos))
            .collect();
        let ring_len = grids.boundary.cover.ring_len;
        let windows: Vec<AdjacencyWindow> = par_collect(n_boundary, |i| {
            let node = &grids.boundary.nodes[i];
            AdjacencyWindow::for_target(
                grids.boundary.cover.ring_g(node.ring),
                bnd_cells[i],
                scatterer,
                &grids.cells,
                ring_len,
            )
        });
        let mut cell_nodes: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
        for (i, c) in bnd_cells.iter().enumerate() {
            cell_nodes.entry(*c).or_default().push(i);
        }
        // chart coordinates of tube base nodes
        let tube_coords: Vec<Option<(f64, f64)>> = par_collect(grids.base.len(), |idx| {
            if grids.base.class(idx) != NodeClass::Boundary {
                return None;
            }
            let p = grids.base.position(idx);
            match scatterer.project_to_boundary(p) {
                Ok((theta, tau)) => Some((theta / TWO_PI, tau / scatterer.tau0)),
                Err(_) => None,
            }
        });
        let mut base_slot = vec![None; grids.base.len()];
        for (slot, node) in grids.omega_h.iter().enumerate() {
            if let OmegaNode::Base(idx) = node {
                base_slot[*idx] = Some(slot);
            }
        }
        // transverse levels: union over the distinct grid depths
        let bq = BoundaryQuad::new(scatterer, &grids.boundary, kappa);
        let mut levels: Vec<f64> = Vec::new();
        for ti in 0..grids.boundary.n2 {
            let t = ti as f64 / (grids.boundary.n2 - 1) as f64;
            for lv in bq.levels_for_target(t) {
                if !levels.iter().any(|x| (x - lv).abs() < 1e-12) {
                    levels.push(lv);
                }
            }
        }
        Ok(Discretization {
            scatterer: scatterer.clone(),
            kappa,
            grids,
            backend,
            accelerated,
            base,
            accel,
            window_cart,
            windows,
            bnd_cells,
            cell_nodes,
            tube_coords,
            base_slot,
            n_boundary,
            levels,
            timings: Mutex::new(StageTimings::default()),
        })
    }

    pub fn n_unknowns(&self) -> usize {
        self.grids.omega_h.len()
    }

    /// Reported unknown count in the tabulation convention.
    pub fn reported_unknowns(&self) -> usize {
        self.grids.spec.unknown_count()
    }

    pub fn take_timings(&self) -> StageTimings {
        std::mem::take(&mut *self.timings.lock().unwrap())
    }

    /// Contrast at every approximation-grid node.
    pub fn contrast_vector(&self) -> Vec<Complex64> {
        self.grids
            .omega_pos
            .iter()
            .map(|p| self.scatterer.contrast.eval_inside(*p))
            .collect()
    }

    /// Incident plane wave `exp(i kappa d . x)` at every node.
    pub fn incident_vector(&self, direction: Vec2) -> Vec<Complex64> {
        self.grids
            .omega_pos
            .iter()
            .map(|p| Complex64::from_polar(1.0, self.kappa * direction.dot(*p)))
            .collect()
    }

    /// Extended-density samples on the full base grid from a field vector.
    fn base_density(&self, v: &[Complex64]) -> Vec<Complex64> {
        let n = self.grids.base.len();
        let mut out = vec![Complex64::default(); n];
        for (idx, slot) in self.base_slot.iter().enumerate() {
            if let Some(s) = slot {
                out[idx] = v[*s] * self.grids.base.ext_factor(idx);
            }
        }
        out
    }

    /// The volume-potential operator `A_h` on a field vector over the
    /// approximation grid.
    pub fn apply_a(&self, v: &[Complex64]) -> Result<Vec<Complex64>> {
        if v.len() != self.n_unknowns() {
            return Err(Error::ShapeMismatch {
                expected: self.n_unknowns(),
                got: v.len(),
            });
        }
        // base-base
        let t0 = Instant::now();
        let density = self.base_density(v);
        let a_e_base = match &self.base {
            BaseEngine::Pct(p) => p.apply(&density)?,
            BaseEngine::Atm(a) => a.apply(&density)?,
        };
        let base_ms = t0.elapsed().as_secs_f64() * 1e3;

        // boundary-base: interpolate the base potential to boundary targets
        let t0 = Instant::now();
        let interp = match (&self.grids.base, &self.window_cart) {
            (BaseGrid::Cartesian(g), Some(w)) => {
                BaseFieldInterp::Cartesian(CartesianFieldInterp::new(g, w, &a_e_base))
            }
            (BaseGrid::Polar(g), _) => BaseFieldInterp::Polar(PolarFieldInterp::new(g, &a_e_base)),
            _ => unreachable!(),
        };
        let a_e_boundary: Vec<Complex64> = par_collect(self.n_boundary, |i| {
            interp.eval(self.grids.boundary.nodes[i].pos)
        });
        let interp_ms1 = t0.elapsed().as_secs_f64() * 1e3;

        // boundary sources and the far-field machinery
        let t0 = Instant::now();
        let vb = &v[..self.n_boundary];
        let grouped = group_sources(
            &self.grids.cells,
            self.grids
                .boundary
                .nodes
                .iter()
                .zip(vb)
                .map(|(n, val)| (n.pos, val * n.quad_weight())),
        );
        let expansions: Option<HashMap<(i64, i64), PlaneWaveExpansion>> = if self.accelerated {
            Some(self.accel.build_expansions(&grouped)?.0)
        } else {
            None
        };
        let far_at = |x: Vec2| -> Complex64 {
            match &expansions {
                Some(map) => self.accel.field_at(map, &grouped, x),
                None => self.accel.direct_nonadjacent(&grouped, x),
            }
        };
        let accel_ms = t0.elapsed().as_secs_f64() * 1e3;

        // boundary-boundary: windowed singular integral per covering patch
        // plus the (1 - eta_s)-weighted near sum plus the far field
        let t0 = Instant::now();
        let bq = BoundaryQuad::new(&self.scatterer, &self.grids.boundary, self.kappa);
        let mut ring = RingData::new(&self.grids.boundary, vb);
        for lv in &self.levels {
            ring.ensure_level(*lv);
        }
        let a_b_boundary: Vec<Complex64> = {
            let ring = &ring;
            let grouped = &grouped;
            let far_at = &far_at;
            par_collect(self.n_boundary, |i| {
                let node = &self.grids.boundary.nodes[i];
                let g = self.grids.boundary.cover.ring_g(node.ring);
                let window = &self.windows[i];
                let mut acc = Complex64::default();
                // singular windowed integral over every patch containing x
                let mut covered = 0u32;
                for k in 0..self.grids.boundary.cover.k_patches {
                    if let Some(s) = self.grids.boundary.cover.s_of_g(k, g) {
                        covered |= 1 << k;
                        acc += bq
                            .adjacent_integral(k, s, node.t, node.pos, window, ring)
                            .expect("target inside its own patch");
                    }
                }
                acc += bq.near_sum(
                    node.pos,
                    self.bnd_cells[i],
                    Some((window, covered)),
                    vb,
                    &self.cell_nodes,
                );
                acc + far_at(node.pos)
            })
        };
        let boundary_ms = t0.elapsed().as_secs_f64() * 1e3;

        // base-boundary: direct near quadrature plus far field at interior
        // nodes; interpolation of the boundary potential at tube nodes
        let t0 = Instant::now();
        let bfi = BoundaryFieldInterp::new(&self.grids.boundary, &a_b_boundary);
        let n_total = self.n_unknowns();
        let out: Vec<Complex64> = {
            let grouped = &grouped;
            let far_at = &far_at;
            let bq = &bq;
            par_collect(n_total, |slot| {
                match self.grids.omega_h[slot] {
                    OmegaNode::Boundary(i) => a_e_boundary[i] + a_b_boundary[i],
                    OmegaNode::Base(idx) => {
                        let a_e = a_e_base[idx];
                        let p = self.grids.base.position(idx);
                        let a_b = match self.tube_coords[idx] {
                            Some((g, t)) => bfi.eval(g, t),
                            None => {
                                // interior node: smooth quadrature split into
                                // near (direct) and far (accelerated) parts
                                let cell = self.grids.cells.cell_of(p);
                                bq.near_sum(p, cell, None, vb, &self.cell_nodes) + far_at(p)
                            }
                        };
                        a_e + a_b
                    }
                }
            })
        };
        let interp_ms2 = t0.elapsed().as_secs_f64() * 1e3;

        let mut t = self.timings.lock().unwrap();
        t.base_ms += base_ms;
        t.boundary_ms += boundary_ms;
        t.accel_ms += accel_ms;
        t.interp_ms += interp_ms1 + interp_ms2;
        Ok(out)
    }

    /// Full Lippmann-Schwinger operator `v -> v + kappa^2 A_h(m v)`.
    pub fn apply_operator(&self, v: &[Complex64], m: &[Complex64]) -> Result<Vec<Complex64>> {
        let mv: Vec<Complex64> = v.iter().zip(m).map(|(a, b)| a * b).collect();
        let av = self.apply_a(&mv)?;
        let k2 = self.kappa * self.kappa;
        Ok(v.iter().zip(&av).map(|(vi, ai)| vi + ai * k2).collect())
    }

    /// Evaluates the volume potential of a given density (sampled on the
    /// approximation grid) at arbitrary points inside the scatterer; used for
    /// fine-grid self-reference.
    pub fn eval_potential_at(
        &self,
        density: &[Complex64],
        points: &[Vec2],
    ) -> Result<Vec<Complex64>> {
        let dens_base = self.base_density(density);
        let a_e_base = match &self.base {
            BaseEngine::Pct(p) => p.apply(&dens_base)?,
            BaseEngine::Atm(a) => a.apply(&dens_base)?,
        };
        let interp = match (&self.grids.base, &self.window_cart) {
            (BaseGrid::Cartesian(g), Some(w)) => {
                BaseFieldInterp::Cartesian(CartesianFieldInterp::new(g, w, &a_e_base))
            }
            (BaseGrid::Polar(g), _) => BaseFieldInterp::Polar(PolarFieldInterp::new(g, &a_e_base)),
            _ => unreachable!(),
        };
        let vb = &density[..self.n_boundary];
        let grouped = group_sources(
            &self.grids.cells,
            self.grids
                .boundary
                .nodes
                .iter()
                .zip(vb)
                .map(|(n, val)| (n.pos, val * n.quad_weight())),
        );
        let expansions = if self.accelerated {
            Some(self.accel.build_expansions(&grouped)?.0)
        } else {
            None
        };
        // boundary potential at the boundary grid, for tube targets
        let bq = BoundaryQuad::new(&self.scatterer, &self.grids.boundary, self.kappa);
        let mut ring = RingData::new(&self.grids.boundary, vb);
        for lv in &self.levels {
            ring.ensure_level(*lv);
        }
        let far_at = |x: Vec2| -> Complex64 {
            match &expansions {
                Some(map) => self.accel.field_at(map, &grouped, x),
                None => self.accel.direct_nonadjacent(&grouped, x),
            }
        };
        let a_b_boundary: Vec<Complex64> = {
            let ring = &ring;
            par_collect(self.n_boundary, |i| {
                let node = &self.grids.boundary.nodes[i];
                let g = self.grids.boundary.cover.ring_g(node.ring);
                let window = &self.windows[i];
                let mut acc = Complex64::default();
                let mut covered = 0u32;
                for k in 0..self.grids.boundary.cover.k_patches {
                    if let Some(s) = self.grids.boundary.cover.s_of_g(k, g) {
                        covered |= 1 << k;
                        acc += bq
                            .adjacent_integral(k, s, node.t, node.pos, window, ring)
                            .expect("target inside its own patch");
                    }
                }
                acc += bq.near_sum(
                    node.pos,
                    self.bnd_cells[i],
                    Some((window, covered)),
                    vb,
                    &self.cell_nodes,
                );
                acc + far_at(node.pos)
            })
        };
        let bfi = BoundaryFieldInterp::new(&self.grids.boundary, &a_b_boundary);
        Ok(par_collect(points.len(), |pi| {
            let p = points[pi];
            let a_e = interp.eval(p);
            let a_b = match self.scatterer.project_to_boundary(p) {
                Ok((theta, tau)) => bfi.eval(theta / TWO_PI, tau / self.scatterer.tau0),
                Err(_) => {
                    let cell = self.grids.cells.cell_of(p);
                    bq.near_sum(p, cell, None, vb, &self.cell_nodes) + far_at(p)
                }
            };
            a_e + a_b
        }))
    }
}

/// Restarted GMRES for the matrix-free complex operator.
pub fn gmres<F>(
    op: F,
    rhs: &[Complex64],
    params: &GmresParams,
) -> Result<(Vec<Complex64>, usize, f64, Vec<f64>)>
where
    F: Fn(&[Complex64]) -> Result<Vec<Complex64>>,
{
    let n = rhs.len();
    let bnorm = l2_norm(rhs).max(f64::MIN_POSITIVE);
    let mut x = vec![Complex64::default(); n];
    let mut total_it = 0usize;
    let mut history = Vec::new();
    loop {
        // residual of the current iterate
        let ax = op(&x)?;
        let mut r: Vec<Complex64> = rhs.iter().zip(&ax).map(|(b, a)| b - a).collect();
        let rnorm = l2_norm(&r);
        history.push(rnorm / bnorm);
        if rnorm / bnorm <= params.tol || total_it >= params.max_it {
            if rnorm / bnorm > params.tol {
                return Err(Error::MaxIterations(total_it, rnorm / bnorm));
            }
            return Ok((x, total_it.max(1), rnorm / bnorm, history));
        }
        let inv = 1.0 / rnorm;
        for z in r.iter_mut() {
            *z *= inv;
        }
        let m = params.restart.min(params.max_it - total_it);
        let mut basis: Vec<Vec<Complex64>> = vec![r];
        let mut h = vec![vec![Complex64::default(); 0]; 0]; // h[j] has j+2 entries
        let mut cs: Vec<Complex64> = Vec::new();
        let mut sn: Vec<Complex64> = Vec::new();
        let mut g = vec![Complex64::default(); m + 1];
        g[0] = Complex64::new(rnorm, 0.0);
        let mut k_used = 0usize;
        let mut converged = false;
        for j in 0..m {
            let mut w = op(&basis[j])?;
            let mut hj = vec![Complex64::default(); j + 2];
            // modified Gram-Schmidt
            for (i, q) in basis.iter().enumerate() {
                let mut dot = Complex64::default();
                for (a, b) in q.iter().zip(&w) {
                    dot += a.conj() * b;
                }
                hj[i] = dot;
                for (wv, qv) in w.iter_mut().zip(q) {
                    *wv -= dot * qv;
                }
            }
            let wnorm = l2_norm(&w);
            hj[j + 1] = Complex64::new(wnorm, 0.0);
            // apply accumulated rotations
            for i in 0..j {
                let tmp = cs[i].conj() * hj[i] + sn[i].conj() * hj[i + 1];
                hj[i + 1] = -sn[i] * hj[i] + cs[i] * hj[i + 1];
                hj[i] = tmp;
            }
            // new rotation annihilating hj[j+1]
            let denom = (hj[j].norm_sqr() + hj[j + 1].norm_sqr()).sqrt();
            let (c, s) = if denom == 0.0 {
                (Complex64::new(1.0, 0.0), Complex64::default())
            } else {
                (hj[j] / denom, hj[j + 1] / denom)
            };
            cs.push(c);
            sn.push(s);
            let tmp = c.conj() * hj[j] + s.conj() * hj[j + 1];
            hj[j] = tmp;
            hj[j + 1] = Complex64::default();
            let gt = c.conj() * g[j] + s.conj() * g[j + 1];
            g[j + 1] = -s * g[j] + c * g[j + 1];
            g[j] = gt;
            h.push(hj);
            total_it += 1;
            k_used = j + 1;
            let res = g[j + 1].norm() / bnorm;
            history.push(res);
            if res <= params.tol || wnorm < 1e-300 {
                converged = true;
                break;
            }
            if total_it >= params.max_it {
                break;
            }
            let inv = 1.0 / wnorm;
            for z in w.iter_mut() {
                *z *= inv;
            }
            basis.push(w);
        }
        // back substitution
        let mut y = vec![Complex64::default(); k_used];
        for i in (0..k_used).rev() {
            let mut acc = g[i];
            for jj in i + 1..k_used {
                acc -= h[jj][i] * y[jj];
            }
            y[i] = acc / h[i][i];
        }
        for (i, yi) in y.iter().enumerate() {
            for (xv, qv) in x.iter_mut().zip(&basis[i]) {
                *xv += yi * qv;
            }
        }
        if converged {
            let ax = op(&x)?;
            let r: Vec<Complex64> = rhs.iter().zip(&ax).map(|(b, a)| b - a).collect();
            let res = l2_norm(&r) / bnorm;
            return Ok((x, total_it, res, history));
        }
        if total_it >= params.max_it {
            let ax = op(&x)?;
            let r: Vec<Complex64> = rhs.iter().zip(&ax).map(|(b, a)| b - a).collect();
            let res = l2_norm(&r) / bnorm;
            if res <= params.tol {
                return Ok((x, total_it, res, history));
            }
            return Err(Error::MaxIterations(total_it, res));
        }
    }
}

/// A solved scattering problem.
pub struct Solution {
    pub disc: Discretization,
    pub incidence: Vec2,
    pub u: Vec<Complex64>,
    pub report: SolveReport,
}

/// Full pipeline: grids, precompute, GMRES.
pub fn scatter_solve(
    scatterer: &Scatterer,
    kappa: f64,
    incidence: Vec2,
    spec: &GridSpec,
    backend: Backend,
    accelerated: bool,
    params: &GmresParams,
) -> Result<Solution> {
    let disc = Discretization::build(scatterer, kappa, spec, backend, accelerated)?;
    let m = disc.contrast_vector();
    let rhs = disc.incident_vector(incidence);
    let (u, num_it, residual, _hist) = gmres(|v| disc.apply_operator(v, &m), &rhs, params)?;
    let timings = disc.take_timings();
    Ok(Solution {
        disc,
        incidence,
        u,
        report: SolveReport {
            num_it,
            residual,
            timings,
            eps_inf: None,
            eps_2: None,
        },
    })
}

impl Solution {
    /// Scattered field at the grid nodes.
    pub fn scattered(&self) -> Vec<Complex64> {
        let inc = self.disc.incident_vector(self.incidence);
        self.u.iter().zip(&inc).map(|(u, i)| u - i).collect()
    }

    /// Total field at arbitrary interior points, through the integral
    /// representation evaluated from the solved density.
    pub fn eval_total_field(&self, points: &[Vec2]) -> Result<Vec<Complex64>> {
        let m = self.disc.contrast_vector();
        let density: Vec<Complex64> = self.u.iter().zip(&m).map(|(u, mm)| u * mm).collect();
        let pot = self.disc.eval_potential_at(&density, points)?;
        let k2 = self.disc.kappa * self.disc.kappa;
        Ok(points
            .iter()
            .zip(&pot)
            .map(|(p, a)| {
                Complex64::from_polar(1.0, self.disc.kappa * self.incidence.dot(*p)) - a * k2
            })
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Contrast, Shape};
    use crate::util::{c64, rel_max_err};

    fn disc_problem(kappa: f64) -> Scatterer {
        let shape = Shape::Disc { radius: 1.0 };
        let tau0 = Scatterer::default_tau0(&shape, kappa);
        Scatterer::new(shape, tau0, Contrast::Constant(c64(-1.0, 0.0))).unwrap()
    }

    #[test]
    fn operator_is_linear_and_zero_on_zero() {
        let kappa = 2.0;
        let sc = disc_problem(kappa);
        let spec = GridSpec::parse("2x17x9+33x17").unwrap();
        let disc = Discretization::build(&sc, kappa, &spec, Backend::Atm, true).unwrap();
        let n = disc.n_unknowns();
        let zero = vec![Complex64::default(); n];
        let az = disc.apply_a(&zero).unwrap();
        assert!(az.iter().all(|z| z.norm() == 0.0));
        // linearity on deterministic pseudo-random vectors
        let v: Vec<Complex64> = (0..n)
            .map(|i| c64(((i * 37 % 11) as f64 - 5.0) / 5.0, ((i * 61 % 7) as f64 - 3.0) / 3.0))
            .collect();
        let w: Vec<Complex64> = (0..n)
            .map(|i| c64(((i * 13 % 9) as f64 - 4.0) / 4.0, ((i * 29 % 5) as f64 - 2.0) / 2.0))
            .collect();
        let alpha = c64(0.7, -1.2);
        let av = disc.apply_a(&v).unwrap();
        let aw = disc.apply_a(&w).unwrap();
        let combo: Vec<Complex64> = v.iter().zip(&w).map(|(a, b)| a * alpha + b).collect();
        let a_combo = disc.apply_a(&combo).unwrap();
        let expect: Vec<Complex64> = av.iter().zip(&aw).map(|(a, b)| a * alpha + b).collect();
        assert!(rel_max_err(&expect, &a_combo) < 1e-12);
        // reapplication is bit-identical
        let av2 = disc.apply_a(&v).unwrap();
        assert_eq!(
            av.iter().map(|z| z.re.to_bits()).collect::<Vec<_>>(),
            av2.iter().map(|z| z.re.to_bits()).collect::<Vec<_>>()
        );
    }

    #[test]
    fn gmres_identity_when_contrast_vanishes() {
        let kappa = 2.0;
        let shape = Shape::Disc { radius: 1.0 };
        let tau0 = Scatterer::default_tau0(&shape, kappa);
        let sc = Scatterer::new(shape, tau0, Contrast::Zero).unwrap();
        let spec = GridSpec::parse("2x9x5+17x9").unwrap();
        let sol = scatter_solve(
            &sc,
            kappa,
            Vec2::new(1.0, 0.0),
            &spec,
            Backend::Atm,
            true,
            &GmresParams::default(),
        )
        .unwrap();
        assert_eq!(sol.report.num_it, 1);
        let inc = sol.disc.incident_vector(Vec2::new(1.0, 0.0));
        assert!(rel_max_err(&inc, &sol.u) < 1e-12);
    }

    #[test]
    fn gmres_residual_history_is_monotone_within_cycles() {
        // small synthetic dense system exercised through the same routine
        let n = 40;
        let mat: Vec<Vec<Complex64>> = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| {
                        if i == j {
                            c64(3.0 + (i as f64 * 0.1).sin(), 0.5)
                        } else {
                            c64(
                                0.2 * ((i * 7 + j * 3) as f64).sin(),
                                0.1 * ((i + 2 * j) as f64).cos(),
                            ) / (1.0 + (i as f64 - j as f64).abs())
                        }
                    })
                    .collect()
            })
            .collect();
        let op = |v: &[Complex64]| -> Result<Vec<Complex64>> {
            Ok(mat
                .iter()
                .map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum())
                .collect())
        };
        let rhs: Vec<Complex64> = (0..n).map(|i| c64(1.0 / (1.0 + i as f64), 0.3)).collect();
        let params = GmresParams {
            tol: 1e-12,
            restart: 15,
            max_it: 200,
        };
        let (x, _it, res, hist) = gmres(op, &rhs, &params).unwrap();
        assert!(res <= 1e-12);
        let ax = op(&x).unwrap();
        assert!(rel_max_err(&rhs, &ax) < 1e-10);
        // non-increasing residuals within each restart cycle
        for w in hist.windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-12) || w[1] <= 1e-12);
        }
    }
}
