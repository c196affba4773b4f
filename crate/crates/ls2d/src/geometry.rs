//! Scatterer geometry: boundary parametrization, tubular-neighborhood
//! projection, the smooth cut-off that splits boundary and base densities,
//! overlapping boundary patches and their partition of unity.

use crate::util::TWO_PI;
use crate::{Error, Result};
use num_complex::Complex64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Vec2 { x, y }
    }
    #[inline]
    pub fn dot(self, o: Vec2) -> f64 {
        self.x * o.x + self.y * o.y
    }
    #[inline]
    pub fn cross(self, o: Vec2) -> f64 {
        self.x * o.y - self.y * o.x
    }
    #[inline]
    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }
    #[inline]
    pub fn scale(self, s: f64) -> Vec2 {
        Vec2::new(self.x * s, self.y * s)
    }
}

impl std::ops::Add for Vec2 {
    type Output = Vec2;
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl std::ops::Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

/// Smooth closed boundary curves, parametrized counterclockwise over
/// `theta in [0, 2 pi)`.
#[derive(Debug, Clone, PartialEq)]
pub enum Shape {
    Disc { radius: f64 },
    Ellipse { a: f64, b: f64 },
    /// `r(t) = (cos t + 0.65 cos 2t - 0.65, 1.5 sin t)`
    Bean,
}

impl Shape {
    pub fn point(&self, t: f64) -> Vec2 {
        match self {
            Shape::Disc { radius } => Vec2::new(radius * t.cos(), radius * t.sin()),
            Shape::Ellipse { a, b } => Vec2::new(a * t.cos(), b * t.sin()),
            Shape::Bean => Vec2::new(t.cos() + 0.65 * (2.0 * t).cos() - 0.65, 1.5 * t.sin()),
        }
    }

    pub fn d1(&self, t: f64) -> Vec2 {
        match self {
            Shape::Disc { radius } => Vec2::new(-radius * t.sin(), radius * t.cos()),
            Shape::Ellipse { a, b } => Vec2::new(-a * t.sin(), b * t.cos()),
            Shape::Bean => Vec2::new(-t.sin() - 1.3 * (2.0 * t).sin(), 1.5 * t.cos()),
        }
    }

    pub fn d2(&self, t: f64) -> Vec2 {
        match self {
            Shape::Disc { radius } => Vec2::new(-radius * t.cos(), -radius * t.sin()),
            Shape::Ellipse { a, b } => Vec2::new(-a * t.cos(), -b * t.sin()),
            Shape::Bean => Vec2::new(-t.cos() - 2.6 * (2.0 * t).cos(), -1.5 * t.sin()),
        }
    }

    /// Outward unit normal (curve runs counterclockwise).
    pub fn normal(&self, t: f64) -> Vec2 {
        let d = self.d1(t);
        Vec2::new(d.y, -d.x).scale(1.0 / d.norm())
    }

    /// Derivative of the outward unit normal with respect to t.
    pub fn normal_d1(&self, t: f64) -> Vec2 {
        let d1 = self.d1(t);
        let d2 = self.d2(t);
        let n_raw = Vec2::new(d1.y, -d1.x);
        let n_raw_d = Vec2::new(d2.y, -d2.x);
        let speed = d1.norm();
        let speed_d = d1.dot(d2) / speed;
        (n_raw_d.scale(speed) - n_raw.scale(speed_d)).scale(1.0 / (speed * speed))
    }

    /// Smallest radius of curvature along the boundary (sampled).
    pub fn min_curvature_radius(&self) -> f64 {
        let n = 4096;
        let mut best = f64::INFINITY;
        for i in 0..n {
            let t = TWO_PI * i as f64 / n as f64;
            let d1 = self.d1(t);
            let d2 = self.d2(t);
            let denom = d1.cross(d2).abs();
            if denom > 0.0 {
                best = best.min(d1.norm().powi(3) / denom);
            }
        }
        best
    }

    /// Boundary length (sampled).
    pub fn perimeter(&self) -> f64 {
        let n = 8192;
        let mut len = 0.0;
        let mut prev = self.point(0.0);
        for i in 1..=n {
            let p = self.point(TWO_PI * i as f64 / n as f64);
            len += (p - prev).norm();
            prev = p;
        }
        len
    }

    pub fn bounding_box(&self) -> (Vec2, Vec2) {
        let n = 4096;
        let mut lo = Vec2::new(f64::INFINITY, f64::INFINITY);
        let mut hi = Vec2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for i in 0..n {
            let p = self.point(TWO_PI * i as f64 / n as f64);
            lo = Vec2::new(lo.x.min(p.x), lo.y.min(p.y));
            hi = Vec2::new(hi.x.max(p.x), hi.y.max(p.y));
        }
        (lo, hi)
    }
}

/// Contrast function `m(x) = 1 - n^2(x)`; identically zero outside the
/// scatterer (the solver only samples it on interior nodes).
#[derive(Debug, Clone, PartialEq)]
pub enum Contrast {
    /// Constant value inside the scatterer.
    Constant(Complex64),
    /// `m(x) = 1 - 0.5 exp(-(x^2 + y^2))` inside.
    GaussianWell,
    /// No inhomogeneity (the identity problem).
    Zero,
}

impl Contrast {
    pub fn eval_inside(&self, p: Vec2) -> Complex64 {
        match self {
            Contrast::Constant(m) => *m,
            Contrast::GaussianWell => {
                Complex64::new(1.0 - 0.5 * (-(p.x * p.x + p.y * p.y)).exp(), 0.0)
            }
            Contrast::Zero => Complex64::default(),
        }
    }
}

/// The cut-off
/// `eta(tau) = 1` for `tau <= 0`,
/// `exp(2 tau0 e^{-tau0/tau} / (tau - tau0))` for `0 < tau < tau0`,
/// `0` for `tau0 <= tau`; infinitely differentiable across both branch points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CutoffSpec {
    pub tau0: f64,
}

impl CutoffSpec {
    pub fn new(tau0: f64) -> Self {
        assert!(tau0 > 0.0);
        CutoffSpec { tau0 }
    }

    pub fn eta(&self, tau: f64) -> f64 {
        if tau <= 0.0 {
            1.0
        } else if tau >= self.tau0 {
            0.0
        } else {
            (2.0 * self.tau0 * (-self.tau0 / tau).exp() / (tau - self.tau0)).exp()
        }
    }
}

/// Smooth bump on [0, 1], identically 0 at the endpoints with all derivatives,
/// reaching 1 at the midpoint; built from the same exponential family as the
/// cut-off by `bump(s) = eta_1(|2s - 1|)`.
pub fn pou_bump(s: f64) -> f64 {
    let u = (2.0 * s - 1.0).abs();
    CutoffSpec { tau0: 1.0 }.eta(u)
}

/// A scatterer: shape, tubular-neighborhood width, contrast.
#[derive(Debug, Clone)]
pub struct Scatterer {
    pub shape: Shape,
    pub tau0: f64,
    pub contrast: Contrast,
    pub cutoff: CutoffSpec,
    coarse_t: Vec<f64>,
    coarse_p: Vec<Vec2>,
}

pub const PROJECTION_SEEDS: usize = 256;

impl Scatterer {
    pub fn new(shape: Shape, tau0: f64, contrast: Contrast) -> Result<Self> {
        let rho = shape.min_curvature_radius();
        if !(tau0 > 0.0) || tau0 >= rho {
            return Err(Error::Config(format!(
                "tau0 = {tau0} must lie in (0, min curvature radius {rho:.4})"
            )));
        }
        let coarse_t: Vec<f64> = (0..PROJECTION_SEEDS)
            .map(|i| TWO_PI * i as f64 / PROJECTION_SEEDS as f64)
            .collect();
        let coarse_p = coarse_t.iter().map(|&t| shape.point(t)).collect();
        Ok(Scatterer {
            shape,
            tau0,
            contrast,
            cutoff: CutoffSpec::new(tau0),
            coarse_t,
            coarse_p,
        })
    }

    /// Default tube width: half a wavelength, capped by the curvature bound
    /// that keeps the normal projection single-valued.
    pub fn default_tau0(shape: &Shape, kappa: f64) -> f64 {
        let lambda = TWO_PI / kappa;
        (0.5 * lambda).min(0.45 * shape.min_curvature_radius())
    }

    /// Nearest-point parameter on the boundary: Newton iteration on
    /// `f(t) = (x - c(t)) . c'(t)`, seeded from the closest coarse sample.
    /// Returns `(t, signed_depth)` with depth positive on the interior side.
    pub fn project(&self, x: Vec2) -> Result<(f64, f64)> {
        let mut best = 0usize;
        let mut best_d = f64::INFINITY;
        for (i, p) in self.coarse_p.iter().enumerate() {
            let d = (*p - x).dot(*p - x);
            if d < best_d {
                best_d = d;
                best = i;
            }
        }
        let mut t = self.coarse_t[best];
        let mut converged = false;
        for _ in 0..50 {
            let c = self.shape.point(t);
            let d1 = self.shape.d1(t);
            let d2 = self.shape.d2(t);
            let r = x - c;
            let f = r.dot(d1);
            let fp = -d1.dot(d1) + r.dot(d2);
            if fp == 0.0 {
                break;
            }
            let step = f / fp;
            t -= step;
            if step.abs() < 1e-14 {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::NoProjection);
        }
        let t = t.rem_euclid(TWO_PI);
        let px = self.shape.point(t);
        let tau = (px - x).dot(self.shape.normal(t));
        Ok((t, tau))
    }

    /// Projection restricted to the closed tube: errors outside
    /// `0 <= tau < tau0` (up to roundoff slack at the boundary itself).
    pub fn project_to_boundary(&self, x: Vec2) -> Result<(f64, f64)> {
        let (t, tau) = self.project(x)?;
        if tau < -1e-10 || tau >= self.tau0 {
            return Err(Error::NoProjection);
        }
        Ok((t, tau.max(0.0)))
    }

    /// Winding-number membership test; points within 1e-12 of the boundary
    /// count as inside.
    pub fn contains(&self, x: Vec2) -> bool {
        let mut wind = 0.0f64;
        let n = 1024;
        let mut prev = self.shape.point(0.0) - x;
        for i in 1..=n {
            let t0 = TWO_PI * (i - 1) as f64 / n as f64;
            let t1 = TWO_PI * i as f64 / n as f64;
            let cur = self.shape.point(t1) - x;
            wind += angle_step(prev, cur, &self.shape, x, t0, t1, 0);
            prev = cur;
        }
        if (wind / TWO_PI).abs() > 0.5 {
            return true;
        }
        // razor-close outside points: resolve by signed depth
        if let Ok((_, tau)) = self.project(x) {
            return tau >= -1e-12;
        }
        false
    }

    /// Signed depth below the boundary (positive inside), or `None` when the
    /// projection fails.
    pub fn signed_depth(&self, x: Vec2) -> Option<f64> {
        self.project(x).ok().map(|(_, tau)| tau)
    }

    /// `E(v)` multiplier at a point: `1` on the deep interior, `1 - eta(tau)`
    /// inside the boundary region, `0` outside the scatterer.
    pub fn extension_factor(&self, x: Vec2) -> f64 {
        if !self.contains(x) {
            return 0.0;
        }
        match self.project(x) {
            Ok((_, tau)) if tau < self.tau0 => 1.0 - self.cutoff.eta(tau),
            _ => 1.0,
        }
    }

    /// Extended density `E(v)(x)` given the field value at `x`.
    pub fn extended_density(&self, v: Complex64, x: Vec2) -> Complex64 {
        v * self.extension_factor(x)
    }
}

fn angle_step(
    prev: Vec2,
    cur: Vec2,
    shape: &Shape,
    x: Vec2,
    t0: f64,
    t1: f64,
    depth: usize,
) -> f64 {
    let a = prev.cross(cur).atan2(prev.dot(cur));
    if a.abs() < 1.0 || depth >= 24 {
        return a;
    }
    let tm = 0.5 * (t0 + t1);
    let mid = shape.point(tm) - x;
    angle_step(prev, mid, shape, x, t0, tm, depth + 1)
        + angle_step(mid, cur, shape, x, tm, t1, depth + 1)
}

/// K-piece overlapping cover of the boundary with aligned uniform ring nodes.
///
/// A single "ring" of `ring_len` equispaced global-parameter columns underlies
/// all patches: patch `k` is the window of `n1` consecutive columns starting
/// at `starts[k]`, so neighboring patches share `n1 - ring_len/K` columns per
/// junction. Patch-local `s in [0,1]` maps affinely onto its window, which
/// keeps every patch grid uniform in `s` while the union of patch nodes stays
/// a uniform periodic grid in the global parameter.
#[derive(Debug, Clone)]
pub struct BoundaryCover {
    pub k_patches: usize,
    pub n1: usize,
    pub ring_len: usize,
    pub starts: Vec<usize>,
}

impl BoundaryCover {
    /// `overlap_frac` is the per-side overlap as a fraction of patch length.
    pub fn new(k_patches: usize, n1: usize, overlap_frac: f64) -> Result<Self> {
        if k_patches < 2 || n1 < 5 {
            return Err(Error::Config(format!(
                "need at least 2 patches of 5 nodes, got {k_patches} x {n1}"
            )));
        }
        let w = ((overlap_frac * (n1 - 1) as f64).round() as usize).max(2);
        if w >= n1 {
            return Err(Error::Config("patch overlap exceeds patch length".into()));
        }
        let ring_len = k_patches * (n1 - w);
        let starts = (0..k_patches).map(|k| k * (n1 - w)).collect();
        Ok(BoundaryCover {
            k_patches,
            n1,
            ring_len,
            starts,
        })
    }

    /// Global parameter (fraction of the full curve) of ring column `m`.
    #[inline]
    pub fn ring_g(&self, m: usize) -> f64 {
        m as f64 / self.ring_len as f64
    }

    /// Patch length as a fraction of the whole curve parameter.
    #[inline]
    pub fn patch_len_g(&self) -> f64 {
        (self.n1 - 1) as f64 / self.ring_len as f64
    }

    /// Patch-local `s` of a global parameter, if the point lies in patch `k`.
    pub fn s_of_g(&self, k: usize, g: f64) -> Option<f64> {
        let len = self.patch_len_g();
        let start = self.starts[k] as f64 / self.ring_len as f64;
        let mut d = g - start;
        d -= d.floor(); // wrap into [0,1)
        if d <= len + 1e-13 {
            Some((d / len).clamp(0.0, 1.0))
        } else {
            None
        }
    }

    /// Global parameter of patch `k` at local `s`.
    #[inline]
    pub fn g_of_s(&self, k: usize, s: f64) -> f64 {
        let start = self.starts[k] as f64 / self.ring_len as f64;
        (start + s * self.patch_len_g()).rem_euclid(1.0)
    }

    fn raw_weights(&self, g: f64) -> Vec<(usize, f64)> {
        let mut out = Vec::with_capacity(2);
        for k in 0..self.k_patches {
            if let Some(s) = self.s_of_g(k, g) {
                let w = pou_bump(s);
                if w > 0.0 {
                    out.push((k, w));
                }
            }
        }
        out
    }

    /// Normalized partition-of-unity weights of all patches containing `g`.
    pub fn pou_weights(&self, g: f64) -> Result<Vec<(usize, f64)>> {
        let raw = self.raw_weights(g);
        let total: f64 = raw.iter().map(|(_, w)| w).sum();
        if raw.is_empty() || total <= 0.0 {
            return Err(Error::NotInBoundaryRegion);
        }
        Ok(raw.into_iter().map(|(k, w)| (k, w / total)).collect())
    }

    /// Weight of one specific patch at `g` (0 when outside the patch).
    pub fn pou_weight(&self, k: usize, g: f64) -> f64 {
        let raw = self.raw_weights(g);
        let total: f64 = raw.iter().map(|(_, w)| w).sum();
        if total <= 0.0 {
            return 0.0;
        }
        raw.iter()
            .find(|(kk, _)| *kk == k)
            .map(|(_, w)| w / total)
            .unwrap_or(0.0)
    }
}

/// Chart of one boundary patch: `xi(s,t) = psi(s) - tau0 t nu(psi(s))`.
#[derive(Debug, Clone)]
pub struct PatchChart<'a> {
    pub scatterer: &'a Scatterer,
    pub cover: &'a BoundaryCover,
    pub k: usize,
}

impl PatchChart<'_> {
    pub fn xi(&self, s: f64, t: f64) -> Vec2 {
        let theta = TWO_PI * self.cover.g_of_s(self.k, s);
        let c = self.scatterer.shape.point(theta);
        let n = self.scatterer.shape.normal(theta);
        c - n.scale(self.scatterer.tau0 * t)
    }

    /// Jacobian determinant of `(s,t) -> xi(s,t)`.
    pub fn jacobian(&self, s: f64, t: f64) -> f64 {
        let theta = TWO_PI * self.cover.g_of_s(self.k, s);
        let dtheta_ds = TWO_PI * self.cover.patch_len_g();
        let d1 = self.scatterer.shape.d1(theta);
        let nd = self.scatterer.shape.normal_d1(theta);
        let tau0 = self.scatterer.tau0;
        let ds = (d1 - nd.scale(tau0 * t)).scale(dtheta_ds);
        let dt = self.scatterer.shape.normal(theta).scale(-tau0);
        ds.cross(dt).abs()
    }

    /// Inverse chart via projection; errors if `x` is outside this patch's
    /// parameter square.
    pub fn xi_inverse(&self, x: Vec2) -> Result<(f64, f64)> {
        let (theta, tau) = self.scatterer.project_to_boundary(x)?;
        let g = theta / TWO_PI;
        let s = self
            .cover
            .s_of_g(self.k, g)
            .ok_or(Error::TargetOutsidePatch)?;
        Ok((s, tau / self.scatterer.tau0))
    }
}
