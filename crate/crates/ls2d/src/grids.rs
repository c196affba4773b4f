//! Grid construction: the boundary grid on overlapping patches, Cartesian and
//! polar base grids with interior/boundary/exterior node classification, the
//! approximation grid, the cell decomposition driving adjacency, and the
//! distance-class partition of Cartesian offsets.

use crate::geometry::{BoundaryCover, PatchChart, Scatterer, Vec2};
use crate::util::quad::composite_boole_weights;
use crate::util::TWO_PI;
use crate::{Error, Result};

/// Grid resolution in the notation `K x N1 x N2 + M1 x M2`: K overlapping
/// boundary patches of N1 x N2 nodes plus an M1 x M2 base grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridSpec {
    pub k_patches: usize,
    pub n1: usize,
    pub n2: usize,
    pub m1: usize,
    pub m2: usize,
}

impl GridSpec {
    pub fn new(k_patches: usize, n1: usize, n2: usize, m1: usize, m2: usize) -> Self {
        GridSpec {
            k_patches,
            n1,
            n2,
            m1,
            m2,
        }
    }

    /// Reported unknown count, following the tabulation convention
    /// `K*N1*N2 + M1*M2`.
    pub fn unknown_count(&self) -> usize {
        self.k_patches * self.n1 * self.n2 + self.m1 * self.m2
    }

    pub fn parse(s: &str) -> Result<GridSpec> {
        let bad = || Error::Config(format!("grid spec '{s}' is not of the form KxN1xN2+M1xM2"));
        let (bnd, base) = s.split_once('+').ok_or_else(bad)?;
        let b: Vec<&str> = bnd.trim().split(['x', 'X']).collect();
        let m: Vec<&str> = base.trim().split(['x', 'X']).collect();
        if b.len() != 3 || m.len() != 2 {
            return Err(bad());
        }
        let parse = |t: &str| t.trim().parse::<usize>().map_err(|_| bad());
        Ok(GridSpec {
            k_patches: parse(b[0])?,
            n1: parse(b[1])?,
            n2: parse(b[2])?,
            m1: parse(m[0])?,
            m2: parse(m[1])?,
        })
    }
}

impl std::fmt::Display for GridSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{}x{}x{}+{}x{}",
            self.k_patches, self.n1, self.n2, self.m1, self.m2
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeClass {
    Exterior,
    Boundary,
    Interior,
}

/// Horizontal-ray crossing tests against the boundary curve, bucketed in y for
/// speed and refined by Newton iteration so that membership is decided to
/// roughly 1e-12 at the interface.
pub struct CurveLocator<'a> {
    scatterer: &'a Scatterer,
    params: Vec<f64>,
    points: Vec<Vec2>,
    y_min: f64,
    y_max: f64,
    buckets: Vec<Vec<usize>>, // segment indices per y-stripe
    n_buckets: usize,
}

impl<'a> CurveLocator<'a> {
    pub fn new(scatterer: &'a Scatterer) -> Self {
        let m = 8192;
        let params: Vec<f64> = (0..=m).map(|i| TWO_PI * i as f64 / m as f64).collect();
        let points: Vec<Vec2> = params.iter().map(|&t| scatterer.shape.point(t)).collect();
        let y_min = points.iter().map(|p| p.y).fold(f64::INFINITY, f64::min);
        let y_max = points.iter().map(|p| p.y).fold(f64::NEG_INFINITY, f64::max);
        let n_buckets = 256;
        let mut buckets = vec![Vec::new(); n_buckets];
        let span = (y_max - y_min).max(f64::MIN_POSITIVE);
        for i in 0..m {
            let (a, b) = (points[i].y, points[i + 1].y);
            let lo = a.min(b);
            let hi = a.max(b);
            let b0 = (((lo - y_min) / span * n_buckets as f64).floor() as isize)
                .clamp(0, n_buckets as isize - 1) as usize;
            let b1 = (((hi - y_min) / span * n_buckets as f64).floor() as isize)
                .clamp(0, n_buckets as isize - 1) as usize;
            for bucket in buckets.iter_mut().take(b1 + 1).skip(b0) {
                bucket.push(i);
            }
        }
        CurveLocator {
            scatterer,
            params,
            points,
            y_min,
            y_max,
            buckets,
            n_buckets,
        }
    }

    /// x-coordinates where the boundary crosses the horizontal line at `y`.
    fn crossings(&self, y: f64) -> Vec<f64> {
        if y < self.y_min || y > self.y_max {
            return Vec::new();
        }
        let span = (self.y_max - self.y_min).max(f64::MIN_POSITIVE);
        let b = (((y - self.y_min) / span * self.n_buckets as f64).floor() as isize)
            .clamp(0, self.n_buckets as isize - 1) as usize;
        let mut xs = Vec::new();
        for &i in &self.buckets[b] {
            let (p0, p1) = (self.points[i], self.points[i + 1]);
            // half-open in y to count each crossing once
            if (p0.y <= y && p1.y > y) || (p1.y <= y && p0.y > y) {
                // Newton refinement on y(t) = y
                let mut t = self.params[i]
                    + (self.params[i + 1] - self.params[i]) * (y - p0.y) / (p1.y - p0.y);
                for _ in 0..30 {
                    let p = self.scatterer.shape.point(t);
                    let d = self.scatterer.shape.d1(t);
                    if d.y == 0.0 {
                        break;
                    }
                    let step = (p.y - y) / d.y;
                    t -= step;
                    if step.abs() < 1e-15 {
                        break;
                    }
                }
                xs.push(self.scatterer.shape.point(t).x);
            }
        }
        xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        xs
    }

    /// Membership with the tie convention that points within 1e-12 of the
    /// interface belong to the scatterer.
    pub fn inside(&self, p: Vec2) -> bool {
        let xs = self.crossings(p.y);
        if xs.iter().any(|&x| (x - p.x).abs() < 1e-12) {
            return true;
        }
        xs.iter().filter(|&&x| x < p.x).count() % 2 == 1
    }
}

/// One node of the boundary grid with its precomputed geometric factors.
#[derive(Debug, Clone)]
pub struct BoundaryNode {
    pub patch: usize,
    pub si: usize,
    pub ti: usize,
    pub ring: usize,
    pub pos: Vec2,
    pub s: f64,
    pub t: f64,
    pub jac: f64,
    pub eta: f64,
    pub pou: f64,
    pub weight_s: f64,
    pub weight_t: f64,
}

impl BoundaryNode {
    /// Quadrature strength of this node as a "true source" of the smooth
    /// boundary integral: trapezoidal s-weight times composite Newton-Cotes
    /// t-weight times Jacobian times cut-off times partition-of-unity weight.
    #[inline]
    pub fn quad_weight(&self) -> f64 {
        self.weight_s * self.weight_t * self.jac * self.eta * self.pou
    }
}

/// Boundary grid: K patches of N1 x N2 nodes, images of uniform parameter
/// meshes under the patch charts. Nodes are stored patch-major, then s, then
/// t, matching the canonical unknown ordering.
pub struct BoundaryGrid {
    pub cover: BoundaryCover,
    pub n1: usize,
    pub n2: usize,
    pub nodes: Vec<BoundaryNode>,
}

impl BoundaryGrid {
    pub fn build(scatterer: &Scatterer, spec: &GridSpec, overlap_frac: f64) -> Result<Self> {
        if spec.n2 < 5 || (spec.n2 - 1) % 4 != 0 {
            return Err(Error::Config(format!(
                "N2 = {} must be 1 (mod 4) for the 5-point composite rule",
                spec.n2
            )));
        }
        let cover = BoundaryCover::new(spec.k_patches, spec.n1, overlap_frac)?;
        let wt = composite_boole_weights(spec.n2, 0.0, 1.0);
        let mut nodes = Vec::with_capacity(spec.k_patches * spec.n1 * spec.n2);
        for k in 0..spec.k_patches {
            let chart = PatchChart {
                scatterer,
                cover: &cover,
                k,
            };
            for si in 0..spec.n1 {
                let s = si as f64 / (spec.n1 - 1) as f64;
                let g = cover.g_of_s(k, s);
                let ring = (cover.starts[k] + si) % cover.ring_len;
                let pou = cover.pou_weight(k, g);
                let ws = if si == 0 || si == spec.n1 - 1 {
                    0.5 / (spec.n1 - 1) as f64
                } else {
                    1.0 / (spec.n1 - 1) as f64
                };
                for ti in 0..spec.n2 {
                    let t = ti as f64 / (spec.n2 - 1) as f64;
                    nodes.push(BoundaryNode {
                        patch: k,
                        si,
                        ti,
                        ring,
                        pos: chart.xi(s, t),
                        s,
                        t,
                        jac: chart.jacobian(s, t),
                        eta: scatterer.cutoff.eta(scatterer.tau0 * t),
                        pou,
                        weight_s: ws,
                        weight_t: wt[ti],
                    });
                }
            }
        }
        Ok(BoundaryGrid {
            cover,
            n1: spec.n1,
            n2: spec.n2,
            nodes,
        })
    }

    #[inline]
    pub fn node_index(&self, k: usize, si: usize, ti: usize) -> usize {
        (k * self.n1 + si) * self.n2 + ti
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// Cartesian base grid on `[-a, a]^2` with nodes `(i h, j h)`,
/// `-n <= i, j <= n`.
pub struct CartesianBaseGrid {
    pub a: f64,
    pub h: f64,
    pub n: i64,
    pub size: usize, // 2n + 1 per axis
    pub class: Vec<NodeClass>,
    pub ext_factor: Vec<f64>,
    pub depth: Vec<f64>, // tube depth for Boundary nodes, NaN elsewhere
}

impl CartesianBaseGrid {
    pub fn build(scatterer: &Scatterer, m1: usize) -> Result<Self> {
        if m1 % 2 == 0 || m1 < 9 {
            return Err(Error::Config(format!(
                "Cartesian base grid wants odd M1 >= 9, got {m1}"
            )));
        }
        let n = ((m1 - 1) / 2) as i64;
        let (lo, hi) = scatterer.shape.bounding_box();
        let extent = lo.x.abs().max(lo.y.abs()).max(hi.x.abs()).max(hi.y.abs());
        // a = extent + 4h + tau0 with h = a/n
        if n <= 4 {
            return Err(Error::Config("base grid too coarse".into()));
        }
        let a = (extent + scatterer.tau0) / (1.0 - 4.0 / n as f64);
        let h = a / n as f64;
        let size = m1;
        let locator = CurveLocator::new(scatterer);
        let dist_cut = scatterer.tau0 + 4.0 * h.max(scatterer.tau0 * 0.2);
        let mut class = vec![NodeClass::Exterior; size * size];
        let mut ext_factor = vec![0.0; size * size];
        let mut depth = vec![f64::NAN; size * size];
        let idx = |i: i64, j: i64| ((i + n) as usize) * size + (j + n) as usize;
        for i in -n..=n {
            let x = i as f64 * h;
            for j in -n..=n {
                let y = j as f64 * h;
                let p = Vec2::new(x, y);
                let id = idx(i, j);
                if !locator.inside(p) {
                    continue;
                }
                // only points near the interface need the projection
                let near = scatterer
                    .signed_depth(p)
                    .filter(|&d| d.abs() <= dist_cut)
                    .or(Some(f64::INFINITY))
                    .unwrap();
                if near < scatterer.tau0 {
                    class[id] = NodeClass::Boundary;
                    depth[id] = near.max(0.0);
                    ext_factor[id] = 1.0 - scatterer.cutoff.eta(near.max(0.0));
                } else {
                    class[id] = NodeClass::Interior;
                    ext_factor[id] = 1.0;
                }
            }
        }
        Ok(CartesianBaseGrid {
            a,
            h,
            n,
            size,
            class,
            ext_factor,
            depth,
        })
    }

    #[inline]
    pub fn index(&self, i: i64, j: i64) -> usize {
        ((i + self.n) as usize) * self.size + (j + self.n) as usize
    }

    #[inline]
    pub fn position(&self, idx: usize) -> Vec2 {
        let i = (idx / self.size) as i64 - self.n;
        let j = (idx % self.size) as i64 - self.n;
        Vec2::new(i as f64 * self.h, j as f64 * self.h)
    }

    pub fn len(&self) -> usize {
        self.size * self.size
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// Kind of one radial node of the polar grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RadialKind {
    /// Shared endpoint between intervals (interval index of the one it opens).
    Breakpoint(usize),
    /// Interior Chebyshev node: (interval, ascending index within interval).
    Cheb(usize, usize),
}

/// Polar base grid: uniform subintervals of `[0, R]`, each carrying an
/// order-`N_c` Chebyshev grid plus the shared endpoints, and `n_theta` uniform
/// angular nodes. The stored angular line count `m2` includes the duplicate
/// seam at `theta = 2 pi`, so `n_theta = m2 - 1` stays even for the FFT.
pub struct PolarBaseGrid {
    pub center: Vec2,
    pub radius: f64,
    pub n_intervals: usize,
    pub n_cheb: usize,
    pub radial: Vec<f64>,
    pub kind: Vec<RadialKind>,
    pub m2: usize,
    pub n_theta: usize,
    pub class: Vec<NodeClass>,
    pub ext_factor: Vec<f64>,
}

impl PolarBaseGrid {
    pub fn build(scatterer: &Scatterer, m1: usize, m2: usize, kappa: f64) -> Result<Self> {
        if m2 < 5 || (m2 - 1) % 2 != 0 {
            return Err(Error::Config(format!(
                "polar grid wants odd M2 (duplicate seam line, even FFT length), got {m2}"
            )));
        }
        let (lo, hi) = scatterer.shape.bounding_box();
        let center = Vec2::new(0.5 * (lo.x + hi.x), 0.5 * (lo.y + hi.y));
        let mut r_min = 0.0f64;
        for i in 0..4096 {
            let p = scatterer.shape.point(TWO_PI * i as f64 / 4096.0);
            r_min = r_min.max((p - center).norm());
        }
        let radius = 1.1 * r_min;
        let (n_intervals, n_cheb) = choose_intervals(m1, radius, TWO_PI / kappa)?;
        let mut radial = Vec::with_capacity(m1);
        let mut kind = Vec::with_capacity(m1);
        let dr = radius / n_intervals as f64;
        for m in 0..n_intervals {
            let a = m as f64 * dr;
            radial.push(a);
            kind.push(RadialKind::Breakpoint(m));
            // beta_j = cos(pi (j - 1/2)/N_c) is decreasing in j; ascend by
            // walking j downward
            for jj in 0..n_cheb {
                let j = n_cheb - jj; // N_c ..= 1
                let beta = (std::f64::consts::PI * (j as f64 - 0.5) / n_cheb as f64).cos();
                radial.push(a + 0.5 * dr * (beta + 1.0));
                kind.push(RadialKind::Cheb(m, jj));
            }
        }
        radial.push(radius);
        kind.push(RadialKind::Breakpoint(n_intervals));
        debug_assert_eq!(radial.len(), m1);

        let n_theta = m2 - 1;
        let locator = CurveLocator::new(scatterer);
        let n_nodes = m1 * m2;
        let mut class = vec![NodeClass::Exterior; n_nodes];
        let mut ext_factor = vec![0.0; n_nodes];
        for (ri, &r) in radial.iter().enumerate() {
            for q in 0..m2 {
                let th = TWO_PI * (q % n_theta) as f64 / n_theta as f64;
                let p = center + Vec2::new(r * th.cos(), r * th.sin());
                let id = ri * m2 + q;
                if q == n_theta {
                    // seam duplicate: copy of q = 0
                    class[id] = class[ri * m2];
                    ext_factor[id] = ext_factor[ri * m2];
                    continue;
                }
                if !locator.inside(p) {
                    continue;
                }
                match scatterer.signed_depth(p) {
                    Some(d) if d < scatterer.tau0 => {
                        class[id] = NodeClass::Boundary;
                        ext_factor[id] = 1.0 - scatterer.cutoff.eta(d.max(0.0));
                    }
                    _ => {
                        class[id] = NodeClass::Interior;
                        ext_factor[id] = 1.0;
                    }
                }
            }
        }
        Ok(PolarBaseGrid {
            center,
            radius,
            n_intervals,
            n_cheb,
            radial,
            kind,
            m2,
            n_theta,
            class,
            ext_factor,
        })
    }

    #[inline]
    pub fn position(&self, idx: usize) -> Vec2 {
        let ri = idx / self.m2;
        let q = (idx % self.m2) % self.n_theta;
        let th = TWO_PI * q as f64 / self.n_theta as f64;
        let r = self.radial[ri];
        self.center + Vec2::new(r * th.cos(), r * th.sin())
    }

    pub fn len(&self) -> usize {
        self.radial.len() * self.m2
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Maximal alias-free modal truncation.
    pub fn l_max(&self) -> usize {
        self.n_theta / 2 - 1
    }
}

/// Picks the subinterval count: a divisor of `m1 - 1` keeping the per-interval
/// Chebyshev order in [2, 16], preferring the fewest intervals whose length
/// stays below a quarter wavelength.
fn choose_intervals(m1: usize, radius: f64, lambda: f64) -> Result<(usize, usize)> {
    let seg = m1 - 1;
    let mut candidates = Vec::new();
    for d in 1..=seg {
        if seg % d == 0 {
            let nc = seg / d - 1;
            if (2..=16).contains(&nc) {
                candidates.push((d, nc));
            }
        }
    }
    if candidates.is_empty() {
        return Err(Error::Config(format!(
            "cannot factor M1 = {m1} into intervals with Chebyshev order in [2,16]"
        )));
    }
    for &(d, nc) in &candidates {
        if radius / d as f64 <= 0.25 * lambda {
            return Ok((d, nc));
        }
    }
    // resolution rule not attainable; use the finest splitting available
    Ok(*candidates.last().unwrap())
}

/// Square cell cover of the scatterer: `l x l` cells of side `h_cell` over a
/// square of side `side` anchored at `origin`.
#[derive(Debug, Clone)]
pub struct CellDecomposition {
    pub origin: Vec2,
    pub side: f64,
    pub l: usize,
    pub h_cell: f64,
}

impl CellDecomposition {
    /// `n_unknowns` drives the cost-balancing choice `L ~ sqrt(N)/8`, clamped
    /// so (a) the boundary region stays thinner than 3 cells, and (b) a cell
    /// halo spans enough boundary-grid columns that the windowed smooth
    /// quadrature can resolve the adjacency cut-off. Both caps scale like
    /// sqrt(N), so the cost balance survives them.
    pub fn build(
        scatterer: &Scatterer,
        kappa: f64,
        n_unknowns: usize,
        ring_len: usize,
    ) -> Result<CellDecomposition> {
        let _ = kappa;
        let (lo, hi) = scatterer.shape.bounding_box();
        let margin = scatterer.tau0 * 0.5 + 0.05;
        let side = (hi.x - lo.x).max(hi.y - lo.y) + 2.0 * margin;
        let origin = Vec2::new(
            0.5 * (lo.x + hi.x) - 0.5 * side,
            0.5 * (lo.y + hi.y) - 0.5 * side,
        );
        let l_cap = ((3.0 * side / scatterer.tau0) - 1e-9).floor() as usize;
        if l_cap < 2 {
            return Err(Error::Config(format!(
                "tau0 = {} is not smaller than 3H for any usable cell count",
                scatterer.tau0
            )));
        }
        // a worst-placed target keeps only about one cell of halo margin, so
        // require ~15 ring columns per cell width of boundary arc
        let perim = scatterer.shape.perimeter();
        let l_ring_cap = ((side * ring_len as f64) / (15.0 * perim)).floor() as usize;
        let l = ((n_unknowns as f64).sqrt() / 8.0).ceil() as usize;
        let l = l.max(2).min(l_cap).min(l_ring_cap.max(2));
        let h_cell = side / l as f64;
        if scatterer.tau0 >= 3.0 * h_cell {
            return Err(Error::Config(format!(
                "tau0 = {} >= 3H = {}",
                scatterer.tau0,
                3.0 * h_cell
            )));
        }
        Ok(CellDecomposition {
            origin,
            side,
            l,
            h_cell,
        })
    }

    #[inline]
    pub fn cell_of(&self, p: Vec2) -> (i64, i64) {
        let i = ((p.x - self.origin.x) / self.h_cell).floor() as i64;
        let j = ((p.y - self.origin.y) / self.h_cell).floor() as i64;
        (
            i.clamp(0, self.l as i64 - 1),
            j.clamp(0, self.l as i64 - 1),
        )
    }

    /// Adjacency of two cells: within one cell in each index.
    #[inline]
    pub fn adjacent(a: (i64, i64), b: (i64, i64)) -> bool {
        (a.0 - b.0).abs() <= 1 && (a.1 - b.1).abs() <= 1
    }
}

/// `r = i(i+1)/2 + j + 1` for the class representative `(i, j)`, `0 <= j <= i`.
pub fn distance_class_index(i: u64, j: u64) -> u64 {
    assert!(j <= i, "representative wants 0 <= j <= i");
    i * (i + 1) / 2 + j + 1
}

#[derive(Debug, Clone)]
pub struct DistanceClass {
    pub rep: (i64, i64),
    pub norm2: i64,
    pub offsets: Vec<(i64, i64)>,
}

/// The first `k` distance classes `S_r`, each holding every lattice offset
/// sharing `i^2 + j^2` with its representative.
#[derive(Debug, Clone)]
pub struct DistanceClassTable {
    pub classes: Vec<DistanceClass>,
}

impl DistanceClassTable {
    pub fn new(k: usize) -> DistanceClassTable {
        let mut classes = Vec::with_capacity(k);
        let mut r = 0usize;
        'outer: for i in 0u64.. {
            for j in 0..=i {
                r += 1;
                if r > k {
                    break 'outer;
                }
                debug_assert_eq!(distance_class_index(i, j) as usize, r);
                let rep = (i as i64, j as i64);
                let norm2 = rep.0 * rep.0 + rep.1 * rep.1;
                let bound = i as i64;
                let mut offsets = Vec::new();
                for p in -bound..=bound {
                    for q in -bound..=bound {
                        if p * p + q * q == norm2 {
                            offsets.push((p, q));
                        }
                    }
                }
                classes.push(DistanceClass { rep, norm2, offsets });
            }
        }
        DistanceClassTable { classes }
    }
}

/// Which base backend a grid set carries.
pub enum BaseGrid {
    Cartesian(CartesianBaseGrid),
    Polar(PolarBaseGrid),
}

impl BaseGrid {
    pub fn len(&self) -> usize {
        match self {
            BaseGrid::Cartesian(g) => g.len(),
            BaseGrid::Polar(g) => g.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn class(&self, idx: usize) -> NodeClass {
        match self {
            BaseGrid::Cartesian(g) => g.class[idx],
            BaseGrid::Polar(g) => g.class[idx],
        }
    }

    pub fn ext_factor(&self, idx: usize) -> f64 {
        match self {
            BaseGrid::Cartesian(g) => g.ext_factor[idx],
            BaseGrid::Polar(g) => g.ext_factor[idx],
        }
    }

    pub fn position(&self, idx: usize) -> Vec2 {
        match self {
            BaseGrid::Cartesian(g) => g.position(idx),
            BaseGrid::Polar(g) => g.position(idx),
        }
    }
}

/// A node of the approximation grid: either a boundary-grid node or a base
/// node inside the scatterer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OmegaNode {
    Boundary(usize),
    Base(usize),
}

/// The full grid family for one discretization.
pub struct GridSet {
    pub spec: GridSpec,
    pub boundary: BoundaryGrid,
    pub base: BaseGrid,
    pub cells: CellDecomposition,
    /// Approximation grid: boundary nodes first (patch-major), then the
    /// non-exterior base nodes in storage order.
    pub omega_h: Vec<OmegaNode>,
    pub omega_pos: Vec<Vec2>,
}

pub const DEFAULT_OVERLAP_FRAC: f64 = 0.1;

pub enum BackendKind {
    Cartesian,
    Polar,
}

pub fn build_grids(
    scatterer: &Scatterer,
    spec: &GridSpec,
    kappa: f64,
    backend: BackendKind,
) -> Result<GridSet> {
    let boundary = BoundaryGrid::build(scatterer, spec, DEFAULT_OVERLAP_FRAC)?;
    let base = match backend {
        BackendKind::Cartesian => BaseGrid::Cartesian(CartesianBaseGrid::build(scatterer, spec.m1)?),
        BackendKind::Polar => {
            BaseGrid::Polar(PolarBaseGrid::build(scatterer, spec.m1, spec.m2, kappa)?)
        }
    };
    if let BaseGrid::Cartesian(g) = &base {
        if g.size != spec.m1 || spec.m1 != spec.m2 {
            return Err(Error::Config(
                "Cartesian backend wants a square M1 x M1 base grid".into(),
            ));
        }
    }
    let cells = CellDecomposition::build(
        scatterer,
        kappa,
        spec.unknown_count(),
        boundary.cover.ring_len,
    )?;
    let mut omega_h = Vec::new();
    let mut omega_pos = Vec::new();
    for (i, node) in boundary.nodes.iter().enumerate() {
        omega_h.push(OmegaNode::Boundary(i));
        omega_pos.push(node.pos);
    }
    for idx in 0..base.len() {
        if base.class(idx) != NodeClass::Exterior {
            omega_h.push(OmegaNode::Base(idx));
            omega_pos.push(base.position(idx));
        }
    }
    Ok(GridSet {
        spec: *spec,
        boundary,
        base,
        cells,
        omega_h,
        omega_pos,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Contrast, Shape};
    use num_complex::Complex64;

    fn unit_disc(tau0: f64) -> Scatterer {
        Scatterer::new(
            Shape::Disc { radius: 1.0 },
            tau0,
            Contrast::Constant(Complex64::new(-1.0, 0.0)),
        )
        .unwrap()
    }

    #[test]
    fn grid_spec_round_trip() {
        let s = GridSpec::parse("2x65x33+129x65").unwrap();
        assert_eq!(s, GridSpec::new(2, 65, 33, 129, 65));
        assert_eq!(s.to_string(), "2x65x33+129x65");
        assert!(GridSpec::parse("2x65x33129x65").is_err());
    }

    #[test]
    fn tabulated_unknown_counts() {
        // disc convergence ladders, both backends
        for (spec, count) in [
            ("2x9x5+17x17", 379),
            ("2x17x9+33x33", 1395),
            ("2x33x17+65x65", 5347),
            ("2x65x33+129x129", 20931),
            ("2x129x65+257x257", 82819),
            ("2x9x5+17x9", 243),
            ("2x17x9+33x17", 867),
            ("2x33x17+65x33", 3267),
            ("2x65x33+129x65", 12675),
            ("2x129x65+257x129", 49923),
        ] {
            assert_eq!(GridSpec::parse(spec).unwrap().unknown_count(), count);
        }
    }

    #[test]
    fn distance_class_index_law() {
        assert_eq!(distance_class_index(0, 0), 1);
        assert_eq!(distance_class_index(1, 0), 2);
        assert_eq!(distance_class_index(2, 1), 5);
        let table = DistanceClassTable::new(11);
        assert_eq!(table.classes.len(), 11);
        // representative recovers r under the index law
        for (ri, class) in table.classes.iter().enumerate() {
            let (i, j) = class.rep;
            assert_eq!(distance_class_index(i as u64, j as u64) as usize, ri + 1);
            for &(p, q) in &class.offsets {
                assert_eq!(p * p + q * q, class.norm2);
            }
        }
        // class populations: S_1 = {0}, S_2 = 4 axis offsets, S_3 = 4 diagonals
        assert_eq!(table.classes[0].offsets.len(), 1);
        assert_eq!(table.classes[1].offsets.len(), 4);
        assert_eq!(table.classes[2].offsets.len(), 4);
        assert_eq!(table.classes[4].offsets.len(), 8); // (2,1) family
    }

    #[test]
    fn cartesian_classification_on_disc() {
        let sc = unit_disc(0.2);
        let g = CartesianBaseGrid::build(&sc, 65).unwrap();
        // radius 1.05: exterior; 0.95: boundary region; 0.5: interior
        let probe = |x: f64, y: f64| {
            let i = (x / g.h).round() as i64;
            let j = (y / g.h).round() as i64;
            g.class[g.index(i, j)]
        };
        assert_eq!(probe(1.05, 0.0), NodeClass::Exterior);
        assert_eq!(probe(0.95, 0.0), NodeClass::Boundary);
        assert_eq!(probe(0.5, 0.0), NodeClass::Interior);
        // the three classes partition the node set
        let total = g.class.len();
        let ext = g.class.iter().filter(|c| **c == NodeClass::Exterior).count();
        let bnd = g.class.iter().filter(|c| **c == NodeClass::Boundary).count();
        let int = g.class.iter().filter(|c| **c == NodeClass::Interior).count();
        assert_eq!(ext + bnd + int, total);
        assert!(bnd > 0 && int > 0 && ext > 0);
    }

    #[test]
    fn omega_h_lies_inside_scatterer() {
        let sc = unit_disc(0.3);
        let spec = GridSpec::parse("2x17x9+33x33").unwrap();
        let gs = build_grids(&sc, &spec, 2.0, BackendKind::Cartesian).unwrap();
        for p in &gs.omega_pos {
            assert!(p.norm() <= 1.0 + 1e-9, "omega_h node outside at {p:?}");
        }
        assert_eq!(
            gs.omega_h.len(),
            gs.boundary.len()
                + (0..gs.base.len())
                    .filter(|&i| gs.base.class(i) != NodeClass::Exterior)
                    .count()
        );
    }

    #[test]
    fn polar_grid_structure() {
        let sc = unit_disc(0.3);
        let g = PolarBaseGrid::build(&sc, 17, 9, 2.0).unwrap();
        assert_eq!(g.radial.len(), 17);
        assert_eq!(g.n_theta, 8);
        assert!((g.radius - 1.1).abs() < 1e-12);
        // radial nodes ascend and include all breakpoints
        for w in g.radial.windows(2) {
            assert!(w[1] > w[0]);
        }
        let breaks = g
            .kind
            .iter()
            .filter(|k| matches!(k, RadialKind::Breakpoint(_)))
            .count();
        assert_eq!(breaks, g.n_intervals + 1);
        // beta_j decreasing convention holds within each interval
        let nc = g.n_cheb;
        for m in 0..g.n_intervals {
            let betas: Vec<f64> = (1..=nc)
                .map(|j| (std::f64::consts::PI * (j as f64 - 0.5) / nc as f64).cos())
                .collect();
            for w in betas.windows(2) {
                assert!(w[1] < w[0]);
            }
            let _ = m;
        }
    }

    #[test]
    fn adjacency_is_symmetric() {
        let sc = unit_disc(0.3);
        let cells = CellDecomposition::build(&sc, 2.0, 1395, 30).unwrap();
        let pts: Vec<Vec2> = (0..50)
            .map(|i| {
                let t = i as f64 * 0.125664;
                Vec2::new(0.9 * t.cos() * (0.02 * i as f64), 0.8 * t.sin())
            })
            .collect();
        for a in &pts {
            for b in &pts {
                let ca = cells.cell_of(*a);
                let cb = cells.cell_of(*b);
                assert_eq!(
                    CellDecomposition::adjacent(ca, cb),
                    CellDecomposition::adjacent(cb, ca)
                );
            }
        }
        assert!(sc.tau0 < 3.0 * cells.h_cell);
    }

    #[test]
    fn boundary_grid_nodes_lie_in_tube() {
        let sc = unit_disc(0.25);
        let spec = GridSpec::parse("2x17x9+33x33").unwrap();
        let bg = BoundaryGrid::build(&sc, &spec, 0.1).unwrap();
        assert_eq!(bg.len(), 2 * 17 * 9);
        for node in &bg.nodes {
            let r = node.pos.norm();
            assert!(r <= 1.0 + 1e-12 && r >= 1.0 - 0.25 - 1e-12);
            // depth consistent with t
            assert!(((1.0 - r) - sc.tau0 * node.t).abs() < 1e-12);
        }
        // eta factor kills the deep tube edge (t = 1)
        for node in bg.nodes.iter().filter(|n| n.ti == spec.n2 - 1) {
            assert_eq!(node.quad_weight(), 0.0);
        }
    }

    #[test]
    fn rejects_bad_configs() {
        let sc = unit_disc(0.3);
        // N2 not 1 mod 4
        let spec = GridSpec::parse("2x17x8+33x33").unwrap();
        assert!(BoundaryGrid::build(&sc, &spec, 0.1).is_err());
    }
}
