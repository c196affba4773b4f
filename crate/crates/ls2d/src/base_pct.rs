//! Base-base interaction by the pre-corrected trapezoidal rule on the
//! Cartesian grid: the kernel split `G_k = P_k ln|x| + Q_k`, the tabulated
//! correction weights restoring high order near the logarithmic singularity,
//! and the FFT-backed discrete convolution
//!
//! ```text
//! (A_E v)(x_l) = h^2 sum_{j != l} G_k(x_l - x_j) E(v)(x_j)
//!              + h^2 sum_{r=1}^k w_r sum_{q in S_r} E(v)(x_l + h q),
//! w_1 = -(1/2pi)(ln(h kappa/2) + c_1 + gamma) + i/4,   w_r = c_r P_k(h x~_r).
//! ```

use crate::grids::{CartesianBaseGrid, DistanceClassTable};
use crate::specfun::{bessel_j, green_kernel};
use crate::util::fft::Conv2;
use crate::util::{c64, EULER_GAMMA};
use crate::{Error, Result};
use num_complex::Complex64;
use std::f64::consts::PI;

/// Smooth factor of the kernel split: `P_k(x) = -J_0(kappa |x|) / (2 pi)`.
/// Depends on `|x|` only, hence constant on each distance class.
pub fn p_kernel(kappa: f64, dist: f64) -> f64 {
    -bessel_j(0, kappa * dist) / (2.0 * PI)
}

/// `Q_k(x) = G_k(x) - P_k(x) ln|x|` for `x != 0`.
pub fn q_kernel(kappa: f64, dist: f64) -> Complex64 {
    green_kernel(kappa, dist) - c64(p_kernel(kappa, dist) * dist.ln(), 0.0)
}

/// The smooth remainder at the singular point:
/// `Q_k(0) = -(1/2pi)[ln(kappa/2) + gamma] + i/4`.
pub fn q_at_zero(kappa: f64) -> Complex64 {
    c64(
        -((0.5 * kappa).ln() + EULER_GAMMA) / (2.0 * PI),
        0.25,
    )
}

/// Kernel split evaluation: `(P, Q)` with
/// `P ln|x| + Q = G_k(x)` reconstructing the kernel.
pub fn kernel_split_eval(kappa: f64, dist: f64) -> Result<(f64, Complex64)> {
    if dist <= 0.0 {
        return Err(Error::Domain(
            "kernel split is singular at zero offset; use q_at_zero".into(),
        ));
    }
    Ok((p_kernel(kappa, dist), q_kernel(kappa, dist)))
}

const WEIGHT_TABLE: &str = include_str!("../data/correction_weights.txt");

/// Loads the tabulated correction coefficients `c_1..c_k`,
/// `k = p(p+1)/2 + 1`, from the checked-in data file (or verbatim from the
/// same format elsewhere).
pub fn load_correction_coefficients(p: usize) -> Result<Vec<f64>> {
    parse_correction_table(WEIGHT_TABLE, p)
}

pub fn parse_correction_table(text: &str, p: usize) -> Result<Vec<f64>> {
    let k = p * (p + 1) / 2 + 1;
    let mut out = vec![None; k];
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut it = line.split_whitespace();
        let (Some(ps), Some(rs), Some(cs)) = (it.next(), it.next(), it.next()) else {
            continue;
        };
        let pv: usize = ps.parse().map_err(|_| Error::Config(format!("bad line '{line}'")))?;
        if pv != p {
            continue;
        }
        let r: usize = rs.parse().map_err(|_| Error::Config(format!("bad line '{line}'")))?;
        let c: f64 = cs.parse().map_err(|_| Error::Config(format!("bad line '{line}'")))?;
        if r == 0 || r > k {
            return Err(Error::Config(format!("class index {r} out of range for p={p}")));
        }
        out[r - 1] = Some(c);
    }
    out.into_iter()
        .collect::<Option<Vec<f64>>>()
        .ok_or(Error::UnsupportedOrder(p))
}

/// Correction table bound to a mesh size: the combined weights `w_r`.
pub struct CorrectionTable {
    pub p: usize,
    pub classes: DistanceClassTable,
    pub weights: Vec<Complex64>,
}

impl CorrectionTable {
    pub fn new(p: usize, kappa: f64, h: f64) -> Result<CorrectionTable> {
        let c = load_correction_coefficients(p)?;
        let classes = DistanceClassTable::new(c.len());
        let mut weights = Vec::with_capacity(c.len());
        for (r, class) in classes.classes.iter().enumerate() {
            if r == 0 {
                weights.push(c64(
                    -((0.5 * h * kappa).ln() + c[0] + EULER_GAMMA) / (2.0 * PI),
                    0.25,
                ));
            } else {
                let dist = h * (class.norm2 as f64).sqrt();
                weights.push(c64(c[r] * p_kernel(kappa, dist), 0.0));
            }
        }
        Ok(CorrectionTable {
            p,
            classes,
            weights,
        })
    }
}

/// Default correction order; `k = 7` weights.
pub const DEFAULT_P: usize = 3;

/// The pre-corrected trapezoidal base backend: grid geometry, kernel FFT plan
/// and correction table, reusable across operator applications.
pub struct BasePct {
    pub kappa: f64,
    pub h: f64,
    pub size: usize,
    pub n: i64,
    conv: Conv2,
    table: CorrectionTable,
}

impl BasePct {
    pub fn new(grid: &CartesianBaseGrid, kappa: f64, p: usize) -> Result<BasePct> {
        let h = grid.h;
        let table = CorrectionTable::new(p, kappa, h)?;
        let size = grid.size;
        let h2 = h * h;
        let conv = Conv2::new(size, size, |di, dj| {
            if di == 0 && dj == 0 {
                Complex64::default()
            } else {
                let dist = h * ((di * di + dj * dj) as f64).sqrt();
                green_kernel(kappa, dist) * h2
            }
        });
        Ok(BasePct {
            kappa,
            h,
            size,
            n: grid.n,
            conv,
            table,
        })
    }

    /// Applies the rule to extended-density samples over the full grid
    /// (row-major in `(i, j)`, exterior nodes zero). Offsets falling outside
    /// the grid contribute nothing to the correction sums.
    pub fn apply(&self, density: &[Complex64]) -> Result<Vec<Complex64>> {
        let n_nodes = self.size * self.size;
        if density.len() != n_nodes {
            return Err(Error::ShapeMismatch {
                expected: n_nodes,
                got: density.len(),
            });
        }
        let mut out = self.conv.apply(density);
        let h2 = self.h * self.h;
        let size = self.size as i64;
        for li in 0..size {
            for lj in 0..size {
                let mut corr = Complex64::default();
                for (w, class) in self
                    .table
                    .weights
                    .iter()
                    .zip(&self.table.classes.classes)
                {
                    let mut cls = Complex64::default();
                    for &(qi, qj) in &class.offsets {
                        let i = li + qi;
                        let j = lj + qj;
                        if i >= 0 && i < size && j >= 0 && j < size {
                            cls += density[(i * size + j) as usize];
                        }
                    }
                    corr += w * cls;
                }
                out[(li * size + lj) as usize] += corr * h2;
            }
        }
        Ok(out)
    }

    /// Direct O(N^2) evaluation of the same rule; the oracle for the FFT path.
    pub fn apply_direct(&self, density: &[Complex64]) -> Result<Vec<Complex64>> {
        let n_nodes = self.size * self.size;
        if density.len() != n_nodes {
            return Err(Error::ShapeMismatch {
                expected: n_nodes,
                got: density.len(),
            });
        }
        let size = self.size as i64;
        let h2 = self.h * self.h;
        let out = crate::util::par::par_collect(n_nodes, |l| {
            let li = l as i64 / size;
            let lj = l as i64 % size;
            let mut acc = Complex64::default();
            for ji in 0..size {
                for jj in 0..size {
                    if ji == li && jj == lj {
                        continue;
                    }
                    let d = density[(ji * size + jj) as usize];
                    if d == Complex64::default() {
                        continue;
                    }
                    let di = li - ji;
                    let dj = lj - jj;
                    let dist = self.h * ((di * di + dj * dj) as f64).sqrt();
                    acc += green_kernel(self.kappa, dist) * d;
                }
            }
            let mut corr = Complex64::default();
            for (w, class) in self
                .table
                .weights
                .iter()
                .zip(&self.table.classes.classes)
            {
                let mut cls = Complex64::default();
                for &(qi, qj) in &class.offsets {
                    let i = li + qi;
                    let j = lj + qj;
                    if i >= 0 && i < size && j >= 0 && j < size {
                        cls += density[(i * size + j) as usize];
                    }
                }
                corr += w * cls;
            }
            (acc + corr) * h2
        });
        Ok(out)
    }
}
