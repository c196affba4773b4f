//! Thin wrappers over rustfft plus a cached 2D linear-convolution plan.

use num_complex::Complex64;
use rustfft::FftPlanner;

/// Forward DFT in place, unnormalized (sum convention).
pub fn fft_inplace(data: &mut [Complex64]) {
    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(data.len());
    fft.process(data);
}

/// Inverse DFT in place, normalized by 1/n.
pub fn ifft_inplace(data: &mut [Complex64]) {
    let n = data.len();
    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_inverse(n);
    fft.process(data);
    let scale = 1.0 / n as f64;
    for z in data.iter_mut() {
        *z *= scale;
    }
}

/// 2D forward DFT on row-major `rows x cols` data.
pub fn fft2_inplace(data: &mut [Complex64], rows: usize, cols: usize) {
    assert_eq!(data.len(), rows * cols);
    let mut planner = FftPlanner::new();
    let row_fft = planner.plan_fft_forward(cols);
    for r in 0..rows {
        row_fft.process(&mut data[r * cols..(r + 1) * cols]);
    }
    let col_fft = planner.plan_fft_forward(rows);
    let mut col = vec![Complex64::default(); rows];
    for c in 0..cols {
        for r in 0..rows {
            col[r] = data[r * cols + c];
        }
        col_fft.process(&mut col);
        for r in 0..rows {
            data[r * cols + c] = col[r];
        }
    }
}

/// 2D inverse DFT, normalized by 1/(rows*cols).
pub fn ifft2_inplace(data: &mut [Complex64], rows: usize, cols: usize) {
    assert_eq!(data.len(), rows * cols);
    let mut planner = FftPlanner::new();
    let row_fft = planner.plan_fft_inverse(cols);
    for r in 0..rows {
        row_fft.process(&mut data[r * cols..(r + 1) * cols]);
    }
    let col_fft = planner.plan_fft_inverse(rows);
    let mut col = vec![Complex64::default(); rows];
    for c in 0..cols {
        for r in 0..rows {
            col[r] = data[r * cols + c];
        }
        col_fft.process(&mut col);
        for r in 0..rows {
            data[r * cols + c] = col[r];
        }
    }
    let scale = 1.0 / (rows * cols) as f64;
    for z in data.iter_mut() {
        *z *= scale;
    }
}

/// Precomputed plan for the discrete linear convolution
/// `out[l] = sum_j kernel[l - j] data[j]` on an `n1 x n2` grid, with kernel
/// offsets ranging over `(-(n1-1)..n1) x (-(n2-1)..n2)`. Zero padding to the
/// next power of two at least twice the grid size keeps the circular wrap
/// outside the extracted window, so the result has linear (not circular)
/// semantics.
pub struct Conv2 {
    n1: usize,
    n2: usize,
    s1: usize,
    s2: usize,
    kernel_hat: Vec<Complex64>,
}

impl Conv2 {
    /// `kernel(di, dj)` for integer offsets `|di| < n1`, `|dj| < n2`.
    pub fn new<K>(n1: usize, n2: usize, kernel: K) -> Self
    where
        K: Fn(i64, i64) -> Complex64,
    {
        let s1 = (2 * n1).next_power_of_two();
        let s2 = (2 * n2).next_power_of_two();
        let mut kernel_hat = vec![Complex64::default(); s1 * s2];
        for di in -(n1 as i64 - 1)..n1 as i64 {
            let r = di.rem_euclid(s1 as i64) as usize;
            for dj in -(n2 as i64 - 1)..n2 as i64 {
                let c = dj.rem_euclid(s2 as i64) as usize;
                kernel_hat[r * s2 + c] = kernel(di, dj);
            }
        }
        fft2_inplace(&mut kernel_hat, s1, s2);
        Conv2 {
            n1,
            n2,
            s1,
            s2,
            kernel_hat,
        }
    }

    pub fn apply(&self, data: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(data.len(), self.n1 * self.n2);
        let mut buf = vec![Complex64::default(); self.s1 * self.s2];
        for i in 0..self.n1 {
            buf[i * self.s2..i * self.s2 + self.n2]
                .copy_from_slice(&data[i * self.n2..(i + 1) * self.n2]);
        }
        fft2_inplace(&mut buf, self.s1, self.s2);
        for (b, k) in buf.iter_mut().zip(&self.kernel_hat) {
            *b *= k;
        }
        ifft2_inplace(&mut buf, self.s1, self.s2);
        let mut out = vec![Complex64::default(); self.n1 * self.n2];
        for i in 0..self.n1 {
            out[i * self.n2..(i + 1) * self.n2]
                .copy_from_slice(&buf[i * self.s2..i * self.s2 + self.n2]);
        }
        out
    }
}

/// Trigonometric refinement of periodic samples: returns the function sampled
/// on a grid `factor` times finer, exact on the input nodes. For even input
/// lengths the Nyquist mode is split evenly between +/- frequencies, which
/// keeps the refined samples real for real input.
pub fn fourier_upsample(samples: &[Complex64], factor: usize) -> Vec<Complex64> {
    let n = samples.len();
    assert!(factor >= 1);
    if factor == 1 {
        return samples.to_vec();
    }
    let m = n * factor;
    let mut hat = samples.to_vec();
    fft_inplace(&mut hat);
    let mut big = vec![Complex64::default(); m];
    let half = n / 2;
    for k in 0..=half.min(n - 1) {
        big[k] = hat[k];
    }
    for k in 1..n - half {
        big[m - k] = hat[n - k];
    }
    if n % 2 == 0 && n >= 2 {
        // split the Nyquist bin
        let v = hat[half] * 0.5;
        big[half] = v;
        big[m - half] = v;
    }
    ifft_inplace(&mut big);
    let scale = factor as f64;
    for z in big.iter_mut() {
        *z *= scale;
    }
    big
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::util::c64;

    #[test]
    fn conv2_matches_direct() {
        let n = 7;
        let kernel = |di: i64, dj: i64| c64((di * di + 2 * dj) as f64, 0.3 * di as f64);
        let conv = Conv2::new(n, n, kernel);
        let data: Vec<Complex64> = (0..n * n)
            .map(|i| c64((i % 5) as f64 - 2.0, (i % 3) as f64))
            .collect();
        let fast = conv.apply(&data);
        for l1 in 0..n {
            for l2 in 0..n {
                let mut acc = Complex64::default();
                for j1 in 0..n {
                    for j2 in 0..n {
                        acc += kernel(l1 as i64 - j1 as i64, l2 as i64 - j2 as i64)
                            * data[j1 * n + j2];
                    }
                }
                let diff = (acc - fast[l1 * n + l2]).norm();
                assert!(diff < 1e-10, "mismatch at ({l1},{l2}): {diff}");
            }
        }
    }

    #[test]
    fn upsample_reproduces_nodes_and_harmonics() {
        let n = 16;
        let f = |t: f64| c64((2.0 * t).cos() + 0.3 * (5.0 * t).sin(), (3.0 * t).cos());
        let samples: Vec<Complex64> = (0..n)
            .map(|i| f(2.0 * std::f64::consts::PI * i as f64 / n as f64))
            .collect();
        let fine = fourier_upsample(&samples, 4);
        for i in 0..n {
            assert!((fine[4 * i] - samples[i]).norm() < 1e-12);
        }
        for j in 0..fine.len() {
            let t = 2.0 * std::f64::consts::PI * j as f64 / fine.len() as f64;
            assert!((fine[j] - f(t)).norm() < 1e-12);
        }
    }
}
