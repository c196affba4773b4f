//! Cylinder (Bessel/Hankel) and Chebyshev special functions.
//!
//! Integer-order J and Y are built from three classical pieces, none of which
//! needs tabulated minimax data:
//!
//! * `x >= 20`: Hankel asymptotic expansions with coefficients
//!   `a_k(nu) = prod_j (4 nu^2 - (2j-1)^2) / (k! 8^k)` generated exactly,
//!   truncated at the smallest term (below 1e-17 at this range);
//! * `x < 20`: Miller's normalized downward recurrence for the whole J ladder,
//!   with `J_0 + 2 sum J_{2m} = 1` fixing the scale;
//! * `Y_0`, `Y_1` from the Neumann series
//!   `Y_0 = (2/pi)(ln(x/2)+gamma) J_0 + (4/pi) sum (-1)^{k+1} J_{2k}/k`
//!   and its term-by-term derivative, then stable upward recurrence in order.
//!
//! All evaluations are pure and reentrant.

use crate::util::EULER_GAMMA;
use crate::{Error, Result};
use num_complex::Complex64;
use std::f64::consts::{FRAC_PI_4, PI};
use std::sync::OnceLock;

/// Maximum supported order for the order-dependent entry points.
pub const ELL_MAX: i64 = 512;

const ASYMPTOTIC_CUT: f64 = 20.0;
/// Saturation bound for Y in the deep evanescent regime; keeps products
/// `Y_l(kr) * (tiny J moment)` from producing inf * 0.
pub const Y_CLAMP: f64 = 1e280;

fn asymptotic_coeffs(nu: f64) -> Vec<f64> {
    let mut a = vec![1.0];
    let mu = 4.0 * nu * nu;
    for k in 1..=40usize {
        let j = (2 * k - 1) as f64;
        let prev = a[k - 1];
        a.push(prev * (mu - j * j) / (k as f64 * 8.0));
    }
    a
}

fn coeffs_j0() -> &'static Vec<f64> {
    static C: OnceLock<Vec<f64>> = OnceLock::new();
    C.get_or_init(|| asymptotic_coeffs(0.0))
}

fn coeffs_j1() -> &'static Vec<f64> {
    static C: OnceLock<Vec<f64>> = OnceLock::new();
    C.get_or_init(|| asymptotic_coeffs(1.0))
}

/// P and Q factors of the Hankel asymptotic expansion at order `nu`.
fn asymptotic_pq(coeffs: &[f64], x: f64) -> (f64, f64) {
    let inv = 1.0 / x;
    let mut p = 0.0;
    let mut q = 0.0;
    let mut pow = 1.0; // inv^k
    let mut last = f64::INFINITY;
    for (k, &ak) in coeffs.iter().enumerate() {
        let term = ak * pow;
        if term.abs() > last {
            break; // asymptotic tail started growing
        }
        last = term.abs();
        let signed = if (k / 2) % 2 == 0 { term } else { -term };
        if k % 2 == 0 {
            p += signed;
        } else {
            q += signed;
        }
        if term.abs() < 1e-18 {
            break;
        }
        pow *= inv;
    }
    (p, q)
}

fn jy01_asymptotic(x: f64) -> (f64, f64, f64, f64) {
    let amp = (2.0 / (PI * x)).sqrt();
    let (p0, q0) = asymptotic_pq(coeffs_j0(), x);
    let chi0 = x - FRAC_PI_4;
    let j0 = amp * (p0 * chi0.cos() - q0 * chi0.sin());
    let y0 = amp * (p0 * chi0.sin() + q0 * chi0.cos());
    let (p1, q1) = asymptotic_pq(coeffs_j1(), x);
    let chi1 = x - 3.0 * FRAC_PI_4;
    let j1 = amp * (p1 * chi1.cos() - q1 * chi1.sin());
    let y1 = amp * (p1 * chi1.sin() + q1 * chi1.cos());
    (j0, j1, y0, y1)
}

/// Downward Miller sweep: returns `J_0..=J_lmax` for `x < ASYMPTOTIC_CUT` or
/// whenever `lmax > x` demands it. The sweep starts far enough above
/// `max(lmax, x)` that the unnormalized solution has converged onto the
/// minimal one by the time it reaches `lmax`.
fn miller_j_ladder(lmax: usize, x: f64) -> Vec<f64> {
    if x < 1e-8 {
        // two-term ascending series; avoids overflow in the downward sweep
        let mut out = vec![0.0; lmax + 1];
        out[0] = 1.0 - 0.25 * x * x;
        if lmax >= 1 {
            out[1] = 0.5 * x * (1.0 - 0.125 * x * x);
        }
        let mut log_fact = 0.0;
        for (l, slot) in out.iter_mut().enumerate().skip(2) {
            log_fact += (l as f64).ln();
            let log_v = l as f64 * (0.5 * x).ln() - log_fact;
            *slot = if log_v < -700.0 { 0.0 } else { log_v.exp() };
        }
        return out;
    }
    let start = {
        let base = (1.36 * x + 44.0).ceil() as usize;
        let s = lmax + 50 + (2.0 * x.sqrt()) as usize;
        let mut s = s.max(base);
        if s % 2 == 1 {
            s += 1;
        }
        s
    };
    let mut f = vec![0.0f64; start + 2];
    f[start + 1] = 0.0;
    f[start] = 1e-280;
    for k in (1..=start).rev() {
        f[k - 1] = (2.0 * k as f64 / x) * f[k] - f[k + 1];
        if f[k - 1].abs() > 1e250 {
            let scale = 1e-250;
            for v in f[k - 1..].iter_mut() {
                *v *= scale;
            }
        }
    }
    let mut norm = f[0];
    let mut m = 2;
    while m <= start {
        norm += 2.0 * f[m];
        m += 2;
    }
    let inv = 1.0 / norm;
    f.truncate(lmax + 1);
    for v in f.iter_mut() {
        *v *= inv;
    }
    f
}

/// `J_0..=J_lmax` at `x >= 0`.
pub fn bessel_j_ladder(lmax: usize, x: f64) -> Vec<f64> {
    assert!(x >= 0.0, "bessel_j_ladder wants x >= 0");
    if x >= ASYMPTOTIC_CUT && (lmax as f64) < x {
        let (j0, j1, _, _) = jy01_asymptotic(x);
        let mut out = Vec::with_capacity(lmax + 1);
        out.push(j0);
        if lmax >= 1 {
            out.push(j1);
        }
        for k in 1..lmax {
            let next = (2.0 * k as f64 / x) * out[k] - out[k - 1];
            out.push(next);
        }
        return out;
    }
    miller_j_ladder(lmax, x)
}

fn y01(x: f64) -> (f64, f64) {
    debug_assert!(x > 0.0);
    if x >= ASYMPTOTIC_CUT {
        let (_, _, y0, y1) = jy01_asymptotic(x);
        return (y0, y1);
    }
    // Neumann series; the J ladder up to the Miller start is already accurate.
    let lmax = (1.36 * x + 46.0) as usize;
    let j = miller_j_ladder(lmax, x);
    let lterm = (0.5 * x).ln() + EULER_GAMMA;
    let mut s0 = 0.0;
    let mut s1 = 0.0;
    let mut k = 1usize;
    while 2 * k + 1 <= lmax {
        let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
        s0 += sign * j[2 * k] / k as f64;
        s1 += sign * (j[2 * k - 1] - j[2 * k + 1]) / (2.0 * k as f64);
        k += 1;
    }
    let y0 = (2.0 / PI) * lterm * j[0] + (4.0 / PI) * s0;
    let y1 = -(2.0 / (PI * x)) * j[0] + (2.0 / PI) * lterm * j[1] - (4.0 / PI) * s1;
    (y0, y1)
}

/// `Y_0..=Y_lmax` at `x > 0` by stable upward recurrence, saturating at
/// `Y_CLAMP` once the values leave the double range.
pub fn bessel_y_ladder(lmax: usize, x: f64) -> Result<Vec<f64>> {
    if x <= 0.0 {
        return Err(Error::Domain(format!(
            "Y_l has a singularity at the origin; got x = {x}"
        )));
    }
    let (y0, y1) = y01(x);
    let mut out = Vec::with_capacity(lmax + 1);
    out.push(y0);
    if lmax >= 1 {
        out.push(y1);
    }
    for k in 1..lmax {
        let prev = out[k - 1];
        let cur = out[k];
        let mut next = (2.0 * k as f64 / x) * cur - prev;
        if next.abs() > Y_CLAMP {
            next = next.signum() * Y_CLAMP;
        }
        out.push(next);
    }
    Ok(out)
}

/// First-kind Bessel function of integer order; negative orders use the
/// reflection `J_{-l} = (-1)^l J_l`.
pub fn bessel_j(ell: i64, x: f64) -> f64 {
    assert!(x >= 0.0, "bessel_j wants x >= 0, got {x}");
    assert!(ell.abs() <= ELL_MAX, "order {ell} beyond supported range");
    let l = ell.unsigned_abs() as usize;
    let sign = if ell < 0 && ell % 2 != 0 { -1.0 } else { 1.0 };
    let ladder = bessel_j_ladder(l, x);
    sign * ladder[l]
}

/// Second-kind Bessel function of integer order, `x > 0`.
pub fn bessel_y(ell: i64, x: f64) -> Result<f64> {
    assert!(ell.abs() <= ELL_MAX, "order {ell} beyond supported range");
    let l = ell.unsigned_abs() as usize;
    let sign = if ell < 0 && ell % 2 != 0 { -1.0 } else { 1.0 };
    let ladder = bessel_y_ladder(l, x)?;
    Ok(sign * ladder[l])
}

/// Outgoing Hankel function `H_l^1(x) = J_l(x) + i Y_l(x)`, `x > 0`.
pub fn hankel1(ell: i64, x: f64) -> Result<Complex64> {
    Ok(Complex64::new(bessel_j(ell, x), bessel_y(ell, x)?))
}

/// Radiating free-space fundamental solution `G_k(x) = (i/4) H_0^1(k |x|)`.
pub fn green_kernel(kappa: f64, dist: f64) -> Complex64 {
    let h = hankel1(0, kappa * dist).expect("green_kernel wants dist > 0");
    Complex64::new(0.0, 0.25) * h
}

/// Chebyshev polynomial of the first kind by the three-term recurrence;
/// `beta` may exceed [-1, 1] by roundoff and is clamped.
pub fn chebyshev_t(n: usize, beta: f64) -> f64 {
    let b = beta.clamp(-1.0, 1.0);
    match n {
        0 => 1.0,
        1 => b,
        _ => {
            let mut t0 = 1.0;
            let mut t1 = b;
            for _ in 2..=n {
                let t2 = 2.0 * b * t1 - t0;
                t0 = t1;
                t1 = t2;
            }
            t1
        }
    }
}

/// All of `T_0..=T_{n-1}` at `beta`.
pub fn chebyshev_t_ladder(n: usize, beta: f64) -> Vec<f64> {
    let b = beta.clamp(-1.0, 1.0);
    let mut out = Vec::with_capacity(n);
    if n >= 1 {
        out.push(1.0);
    }
    if n >= 2 {
        out.push(b);
    }
    for k in 2..n {
        let t = 2.0 * b * out[k - 1] - out[k - 2];
        out.push(t);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Ascending-series oracle for J_l, independent of the recurrence path.
    fn j_series(ell: u32, x: f64) -> f64 {
        let half = 0.5 * x;
        let mut term = 1.0f64;
        for k in 1..=ell {
            term *= half / k as f64;
        }
        let mut sum = term;
        let z = half * half;
        for m in 1..200 {
            term *= -z / (m as f64 * (m as f64 + ell as f64));
            sum += term;
            if term.abs() < 1e-18 * sum.abs().max(1e-30) {
                break;
            }
        }
        sum
    }

    /// Ascending-series oracle for Y_0 built from the defining expansion
    /// Y_0 = (2/pi)[(ln(x/2)+gamma) J_0 + sum_{m>=1} (-1)^{m+1} H_m (x^2/4)^m / (m!)^2].
    fn y0_series(x: f64) -> f64 {
        let z = 0.25 * x * x;
        let mut term = 1.0f64;
        let mut h = 0.0f64;
        let mut sum = 0.0f64;
        for m in 1..300 {
            term *= z / (m as f64 * m as f64);
            h += 1.0 / m as f64;
            let signed = if m % 2 == 1 { term * h } else { -term * h };
            sum += signed;
            if term < 1e-19 {
                break;
            }
        }
        (2.0 / PI) * (((0.5 * x).ln() + EULER_GAMMA) * j_series(0, x) + sum)
    }

    #[test]
    fn j_trivial_values() {
        assert_eq!(bessel_j(0, 0.0), 1.0);
        assert_eq!(bessel_j(1, 0.0), 0.0);
        assert_eq!(bessel_j(7, 0.0), 0.0);
    }

    #[test]
    fn j_matches_series_oracle() {
        // The alternating series oracle loses digits to cancellation as x
        // grows (roughly e^x * eps), so the comparison band widens with x;
        // mid-range accuracy is pinned by the Wronskian test instead.
        for &(x, tol) in &[
            (1e-6, 1e-13),
            (0.1, 1e-13),
            (1.0, 1e-13),
            (2.5, 1e-13),
            (7.0, 1e-12),
            (12.0, 1e-10),
            (19.0, 1e-7),
        ] {
            for &l in &[0i64, 1, 2, 5, 11] {
                let got = bessel_j(l, x);
                let want = j_series(l as u32, x);
                // floor the denominator: near a zero of J_l both routes carry
                // absolute (not relative) roundoff
                let denom = want.abs().max(0.02);
                assert!(
                    ((got - want) / denom).abs() < tol,
                    "J_{l}({x}): {got} vs {want}"
                );
            }
        }
    }

    #[test]
    fn j_asymptotic_consistent_with_series_route() {
        // straddle the asymptotic cut with the recurrence identity
        for &x in &[19.5, 20.5, 35.0, 100.0, 1000.0] {
            let j = bessel_j_ladder(3, x);
            let lhs = 2.0 * 1.0 / x * j[1];
            let rhs = j[0] + j[2];
            assert!((lhs - rhs).abs() < 1e-13 * j[1].abs().max(1.0));
        }
    }

    #[test]
    fn y0_matches_series_oracle() {
        // Same cancellation caveat as for J: the oracle itself is only good
        // to ~e^x * eps, so larger arguments get a wider band.
        for &(x, tol) in &[
            (1e-6, 1e-12),
            (0.03, 1e-12),
            (0.5, 1e-12),
            (1.0, 1e-12),
            (4.0, 1e-12),
            (9.0, 1e-11),
            (15.0, 1e-9),
        ] {
            let got = bessel_y(0, x).unwrap();
            let want = y0_series(x);
            assert!(
                ((got - want) / want.abs().max(1e-12)).abs() < tol,
                "Y_0({x}): {got} vs {want}"
            );
        }
    }

    #[test]
    fn y_rejects_nonpositive_argument() {
        assert!(bessel_y(0, 0.0).is_err());
        assert!(bessel_y(3, -1.0).is_err());
    }

    #[test]
    fn negative_order_reflection() {
        let x = 1.0;
        assert_eq!(bessel_y(-1, x).unwrap(), -bessel_y(1, x).unwrap());
        assert_eq!(bessel_y(-2, x).unwrap(), bessel_y(2, x).unwrap());
        assert_eq!(bessel_j(-3, 2.0), -bessel_j(3, 2.0));
    }

    #[test]
    fn hankel_is_j_plus_iy() {
        for &x in &[0.3, 1.0, 8.0, 30.0] {
            for &l in &[0i64, 1, 4] {
                let h = hankel1(l, x).unwrap();
                assert_eq!(h.re, bessel_j(l, x));
                assert_eq!(h.im, bessel_y(l, x).unwrap());
            }
        }
    }

    #[test]
    fn wronskian_identity() {
        // J_l(x) Y_{l+1}(x) - J_{l+1}(x) Y_l(x) = -2/(pi x)
        for &x in &[0.2, 1.0, 5.0, 17.0, 26.0, 120.0] {
            for &l in &[0i64, 1, 3, 9, 20] {
                let j0 = bessel_j(l, x);
                let j1 = bessel_j(l + 1, x);
                let y0 = bessel_y(l, x).unwrap();
                let y1 = bessel_y(l + 1, x).unwrap();
                let w = j0 * y1 - j1 * y0;
                let want = -2.0 / (PI * x);
                assert!(
                    ((w - want) / want).abs() < 1e-11,
                    "Wronskian l={l} x={x}: {w} vs {want}"
                );
            }
        }
    }

    #[test]
    fn recurrence_consistency_both_kinds() {
        // 2 (l/x) C_l = C_{l-1} + C_{l+1}
        for &x in &[0.1, 1.0, 10.0, 100.0] {
            for l in [1i64, 2, 8, 32, 64] {
                let jm = bessel_j(l - 1, x);
                let j = bessel_j(l, x);
                let jp = bessel_j(l + 1, x);
                let scale = jm.abs().max(j.abs()).max(jp.abs()).max(1e-280);
                assert!(
                    (2.0 * l as f64 / x * j - (jm + jp)).abs() / scale < 1e-10,
                    "J recurrence l={l} x={x}"
                );
                let ym = bessel_y(l - 1, x).unwrap();
                let y = bessel_y(l, x).unwrap();
                let yp = bessel_y(l + 1, x).unwrap();
                if yp.abs() < Y_CLAMP {
                    let scale = ym.abs().max(y.abs()).max(yp.abs());
                    assert!(
                        (2.0 * l as f64 / x * y - (ym + yp)).abs() / scale < 1e-10,
                        "Y recurrence l={l} x={x}"
                    );
                }
            }
        }
    }

    #[test]
    fn high_order_ladder_is_finite() {
        let j = bessel_j_ladder(512, 50.0);
        assert!(j.iter().all(|v| v.is_finite()));
        // deep evanescent tail decays monotonically
        assert!(j[511].abs() < j[300].abs());
    }

    #[test]
    fn chebyshev_values_and_bound() {
        assert_eq!(chebyshev_t(0, 0.37), 1.0);
        assert_eq!(chebyshev_t(1, 0.37), 0.37);
        assert!((chebyshev_t(2, 0.5) + 0.5).abs() < 1e-15);
        for n in 0..32 {
            for i in 0..=100 {
                let b = -1.0 + 0.02 * i as f64;
                assert!(chebyshev_t(n, b).abs() <= 1.0 + 1e-12);
            }
        }
    }
}
