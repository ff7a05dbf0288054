//! Complex solid harmonics for the Laplace kernel.
//!
//! Uses the factorial-normalized regular solid harmonics
//! `R_n^m = r^n P_n^m(cos t) e^{i m p} / (n+m)!` and irregular solid
//! harmonics `I_n^m = (n-m)! P_n^m(cos t) e^{i m p} / r^{n+1}` (no
//! Condon-Shortley phase), extended to negative m by conjugation:
//! `R_n^{-m} = conj(R_n^m)`.  With this normalization the addition theorem
//! reads, for |y| < |x|,
//!
//! ```text
//! 1/|x - y| = sum_{n,m} conj(R_n^m(y)) I_n^m(x)
//! ```
//!
//! and all translation operators are plain convolutions (see the `ops`
//! module).  Tables are generated by stable three-term recurrences in
//! Cartesian form; no trigonometric calls.

use num_complex::Complex64;

use crate::vec3::Vec3;

/// Triangle index of (n, m) with 0 <= m <= n.
#[inline]
pub fn tri_index(n: usize, m: usize) -> usize {
    n * (n + 1) / 2 + m
}

/// Number of (n, m>=0) coefficients for orders 0..=order.
#[inline]
pub fn tri_len(order: usize) -> usize {
    (order + 1) * (order + 2) / 2
}

/// Table of solid harmonic values for m >= 0; negative m via conjugation.
#[derive(Debug, Clone)]
pub struct SolidTable {
    pub order: usize,
    pub c: Vec<Complex64>,
}

impl SolidTable {
    /// Value for any -n <= m <= n.
    #[inline]
    pub fn get(&self, n: usize, m: i64) -> Complex64 {
        if m >= 0 {
            self.c[tri_index(n, m as usize)]
        } else {
            self.c[tri_index(n, (-m) as usize)].conj()
        }
    }

    /// Value for any (n, m), treating out-of-range |m| > n as zero.
    #[inline]
    pub fn get_or_zero(&self, n: i64, m: i64) -> Complex64 {
        if n < 0 || m.unsigned_abs() as usize > n as usize || n as usize > self.order {
            Complex64::ZERO
        } else {
            self.get(n as usize, m)
        }
    }
}

/// Regular solid harmonics R_n^m(v) for n <= order.
pub fn regular(order: usize, v: Vec3) -> SolidTable {
    let mut c = vec![Complex64::ZERO; tri_len(order)];
    let xy = Complex64::new(v.x, v.y);
    let r2 = v.norm_sq();
    let z = v.z;

    c[0] = Complex64::ONE;
    // Diagonal: R_m^m = (x + iy) / (2m) * R_{m-1}^{m-1}
    for m in 1..=order {
        c[tri_index(m, m)] = c[tri_index(m - 1, m - 1)] * xy / (2.0 * m as f64);
    }
    // First sub-diagonal: R_{m+1}^m = z * R_m^m
    for m in 0..order {
        c[tri_index(m + 1, m)] = c[tri_index(m, m)] * z;
    }
    // Remaining: R_n^m = ((2n-1) z R_{n-1}^m - r^2 R_{n-2}^m) / ((n+m)(n-m))
    for m in 0..=order {
        for n in (m + 2)..=order {
            let a = c[tri_index(n - 1, m)] * ((2 * n - 1) as f64 * z);
            let b = c[tri_index(n - 2, m)] * r2;
            c[tri_index(n, m)] = (a - b) / (((n + m) * (n - m)) as f64);
        }
    }
    SolidTable { order, c }
}

/// Irregular solid harmonics I_n^m(v) for n <= order.  v must be nonzero.
pub fn irregular(order: usize, v: Vec3) -> SolidTable {
    let mut c = vec![Complex64::ZERO; tri_len(order)];
    let xy = Complex64::new(v.x, v.y);
    let r2 = v.norm_sq();
    let inv_r2 = 1.0 / r2;
    let z = v.z;

    c[0] = Complex64::new(r2.sqrt().recip(), 0.0);
    // Diagonal: I_m^m = (2m-1) (x + iy)/r^2 * I_{m-1}^{m-1}
    for m in 1..=order {
        c[tri_index(m, m)] = c[tri_index(m - 1, m - 1)] * xy * ((2 * m - 1) as f64 * inv_r2);
    }
    // First sub-diagonal: I_{m+1}^m = (2m+1) z/r^2 * I_m^m
    for m in 0..order {
        c[tri_index(m + 1, m)] = c[tri_index(m, m)] * ((2 * m + 1) as f64 * z * inv_r2);
    }
    // Remaining: I_n^m = ((2n-1) z I_{n-1}^m - ((n-1)^2 - m^2) I_{n-2}^m) / r^2
    for m in 0..=order {
        for n in (m + 2)..=order {
            let a = c[tri_index(n - 1, m)] * ((2 * n - 1) as f64 * z);
            let b = c[tri_index(n - 2, m)] * (((n - 1) * (n - 1) - m * m) as f64);
            c[tri_index(n, m)] = (a - b) * inv_r2;
        }
    }
    SolidTable { order, c }
}

/// Gradient of R_n^m, expressed through the same table one order lower.
///
/// Returns (dR/dx, dR/dy, dR/dz) for signed m.  Uses
/// `dz R_n^m = R_{n-1}^m` and the ladder identities
/// `(dx - i dy) R_n^m = +/- R_{n-1}^{m-1}`, `(dx + i dy) R_n^m = -/+ R_{n-1}^{m+1}`
/// whose signs flip at m = 0 with this (conjugate-symmetric) normalization.
#[inline]
pub fn regular_gradient(table: &SolidTable, n: usize, m: i64) -> [Complex64; 3] {
    let ni = n as i64;
    let dz = table.get_or_zero(ni - 1, m);
    let s_minus = if m >= 1 { 1.0 } else { -1.0 };
    let s_plus = if m >= 0 { -1.0 } else { 1.0 };
    let d_minus = table.get_or_zero(ni - 1, m - 1) * s_minus; // (dx - i dy) R
    let d_plus = table.get_or_zero(ni - 1, m + 1) * s_plus; // (dx + i dy) R
    let dx = (d_plus + d_minus) * 0.5;
    let dy = (d_plus - d_minus) * Complex64::new(0.0, -0.5);
    [dx, dy, dz]
}

/// Gradient of I_n^m, expressed through a table one order higher.
///
/// `dz I_n^m = -I_{n+1}^m`; ladder signs mirror the regular case.
#[inline]
pub fn irregular_gradient(table: &SolidTable, n: usize, m: i64) -> [Complex64; 3] {
    let ni = n as i64;
    let dz = -table.get_or_zero(ni + 1, m);
    let s_minus = if m >= 1 { 1.0 } else { -1.0 };
    let s_plus = if m >= 0 { -1.0 } else { 1.0 };
    // Ladder identities for I carry the same m-dependent signs as for R:
    //   (dx - i dy) I_n^m = +I_{n+1}^{m-1} (m >= 1), -I_{n+1}^{m-1} (m <= 0)
    //   (dx + i dy) I_n^m = -I_{n+1}^{m+1} (m >= 0), +I_{n+1}^{m+1} (m <= -1)
    let d_minus = table.get_or_zero(ni + 1, m - 1) * s_minus;
    let d_plus = table.get_or_zero(ni + 1, m + 1) * s_plus;
    let dx = (d_plus + d_minus) * 0.5;
    let dy = (d_plus - d_minus) * Complex64::new(0.0, -0.5);
    [dx, dy, dz]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn assoc_legendre(n: usize, m: usize, x: f64) -> f64 {
        // No Condon-Shortley phase.
        let somx2 = (1.0 - x * x).sqrt();
        let mut pmm = 1.0;
        for k in 1..=m {
            pmm *= (2 * k - 1) as f64 * somx2;
        }
        if n == m {
            return pmm;
        }
        let mut pm1 = pmm;
        let mut pm2 = x * (2 * m + 1) as f64 * pmm;
        if n == m + 1 {
            return pm2;
        }
        for k in (m + 2)..=n {
            let p = ((2 * k - 1) as f64 * x * pm2 - (k - 1 + m) as f64 * pm1) / (k - m) as f64;
            pm1 = pm2;
            pm2 = p;
        }
        pm2
    }

    fn factorial(n: usize) -> f64 {
        (1..=n).map(|k| k as f64).product()
    }

    fn reference_regular(n: usize, m: usize, v: Vec3) -> Complex64 {
        let r = v.norm();
        if r == 0.0 {
            return if n == 0 { Complex64::ONE } else { Complex64::ZERO };
        }
        let ct = v.z / r;
        let phi = v.y.atan2(v.x);
        let p = assoc_legendre(n, m, ct);
        Complex64::from_polar(r.powi(n as i32) * p / factorial(n + m), m as f64 * phi)
    }

    fn reference_irregular(n: usize, m: usize, v: Vec3) -> Complex64 {
        let r = v.norm();
        let ct = v.z / r;
        let phi = v.y.atan2(v.x);
        let p = assoc_legendre(n, m, ct);
        Complex64::from_polar(factorial(n - m) * p / r.powi(n as i32 + 1), m as f64 * phi)
    }

    #[test]
    fn recurrences_match_reference_definitions() {
        let pts = [
            Vec3::new(0.3, -0.7, 0.2),
            Vec3::new(-1.1, 0.4, -2.0),
            Vec3::new(0.01, 0.02, 1.5),
        ];
        for v in pts {
            let reg = regular(9, v);
            let irr = irregular(9, v);
            for n in 0..=9usize {
                for m in 0..=n {
                    let want_r = reference_regular(n, m, v);
                    let got_r = reg.get(n, m as i64);
                    assert!(
                        (want_r - got_r).norm() <= 1e-12 * (1.0 + want_r.norm()),
                        "R_{n}^{m}: want {want_r}, got {got_r}"
                    );
                    let want_i = reference_irregular(n, m, v);
                    let got_i = irr.get(n, m as i64);
                    assert!(
                        (want_i - got_i).norm() <= 1e-12 * (1.0 + want_i.norm()),
                        "I_{n}^{m}: want {want_i}, got {got_i}"
                    );
                }
            }
        }
    }

    #[test]
    fn addition_theorem_converges() {
        // 1/|x - y| = sum conj(R(y)) I(x) for |y| < |x|.
        let y = Vec3::new(0.11, -0.07, 0.05);
        let x = Vec3::new(0.8, 1.1, -0.9);
        let order = 20;
        let reg = regular(order, y);
        let irr = irregular(order, x);
        let mut sum = Complex64::ZERO;
        for n in 0..=order {
            for m in -(n as i64)..=(n as i64) {
                sum += reg.get(n, m).conj() * irr.get(n, m);
            }
        }
        let exact = 1.0 / (x - y).norm();
        assert!(
            (sum.re - exact).abs() < 1e-12 * exact,
            "sum {} vs exact {}",
            sum.re,
            exact
        );
        assert!(sum.im.abs() < 1e-12 * exact);
    }

    #[test]
    fn regular_gradient_matches_finite_differences() {
        let v = Vec3::new(0.4, -0.9, 0.6);
        let order = 7;
        let h = 1e-6;
        let tab = regular(order, v);
        for n in 0..=order {
            for m in -(n as i64)..=(n as i64) {
                let g = regular_gradient(&tab, n, m);
                for (axis, gi) in g.iter().enumerate() {
                    let mut dp = v;
                    let mut dm = v;
                    match axis {
                        0 => {
                            dp.x += h;
                            dm.x -= h;
                        }
                        1 => {
                            dp.y += h;
                            dm.y -= h;
                        }
                        _ => {
                            dp.z += h;
                            dm.z -= h;
                        }
                    }
                    let fd = (regular(order, dp).get(n, m) - regular(order, dm).get(n, m))
                        / (2.0 * h);
                    assert!(
                        (fd - gi).norm() <= 2e-5 * (1.0 + fd.norm()),
                        "grad R_{n}^{m} axis {axis}: fd {fd}, analytic {gi}"
                    );
                }
            }
        }
    }

    #[test]
    fn irregular_gradient_matches_finite_differences() {
        let v = Vec3::new(0.7, 0.3, -0.8);
        let order = 6;
        let h = 1e-6;
        let tab = irregular(order + 1, v);
        for n in 0..=order {
            for m in -(n as i64)..=(n as i64) {
                let g = irregular_gradient(&tab, n, m);
                for (axis, gi) in g.iter().enumerate() {
                    let mut dp = v;
                    let mut dm = v;
                    match axis {
                        0 => {
                            dp.x += h;
                            dm.x -= h;
                        }
                        1 => {
                            dp.y += h;
                            dm.y -= h;
                        }
                        _ => {
                            dp.z += h;
                            dm.z -= h;
                        }
                    }
                    let fd = (irregular(order + 1, dp).get(n, m)
                        - irregular(order + 1, dm).get(n, m))
                        / (2.0 * h);
                    assert!(
                        (fd - gi).norm() <= 2e-4 * (1.0 + fd.norm()),
                        "grad I_{n}^{m} axis {axis}: fd {fd}, analytic {gi}"
                    );
                }
            }
        }
    }
}
