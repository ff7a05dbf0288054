//! Multipole/local expansion operators for the 1/r kernel.
//!
//! Expansions store coefficients for m >= 0 only; negative m follows from
//! conjugate symmetry (the underlying densities are real).  Definitions:
//!
//! * multipole about c: `M_n^m = sum_i q_i conj(R_n^m(y_i - c))`, field
//!   `phi(x) = sum M_n^m I_n^m(x - c)`;
//! * local about c: `phi(x) = sum L_j^k conj(R_j^k(x - c))`.

use num_complex::Complex64;

use super::harmonics::{
    irregular, irregular_gradient, regular, regular_gradient, tri_index, tri_len,
};
use crate::vec3::Vec3;

/// Coefficient triangle (m >= 0) of a multipole or local expansion.
#[derive(Debug, Clone)]
pub struct Expansion {
    pub order: usize,
    pub c: Vec<Complex64>,
}

impl Expansion {
    pub fn zero(order: usize) -> Self {
        Expansion {
            order,
            c: vec![Complex64::ZERO; tri_len(order)],
        }
    }

    #[inline]
    pub fn get(&self, n: usize, m: i64) -> Complex64 {
        if m >= 0 {
            self.c[tri_index(n, m as usize)]
        } else {
            self.c[tri_index(n, (-m) as usize)].conj()
        }
    }

    pub fn add_assign(&mut self, other: &Expansion) {
        debug_assert_eq!(self.order, other.order);
        for (a, b) in self.c.iter_mut().zip(&other.c) {
            *a += *b;
        }
    }
}

/// Phase i^{|a+b| - |a| - |b|} of the translation theorems; real-valued
/// (+/-1) since the exponent is even.  Equals -1 exactly when a and b have
/// strictly opposite signs and min(|a|, |b|) is odd.
#[inline]
fn split_phase(a: i64, b: i64) -> f64 {
    let s = (a.abs() + b.abs() - (a + b).abs()) / 2;
    if s % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Accumulate point charges into a multipole expansion about `center`.
pub fn p2m(points: &[Vec3], charges: &[f64], center: Vec3, out: &mut Expansion) {
    let order = out.order;
    for (&p, &q) in points.iter().zip(charges) {
        let reg = regular(order, p - center);
        for n in 0..=order {
            for m in 0..=n {
                out.c[tri_index(n, m)] += reg.c[tri_index(n, m)].conj() * q;
            }
        }
    }
}

/// Translate a multipole expansion from `child_center` to `parent_center`.
///
/// `M'_n^m = sum_{j,k} phase(k, m-k) conj(R_j^k(t)) M_{n-j}^{m-k}` with t
/// the center shift.
pub fn m2m(child: &Expansion, child_center: Vec3, parent_center: Vec3, out: &mut Expansion) {
    let order = out.order;
    let reg = regular(order, child_center - parent_center);
    for n in 0..=order {
        for m in 0..=n {
            let mut acc = Complex64::ZERO;
            for j in 0..=n {
                let nj = n - j;
                let ji = j as i64;
                let k_lo = (-ji).max(m as i64 - nj as i64);
                let k_hi = ji.min(m as i64 + nj as i64);
                for k in k_lo..=k_hi {
                    acc += reg.get(j, k).conj()
                        * child.get(nj, m as i64 - k)
                        * split_phase(k, m as i64 - k);
                }
            }
            out.c[tri_index(n, m)] += acc;
        }
    }
}

/// Convert a multipole about `src_center` into a local expansion about
/// `tgt_center`.
///
/// `L_j^k = (-1)^j sum_{n,m} phase(k, m) M_n^m I_{n+j}^{m+k}(t)`, t = tgt - src.
pub fn m2l(src: &Expansion, src_center: Vec3, tgt_center: Vec3, out: &mut Expansion) {
    let p_src = src.order;
    let p_out = out.order;
    let irr = irregular(p_src + p_out, tgt_center - src_center);
    for j in 0..=p_out {
        let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
        for k in 0..=j {
            let ki = k as i64;
            let mut acc = Complex64::ZERO;
            for n in 0..=p_src {
                let ni = n as i64;
                for m in -ni..=ni {
                    acc += src.get(n, m) * irr.get(n + j, m + ki) * split_phase(ki, m);
                }
            }
            out.c[tri_index(j, k)] += acc * sign;
        }
    }
}

/// Translate a local expansion from `parent_center` to `child_center`.
///
/// `L'_i^l = sum_{j >= i, k} phase(l, k-l) conj(R_{j-i}^{k-l}(t)) L_j^k`,
/// t = child - parent.
pub fn l2l(parent: &Expansion, parent_center: Vec3, child_center: Vec3, out: &mut Expansion) {
    let order = out.order;
    let reg = regular(order, child_center - parent_center);
    for i in 0..=order {
        for l in 0..=i {
            let li = l as i64;
            let mut acc = Complex64::ZERO;
            for j in i..=order {
                let ji = j as i64;
                let d = (j - i) as i64;
                for k in -ji..=ji {
                    if (k - li).abs() <= d {
                        acc += reg.get(j - i, k - li).conj()
                            * parent.get(j, k)
                            * split_phase(li, k - li);
                    }
                }
            }
            out.c[tri_index(i, l)] += acc;
        }
    }
}

/// Evaluate a local expansion (potential, gradient) at `x`.
pub fn l2p(local: &Expansion, center: Vec3, x: Vec3) -> (f64, Vec3) {
    let order = local.order;
    let reg = regular(order, x - center);
    let mut pot = Complex64::ZERO;
    let mut grad = [Complex64::ZERO; 3];
    for j in 0..=order {
        let ji = j as i64;
        for k in -ji..=ji {
            let coef = local.get(j, k);
            pot += coef * reg.get(j, k).conj();
            let g = regular_gradient(&reg, j, k);
            for a in 0..3 {
                grad[a] += coef * g[a].conj();
            }
        }
    }
    (pot.re, Vec3::new(grad[0].re, grad[1].re, grad[2].re))
}

/// Evaluate a multipole expansion (potential, gradient) at a far point `x`.
pub fn m2p(m: &Expansion, center: Vec3, x: Vec3) -> (f64, Vec3) {
    let order = m.order;
    let irr = irregular(order + 1, x - center);
    let mut pot = Complex64::ZERO;
    let mut grad = [Complex64::ZERO; 3];
    for n in 0..=order {
        let ni = n as i64;
        for mm in -ni..=ni {
            let coef = m.get(n, mm);
            pot += coef * irr.get(n, mm);
            let g = irregular_gradient(&irr, n, mm);
            for a in 0..3 {
                grad[a] += coef * g[a];
            }
        }
    }
    (pot.re, Vec3::new(grad[0].re, grad[1].re, grad[2].re))
}

/// Direct particle-particle contribution (potential, gradient of potential).
///
/// Skips exact coincidences and reports them through `singular`.
#[inline]
pub fn p2p(
    sources: &[Vec3],
    charges: &[f64],
    target: Vec3,
    singular: &mut bool,
) -> (f64, Vec3) {
    let mut pot = 0.0;
    let mut grad = Vec3::ZERO;
    for (&s, &q) in sources.iter().zip(charges) {
        let d = target - s;
        let r2 = d.norm_sq();
        if r2 == 0.0 {
            *singular = true;
            continue;
        }
        let inv_r = r2.sqrt().recip();
        let inv_r3 = inv_r * inv_r * inv_r;
        pot += q * inv_r;
        grad -= d * (q * inv_r3);
    }
    (pot, grad)
}

/// Brute-force reference sum (potential only) used by operator tests.
#[cfg(test)]
pub fn direct_potential(sources: &[Vec3], charges: &[f64], x: Vec3) -> f64 {
    sources
        .iter()
        .zip(charges)
        .map(|(&s, &q)| q / (x - s).norm())
        .sum()
}
