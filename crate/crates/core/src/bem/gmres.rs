//! Restarted GMRES for matrix-free operators.

use crate::error::{CoreError, CoreResult};

pub struct GmresOptions {
    pub tol: f64,
    pub restart: usize,
    pub max_iters: usize,
}

impl Default for GmresOptions {
    fn default() -> Self {
        GmresOptions {
            tol: 1e-8,
            restart: 120,
            max_iters: 600,
        }
    }
}

#[derive(Debug)]
pub struct GmresResult {
    pub x: Vec<f64>,
    /// Relative residual at exit.
    pub residual: f64,
    pub iterations: usize,
    /// Relative residual after each iteration.
    pub history: Vec<f64>,
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Solve A x = b with modified-Gram-Schmidt GMRES(restart).
///
/// `apply` computes y = A x.  Returns an error carrying the residual
/// history if the iteration cap is reached before the tolerance.
pub fn gmres<F>(apply: F, b: &[f64], opts: &GmresOptions) -> CoreResult<GmresResult>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    let n = b.len();
    let b_norm = norm(b);
    if b_norm == 0.0 {
        return Ok(GmresResult {
            x: vec![0.0; n],
            residual: 0.0,
            iterations: 0,
            history: vec![0.0],
        });
    }

    let m = opts.restart.max(1);
    let mut x = vec![0.0; n];
    let mut history = Vec::new();
    let mut total_iters = 0usize;

    loop {
        // r = b - A x
        let ax = apply(&x);
        let mut r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
        let beta = norm(&r);
        let rel = beta / b_norm;
        if rel <= opts.tol {
            return Ok(GmresResult {
                x,
                residual: rel,
                iterations: total_iters,
                history,
            });
        }
        if total_iters >= opts.max_iters {
            return Err(CoreError::SolverDiverged {
                residual: rel,
                iterations: total_iters,
                tolerance: opts.tol,
                history,
            });
        }

        for v in &mut r {
            *v /= beta;
        }
        let mut basis: Vec<Vec<f64>> = vec![r];
        // Hessenberg in column-major form, with Givens rotations applied.
        let mut h = vec![vec![0.0f64; 0]; 0];
        let mut cs: Vec<f64> = Vec::new();
        let mut sn: Vec<f64> = Vec::new();
        let mut g = vec![0.0f64; m + 1];
        g[0] = beta;
        let mut k_used = 0;

        for k in 0..m {
            let mut w = apply(&basis[k]);
            let mut hk = vec![0.0f64; k + 2];
            for (i, vi) in basis.iter().enumerate() {
                let hik = dot(&w, vi);
                hk[i] = hik;
                for (wj, vj) in w.iter_mut().zip(vi) {
                    *wj -= hik * vj;
                }
            }
            let wn = norm(&w);
            hk[k + 1] = wn;

            // Apply accumulated rotations to the new column.
            for i in 0..k {
                let t = cs[i] * hk[i] + sn[i] * hk[i + 1];
                hk[i + 1] = -sn[i] * hk[i] + cs[i] * hk[i + 1];
                hk[i] = t;
            }
            // New rotation to annihilate hk[k+1].
            let denom = (hk[k] * hk[k] + hk[k + 1] * hk[k + 1]).sqrt();
            let (c, s) = if denom == 0.0 {
                (1.0, 0.0)
            } else {
                (hk[k] / denom, hk[k + 1] / denom)
            };
            cs.push(c);
            sn.push(s);
            hk[k] = c * hk[k] + s * hk[k + 1];
            hk[k + 1] = 0.0;
            g[k + 1] = -s * g[k];
            g[k] *= c;

            h.push(hk);
            total_iters += 1;
            k_used = k + 1;
            let rel_k = g[k + 1].abs() / b_norm;
            history.push(rel_k);

            let happy = wn <= 1e-14 * b_norm;
            if rel_k <= opts.tol || total_iters >= opts.max_iters || happy {
                break;
            }
            for v in &mut w {
                *v /= wn;
            }
            basis.push(w);
        }

        // Back-substitution for the least-squares coefficients.
        let mut y = vec![0.0f64; k_used];
        for i in (0..k_used).rev() {
            let mut s = g[i];
            for j in (i + 1)..k_used {
                s -= h[j][i] * y[j];
            }
            y[i] = s / h[i][i];
        }
        for (j, yj) in y.iter().enumerate() {
            for (xi, vi) in x.iter_mut().zip(&basis[j]) {
                *xi += yj * vi;
            }
        }
    }
}
