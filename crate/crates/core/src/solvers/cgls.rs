//! Conjugate gradients on the normal equations, matrix-free.

use crate::error::{Error, Result};
use crate::linalg::{axpy_unchecked, norm, norm_sq, DenseMatrix};

#[derive(Debug, Clone)]
pub struct CglsSolution {
    pub x: Vec<f64>,
    pub iterations: usize,
    /// ‖Aᵀ(Ax − b)‖ / ‖Aᵀb‖ recomputed from the returned iterate.
    pub relative_residual: f64,
}

/// Least-squares solution of `A x ≈ b` to `‖Aᵀ(Ax−b)‖/‖Aᵀb‖ < tol`.
pub fn cgls_solve(a: &DenseMatrix, b: &[f64], tol: f64, max_it: usize) -> Result<Vec<f64>> {
    cgls(a, b, tol, max_it).map(|s| s.x)
}

pub fn cgls(a: &DenseMatrix, b: &[f64], tol: f64, max_it: usize) -> Result<CglsSolution> {
    if b.len() != a.rows() {
        return Err(Error::Dimension {
            context: "cgls rhs",
            expected: a.rows(),
            found: b.len(),
        });
    }
    let n = a.cols();
    let atb_norm = norm(&a.tr_mul_vec(b)?);
    let mut x = vec![0.0; n];
    if atb_norm == 0.0 {
        return Ok(CglsSolution {
            x,
            iterations: 0,
            relative_residual: 0.0,
        });
    }

    let mut r = b.to_vec();
    let mut s = a.tr_mul_vec(&r)?;
    let mut p = s.clone();
    let mut gamma = norm_sq(&s);
    let mut best = (f64::INFINITY, x.clone());

    let mut k = 0;
    while k < max_it {
        let q = a.mul_vec(&p)?;
        let delta = norm_sq(&q);
        if delta == 0.0 {
            break;
        }
        let step = gamma / delta;
        axpy_unchecked(&mut x, step, &p);
        axpy_unchecked(&mut r, -step, &q);
        s = a.tr_mul_vec(&r)?;
        let gamma_next = norm_sq(&s);
        k += 1;

        if gamma_next.sqrt() / atb_norm < tol {
            // The recurred residual drifts; confirm against the true one and
            // restart from the current iterate if it disagrees.
            let true_rel = normal_residual(a, b, &x)? / atb_norm;
            if true_rel < tol {
                return Ok(CglsSolution {
                    x,
                    iterations: k,
                    relative_residual: true_rel,
                });
            }
            if true_rel < best.0 {
                best = (true_rel, x.clone());
            }
            r = residual(a, b, &x)?;
            s = a.tr_mul_vec(&r)?;
            p = s.clone();
            gamma = norm_sq(&s);
            continue;
        }

        let beta = gamma_next / gamma;
        for (pi, si) in p.iter_mut().zip(&s) {
            *pi = si + beta * *pi;
        }
        gamma = gamma_next;
    }

    let rel = normal_residual(a, b, &x)? / atb_norm;
    if rel < tol {
        return Ok(CglsSolution {
            x,
            iterations: k,
            relative_residual: rel,
        });
    }
    if rel < best.0 {
        best = (rel, x);
    }
    Err(Error::CglsNotConverged {
        iterations: k,
        residual: best.0,
        best: best.1,
    })
}

fn residual(a: &DenseMatrix, b: &[f64], x: &[f64]) -> Result<Vec<f64>> {
    let mut r = a.mul_vec(x)?;
    for (ri, bi) in r.iter_mut().zip(b) {
        *ri = bi - *ri;
    }
    Ok(r)
}

/// ‖Aᵀ(Ax − b)‖
pub fn normal_residual(a: &DenseMatrix, b: &[f64], x: &[f64]) -> Result<f64> {
    Ok(norm(&a.tr_mul_vec(&residual(a, b, x)?)?))
}

/// CG for `(AᵀA) y = rhs` without forming `AᵀA`. Returns `None` if the
/// relative residual did not drop below `tol` within `max_it` steps.
pub(crate) fn solve_normal_equations(
    a: &DenseMatrix,
    rhs: &[f64],
    tol: f64,
    max_it: usize,
) -> Option<Vec<f64>> {
    let n = a.cols();
    let rhs_norm = norm(rhs);
    let mut y = vec![0.0; n];
    if rhs_norm == 0.0 {
        return Some(y);
    }
    let mut r = rhs.to_vec();
    let mut p = r.clone();
    let mut rr = norm_sq(&r);
    for _ in 0..max_it {
        let ap = a.mul_vec(&p).ok()?;
        let w = a.tr_mul_vec(&ap).ok()?;
        let pw = norm_sq(&ap);
        if pw <= 0.0 {
            return None;
        }
        let step = rr / pw;
        axpy_unchecked(&mut y, step, &p);
        axpy_unchecked(&mut r, -step, &w);
        let rr_next = norm_sq(&r);
        if rr_next.sqrt() / rhs_norm < tol {
            return Some(y);
        }
        let beta = rr_next / rr;
        for (pi, ri) in p.iter_mut().zip(&r) {
            *pi = ri + beta * *pi;
        }
        rr = rr_next;
    }
    None
}
