use super::{LinearOperator, SparseMatrix};
use crate::error::{Result, VwsError};

pub const DEFAULT_REL_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct CgReport {
    pub x: Vec<f64>,
    pub iterations: usize,
    /// Final `‖b - Ax‖ / ‖b‖` (recomputed from the returned iterate).
    pub residual: f64,
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Jacobi-preconditioned CG on a sparse SPD matrix, starting from zero.
pub fn cg_solve(a: &SparseMatrix, b: &[f64], rel_tol: f64, max_iter: usize) -> Result<CgReport> {
    let inv_diag: Vec<f64> = a.diagonal().iter().map(|d| 1.0 / d).collect();
    pcg(a, Some(&inv_diag), b, None, rel_tol, max_iter)
}

/// Preconditioned conjugate gradients.
///
/// `inv_diag` is the inverse of a diagonal preconditioner. Stops once the
/// recursive residual satisfies `‖r‖ ≤ rel_tol·‖b‖`. On failure the error
/// carries the iterate with the smallest residual seen.
pub fn pcg(
    op: &dyn LinearOperator,
    inv_diag: Option<&[f64]>,
    b: &[f64],
    x0: Option<&[f64]>,
    rel_tol: f64,
    max_iter: usize,
) -> Result<CgReport> {
    let n = op.dim();
    assert_eq!(b.len(), n);
    let bnorm = norm(b);
    let mut x = x0.map_or_else(|| vec![0.0; n], <[f64]>::to_vec);
    if bnorm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(CgReport {
            x,
            iterations: 0,
            residual: 0.0,
        });
    }

    let mut r = b.to_vec();
    let mut ax = vec![0.0; n];
    if x0.is_some() {
        op.apply(&x, &mut ax);
        r.iter_mut().zip(&ax).for_each(|(ri, a)| *ri -= a);
    }
    let precondition = |r: &[f64], z: &mut [f64]| match inv_diag {
        Some(d) => z.iter_mut().zip(r.iter().zip(d)).for_each(|(zi, (ri, di))| *zi = ri * di),
        None => z.copy_from_slice(r),
    };

    let tol = rel_tol * bnorm;
    let mut rnorm = norm(&r);
    if rnorm <= tol {
        return Ok(CgReport {
            x,
            iterations: 0,
            residual: rnorm / bnorm,
        });
    }

    let mut z = vec![0.0; n];
    precondition(&r, &mut z);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut q = vec![0.0; n];
    let mut best = (rnorm, x.clone());

    for it in 1..=max_iter {
        op.apply(&p, &mut q);
        let pq = dot(&p, &q);
        if pq <= 0.0 || !pq.is_finite() {
            break;
        }
        let alpha = rz / pq;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * q[i];
        }
        rnorm = norm(&r);
        if rnorm < best.0 {
            best = (rnorm, x.clone());
        }
        if rnorm <= tol {
            op.apply(&x, &mut ax);
            let true_res = b.iter().zip(&ax).map(|(bi, a)| (bi - a).powi(2)).sum::<f64>().sqrt();
            return Ok(CgReport {
                x,
                iterations: it,
                residual: true_res / bnorm,
            });
        }
        precondition(&r, &mut z);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }

    Err(VwsError::NonConvergence {
        iterations: max_iter,
        residual: best.0 / bnorm,
        best: Some(best.1),
        context: None,
    })
}
