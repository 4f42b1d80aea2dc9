//! Dense symmetric eigendecomposition (cyclic Jacobi) and exact spectral
//! filtering `U·diag(h(μ))·Uᵀ·x`.
//!
//! This is the reference the recurrence-based propagation rules are checked
//! against, so it shares no code path with them beyond scalar polynomial
//! evaluation.

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::poly::{clenshaw_sum_u, horner_eval, Basis, CoeffVector};

pub const DEFAULT_DENSE_LIMIT: usize = 2048;
const SYMMETRY_TOL: f64 = 1e-10;
const MAX_SWEEPS: usize = 100;
const OFF_DIAGONAL_REL_TOL: f64 = 1e-12;

/// `M = U·diag(μ)·Uᵀ` with `μ` ascending and `λ = 1 − μ`.
#[derive(Debug, Clone)]
pub struct EigenDecomposition {
    /// Orthonormal eigenvectors as columns.
    pub vectors: Matrix,
    pub mu: Vec<f64>,
    pub lambda: Vec<f64>,
    pub sweeps: usize,
}

impl EigenDecomposition {
    pub fn size(&self) -> usize {
        self.mu.len()
    }

    /// `U·diag(values)·Uᵀ`
    pub fn reconstruct_with(&self, values: &[f64]) -> Matrix {
        let n = self.size();
        let mut scaled = self.vectors.clone();
        for r in 0..n {
            for (v, &s) in scaled.row_mut(r).iter_mut().zip(values) {
                *v *= s;
            }
        }
        scaled.matmul_t(&self.vectors)
    }

    pub fn reconstruct(&self) -> Matrix {
        self.reconstruct_with(&self.mu)
    }
}

pub fn eig_sym(m: &Matrix) -> Result<EigenDecomposition> {
    eig_sym_with_limit(m, DEFAULT_DENSE_LIMIT)
}

/// Cyclic Jacobi eigendecomposition of a symmetric matrix.
///
/// Sweeps visit `(p, q)` pairs in row-major order and stop once the
/// off-diagonal Frobenius norm falls below `1e-12·‖m‖_F` (at most 100 sweeps).
pub fn eig_sym_with_limit(m: &Matrix, dense_limit: usize) -> Result<EigenDecomposition> {
    let n = m.rows();
    if m.cols() != n {
        return Err(Error::DimensionMismatch(format!("eig_sym of {}x{} matrix", n, m.cols())));
    }
    if n > dense_limit {
        return Err(Error::OverDenseLimit { n, limit: dense_limit });
    }
    let asym = m.max_abs_diff(&m.transpose());
    if asym > SYMMETRY_TOL {
        return Err(Error::Asymmetric(asym));
    }

    let mut a = m.clone();
    let mut v = Matrix::identity(n);
    let tol = OFF_DIAGONAL_REL_TOL * m.frobenius_norm();
    let mut sweeps = 0;
    while sweeps < MAX_SWEEPS && off_diagonal_norm(&a) > tol {
        sweeps += 1;
        for p in 0..n {
            for q in p + 1..n {
                let apq = a.get(p, q);
                if apq == 0.0 {
                    continue;
                }
                let theta = (a.get(q, q) - a.get(p, p)) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                rotate(&mut a, &mut v, p, q, c, s);
            }
        }
    }

    let diag: Vec<f64> = (0..n).map(|i| a.get(i, i)).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| diag[i].total_cmp(&diag[j]));
    let mu: Vec<f64> = order.iter().map(|&i| diag[i]).collect();
    let mut vectors = Matrix::zeros(n, n);
    for r in 0..n {
        for (new_c, &old_c) in order.iter().enumerate() {
            vectors.set(r, new_c, v.get(r, old_c));
        }
    }
    let lambda = mu.iter().map(|m| 1.0 - m).collect();
    Ok(EigenDecomposition { vectors, mu, lambda, sweeps })
}

fn off_diagonal_norm(a: &Matrix) -> f64 {
    let n = a.rows();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                s += a.get(i, j) * a.get(i, j);
            }
        }
    }
    s.sqrt()
}

/// `A ← JᵀAJ`, `V ← VJ` for the plane rotation zeroing `a_pq`.
fn rotate(a: &mut Matrix, v: &mut Matrix, p: usize, q: usize, c: f64, s: f64) {
    let n = a.rows();
    for k in 0..n {
        let (akp, akq) = (a.get(k, p), a.get(k, q));
        a.set(k, p, c * akp - s * akq);
        a.set(k, q, s * akp + c * akq);
    }
    for k in 0..n {
        let (apk, aqk) = (a.get(p, k), a.get(q, k));
        a.set(p, k, c * apk - s * aqk);
        a.set(q, k, s * apk + c * aqk);
    }
    a.set(p, q, 0.0);
    a.set(q, p, 0.0);
    for k in 0..n {
        let (vkp, vkq) = (v.get(k, p), v.get(k, q));
        v.set(k, p, c * vkp - s * vkq);
        v.set(k, q, s * vkp + c * vkq);
    }
}

/// Filter response `h(μ_i)` per eigenvalue, for the bases the oracle accepts.
pub fn eigen_responses(d: &EigenDecomposition, c: &CoeffVector) -> Result<Vec<f64>> {
    match c.basis() {
        Basis::Monomial => d.mu.iter().map(|&m| horner_eval(c, m)).collect(),
        Basis::ChebyshevU => d.mu.iter().map(|&m| clenshaw_sum_u(c, m)).collect(),
        other => Err(Error::WrongBasis { expected: "monomial or chebyshev-U", got: other.name() }),
    }
}

/// Exact polynomial filter `U·diag(h(μ))·Uᵀ·x`.
pub fn apply_filter_exact(d: &EigenDecomposition, c: &CoeffVector, x: &Matrix) -> Result<Matrix> {
    let n = d.size();
    if x.rows() != n {
        return Err(Error::DimensionMismatch(format!(
            "filter on {n} nodes applied to {}x{} signal",
            x.rows(),
            x.cols()
        )));
    }
    let h = eigen_responses(d, c)?;
    let mut spectral = d.vectors.t_matmul(x);
    for (i, &hi) in h.iter().enumerate() {
        for v in spectral.row_mut(i) {
            *v *= hi;
        }
    }
    Ok(d.vectors.matmul_unchecked(&spectral))
}

/// Pointwise `(μ, h(μ))` in the coefficient vector's own basis.
pub fn filter_response(c: &CoeffVector, grid: &[f64]) -> Vec<(f64, f64)> {
    grid.iter().map(|&m| (m, c.eval(m))).collect()
}

/// `n` evenly spaced points covering `[−1, 1]` (a single point is `1`).
pub fn uniform_grid(n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![1.0],
        _ => (0..n).map(|i| -1.0 + 2.0 * i as f64 / (n - 1) as f64).collect(),
    }
}
