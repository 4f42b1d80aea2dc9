//! Linearized propagation rules (identity activation, identity transforms)
//! and the polynomial filters they realize.
//!
//! With `H^(−2) = H^(−1) = 0`:
//!
//! ```text
//! Horner:   H^(ℓ) = P̃H^(ℓ−1) + α_ℓH*              ⇒ H^(K) = Σ_ℓ α_{K−ℓ} P̃^ℓ H*
//! Clenshaw: H^(ℓ) = 2P̃H^(ℓ−1) − H^(ℓ−2) + α_ℓH*  ⇒ H^(K) = Σ_ℓ α_{K−ℓ} U_ℓ(P̃) H*
//! GCNII:    H^(ℓ) = (1−α)P̃H^(ℓ−1) + αH*,  H^(0) = H*
//! ```
//!
//! `alphas` are always in layer order (`α_0` feeds layer 0). The filter
//! coefficient of basis degree `ℓ` is `α_{K−ℓ}`, see [`layer_to_basis_order`].

use crate::error::{Error, Result};
use crate::graph::{OperatorKind, PropagationOperator};
use crate::matrix::Matrix;
use crate::poly::{Basis, CoeffVector};

/// Every intermediate state of a linear propagation, including the two
/// zero back-states.
#[derive(Debug, Clone)]
pub struct LinearPropagationTrace {
    /// `H^(−2), H^(−1), H^(0), …, H^(K)`
    pub states: Vec<Matrix>,
    pub alphas: Vec<f64>,
}

impl LinearPropagationTrace {
    pub fn order(&self) -> usize {
        self.states.len() - 3
    }

    /// `H^(ℓ)` for `ℓ ≥ −2`.
    pub fn state(&self, layer: isize) -> &Matrix {
        &self.states[(layer + 2) as usize]
    }

    pub fn output(&self) -> &Matrix {
        self.states.last().expect("trace always holds back-states")
    }
}

fn check_inputs(p: &PropagationOperator, h_star: &Matrix, alphas: &[f64], order: usize) -> Result<()> {
    if p.kind() != OperatorKind::NormalizedAdjacency {
        return Err(Error::WrongOperatorKind { expected: "normalized-adjacency", got: "laplacian" });
    }
    if h_star.rows() != p.size() {
        return Err(Error::DimensionMismatch(format!(
            "operator on {} nodes, signal has {} rows",
            p.size(),
            h_star.rows()
        )));
    }
    if alphas.len() != order + 1 {
        return Err(Error::LengthMismatch { expected: order + 1, got: alphas.len() });
    }
    Ok(())
}

fn run(
    p: &PropagationOperator,
    h_star: &Matrix,
    alphas: &[f64],
    order: usize,
    step: impl Fn(&PropagationOperator, &Matrix, &Matrix) -> Matrix,
) -> Result<LinearPropagationTrace> {
    check_inputs(p, h_star, alphas, order)?;
    let zero = Matrix::zeros(h_star.rows(), h_star.cols());
    let mut states = Vec::with_capacity(order + 3);
    states.push(zero.clone());
    states.push(zero);
    for &alpha in alphas {
        let len = states.len();
        let mut next = step(p, &states[len - 1], &states[len - 2]);
        next.axpy(alpha, h_star);
        states.push(next);
    }
    Ok(LinearPropagationTrace { states, alphas: alphas.to_vec() })
}

/// `H^(ℓ) = P̃H^(ℓ−1) + α_ℓH*` for `ℓ = 0..=order`.
pub fn horner_propagate_linear(
    p: &PropagationOperator,
    h_star: &Matrix,
    alphas: &[f64],
    order: usize,
) -> Result<LinearPropagationTrace> {
    run(p, h_star, alphas, order, |p, prev, _| p.spmm_unchecked(prev))
}

/// `H^(ℓ) = 2P̃H^(ℓ−1) − H^(ℓ−2) + α_ℓH*` for `ℓ = 0..=order`.
pub fn clenshaw_propagate_linear(
    p: &PropagationOperator,
    h_star: &Matrix,
    alphas: &[f64],
    order: usize,
) -> Result<LinearPropagationTrace> {
    run(p, h_star, alphas, order, |p, prev, prev2| {
        let mut next = p.spmm_unchecked(prev).scale(2.0);
        next.axpy(-1.0, prev2);
        next
    })
}

/// Horner layer plus a first-order difference residue `P̃H^(ℓ−1) − H^(ℓ−1)`.
///
/// This is `(2P̃ − I)H^(ℓ−1) + α_ℓH*`, Horner's scheme in the shifted
/// operator, so it only realizes `Σ α_{K−ℓ}(2P̃−I)^ℓ H*`.
pub fn delta_propagate_linear(
    p: &PropagationOperator,
    h_star: &Matrix,
    alphas: &[f64],
    order: usize,
) -> Result<LinearPropagationTrace> {
    run(p, h_star, alphas, order, |p, prev, _| {
        let ph = p.spmm_unchecked(prev);
        let mut delta = ph.clone();
        delta.axpy(-1.0, prev);
        delta.axpy(1.0, &ph);
        delta
    })
}

fn check_unit_interval(name: &'static str, alpha: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::OutOfRange { name, value: alpha, range: "[0, 1]" });
    }
    Ok(())
}

/// GCNII's simplified iteration `H^(ℓ) = (1−α)P̃H^(ℓ−1) + αH*` from
/// `H^(0) = H*`, returning `H^(K)`.
pub fn gcnii_propagate_linear(p: &PropagationOperator, h_star: &Matrix, alpha: f64, order: usize) -> Result<Matrix> {
    check_unit_interval("alpha", alpha)?;
    check_inputs(p, h_star, &vec![0.0; order + 1], order)?;
    let mut h = h_star.clone();
    for _ in 0..order {
        let mut next = p.spmm_unchecked(&h).scale(1.0 - alpha);
        next.axpy(alpha, h_star);
        h = next;
    }
    Ok(h)
}

/// Monomial weights of the unfolded GCNII iteration:
/// `α(1−α)^ℓ` for `ℓ < K` and `(1−α)^K` for `ℓ = K`.
pub fn gcnii_unfolded_coefficients(alpha: f64, order: usize) -> Result<CoeffVector> {
    check_unit_interval("alpha", alpha)?;
    let coeffs = (0..=order)
        .map(|l| if l < order { alpha * (1.0 - alpha).powi(l as i32) } else { (1.0 - alpha).powi(order as i32) })
        .collect();
    CoeffVector::monomial(coeffs)
}

/// Fixed layer-order residues `α̂_ℓ = α(1−α)^{K−ℓ}` for `ℓ ≥ 1` and
/// `α̂_0 = (1−α)^K`; they sum to one.
pub fn fixed_param_coefficients(alpha: f64, order: usize) -> Result<Vec<f64>> {
    check_unit_interval("fixed_alpha", alpha)?;
    Ok((0..=order)
        .map(|l| if l == 0 { (1.0 - alpha).powi(order as i32) } else { alpha * (1.0 - alpha).powi((order - l) as i32) })
        .collect())
}

/// Reverses layer-order residues into basis-degree order: `c_ℓ = α_{K−ℓ}`.
pub fn layer_to_basis_order(alphas: &[f64], basis: Basis) -> Result<CoeffVector> {
    CoeffVector::new(alphas.iter().rev().copied().collect(), basis)
}

/// Filter of each intermediate Clenshaw layer, built from
/// `h^(ℓ)(μ) = α_ℓ + 2μ·h^(ℓ−1)(μ) − h^(ℓ−2)(μ)` on monomial coefficients.
pub fn clenshaw_layer_filters(alphas: &[f64]) -> Result<Vec<CoeffVector>> {
    let len = alphas.len();
    let mut prev2 = vec![0.0; len];
    let mut prev1 = vec![0.0; len];
    let mut out = Vec::with_capacity(len);
    for (l, &alpha) in alphas.iter().enumerate() {
        let mut cur = vec![0.0; len];
        cur[0] = alpha;
        for i in 0..l {
            cur[i + 1] += 2.0 * prev1[i];
        }
        for (c, p) in cur.iter_mut().zip(&prev2) {
            *c -= p;
        }
        out.push(CoeffVector::monomial(cur[..=l].to_vec())?);
        prev2 = std::mem::replace(&mut prev1, cur);
    }
    Ok(out)
}
