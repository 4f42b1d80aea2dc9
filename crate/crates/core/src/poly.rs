//! Scalar polynomial machinery: Chebyshev recurrences, Horner's scheme and
//! Clenshaw summation for the second-kind Chebyshev basis.
//!
//! Coefficient index `k` always multiplies the degree-`k` basis element.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Basis {
    Monomial,
    ChebyshevU,
    ChebyshevT,
}

impl Basis {
    pub fn name(self) -> &'static str {
        match self {
            Self::Monomial => "monomial",
            Self::ChebyshevU => "chebyshev-U",
            Self::ChebyshevT => "chebyshev-T",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "monomial" => Some(Self::Monomial),
            "chebyshev-u" | "u" => Some(Self::ChebyshevU),
            "chebyshev-t" | "t" => Some(Self::ChebyshevT),
            _ => None,
        }
    }
}

/// Polynomial coefficients `a_0..a_K` tagged with their basis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoeffVector {
    coeffs: Vec<f64>,
    basis: Basis,
}

impl CoeffVector {
    pub fn new(coeffs: Vec<f64>, basis: Basis) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::InvalidConfig("coefficient vector must be non-empty".into()));
        }
        if let Some(&bad) = coeffs.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig(format!("non-finite coefficient {bad}")));
        }
        Ok(Self { coeffs, basis })
    }

    pub fn monomial(coeffs: Vec<f64>) -> Result<Self> {
        Self::new(coeffs, Basis::Monomial)
    }

    pub fn chebyshev_u(coeffs: Vec<f64>) -> Result<Self> {
        Self::new(coeffs, Basis::ChebyshevU)
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn basis(&self) -> Basis {
        self.basis
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Same coefficients in reverse order, same basis.
    pub fn reversed(&self) -> Self {
        Self { coeffs: self.coeffs.iter().rev().copied().collect(), basis: self.basis }
    }

    fn expect(&self, basis: Basis) -> Result<()> {
        if self.basis != basis {
            return Err(Error::WrongBasis { expected: basis.name(), got: self.basis.name() });
        }
        Ok(())
    }

    /// Evaluates in whichever basis the vector is tagged with.
    pub fn eval(&self, x: f64) -> f64 {
        match self.basis {
            Basis::Monomial => horner(&self.coeffs, x),
            Basis::ChebyshevU => clenshaw_u(&self.coeffs, x),
            Basis::ChebyshevT => clenshaw_t(&self.coeffs, x),
        }
    }
}

/// `U_k(x)` by the three-term recurrence, with `U_{-1} = 0`.
pub fn cheb_u(k: i64, x: f64) -> f64 {
    assert!(k >= -1, "U_k is only defined here for k >= -1");
    if k == -1 {
        return 0.0;
    }
    let (mut prev, mut cur) = (0.0, 1.0);
    for _ in 0..k {
        let next = 2.0 * x * cur - prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// `T_k(x)` by the three-term recurrence.
pub fn cheb_t(k: u32, x: f64) -> f64 {
    if k == 0 {
        return 1.0;
    }
    let (mut prev, mut cur) = (1.0, x);
    for _ in 1..k {
        let next = 2.0 * x * cur - prev;
        prev = cur;
        cur = next;
    }
    cur
}

fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

// Compensated Horner: the rounding error of every step is carried in a
// second Horner pass, so the result is as accurate as plain Horner in
// doubled precision. High-degree coefficients converted from the U basis are
// large with alternating signs and need this.
fn horner(coeffs: &[f64], x: f64) -> f64 {
    let mut b = 0.0;
    let mut e = 0.0;
    for &a in coeffs.iter().rev() {
        let (p, ep) = two_prod(b, x);
        let (s, es) = two_sum(p, a);
        b = s;
        e = e * x + (ep + es);
    }
    b + e
}

/// `Σ a_i x^i` by Horner's backward recursion.
pub fn horner_eval(c: &CoeffVector, x: f64) -> Result<f64> {
    c.expect(Basis::Monomial)?;
    Ok(horner(c.coeffs(), x))
}

/// Scratch registers of the backward Clenshaw recurrence
/// `b_k = a_k + 2x·b_{k+1} − b_{k+2}`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ClenshawState {
    pub b_next2: f64,
    pub b_next1: f64,
    pub b_cur: f64,
}

impl ClenshawState {
    pub fn new() -> Self {
        Self::default()
    }

    /// Consumes coefficient `a_k` and returns `b_k`.
    #[inline]
    pub fn step(&mut self, a: f64, x: f64) -> f64 {
        self.b_cur = a + 2.0 * x * self.b_next1 - self.b_next2;
        self.b_next2 = self.b_next1;
        self.b_next1 = self.b_cur;
        self.b_cur
    }
}

fn clenshaw_u(coeffs: &[f64], x: f64) -> f64 {
    let mut state = ClenshawState::new();
    for &a in coeffs.iter().rev() {
        state.step(a, x);
    }
    state.b_cur
}

fn clenshaw_t(coeffs: &[f64], x: f64) -> f64 {
    // same recurrence, then the first-kind correction S = b_0 − x·b_1
    let mut state = ClenshawState::new();
    for &a in coeffs.iter().rev() {
        state.step(a, x);
    }
    state.b_cur - x * state.b_next2
}

/// `Σ a_k U_k(x)` by Clenshaw summation; the result is `b_0`.
pub fn clenshaw_sum_u(c: &CoeffVector, x: f64) -> Result<f64> {
    c.expect(Basis::ChebyshevU)?;
    Ok(clenshaw_u(c.coeffs(), x))
}

/// `Σ a_k U_k(x)` term by term, each basis value from [`cheb_u`].
pub fn direct_sum_u(c: &CoeffVector, x: f64) -> Result<f64> {
    c.expect(Basis::ChebyshevU)?;
    Ok(c.coeffs().iter().enumerate().map(|(k, &a)| a * cheb_u(k as i64, x)).sum())
}

/// The full Clenshaw sequence `[b_{-1}, b_0, …, b_n]`.
///
/// `b_{-1}` continues the recurrence one step with a zero coefficient, which
/// is what makes `b⃗ᵀA = (0, a_0, …, a_n)` hold in the leading entry.
pub fn clenshaw_sequence(c: &CoeffVector, x: f64) -> Result<Vec<f64>> {
    c.expect(Basis::ChebyshevU)?;
    let n = c.len();
    let mut b = vec![0.0; n + 1];
    let mut state = ClenshawState::new();
    for k in (0..n).rev() {
        b[k + 1] = state.step(c.coeffs()[k], x);
    }
    b[0] = state.step(0.0, x);
    Ok(b)
}

/// Banded lower-triangular matrix `A ∈ ℝ^{(n+2)×(n+2)}` (rows/cols indexed
/// from −1) with unit diagonal, `−2x` on the first subdiagonal and `1` on the
/// second, for which `A·(U_{-1}, U_0, …, U_n)ᵀ = 1_0`.
pub fn elimination_matrix(degree: usize, x: f64) -> Matrix {
    let size = degree + 2;
    let mut a = Matrix::zeros(size, size);
    for i in 0..size {
        a.set(i, i, 1.0);
        if i >= 1 {
            a.set(i, i - 1, -2.0 * x);
        }
        if i >= 2 {
            a.set(i, i - 2, 1.0);
        }
    }
    a
}

/// Converts second-kind Chebyshev coefficients to monomial coefficients.
pub fn u_basis_to_monomial(c: &CoeffVector) -> Result<CoeffVector> {
    c.expect(Basis::ChebyshevU)?;
    let n = c.len();
    let mut out = vec![0.0; n];
    let mut comp = vec![0.0; n];
    // monomial coefficients of U_{k-1} and U_k; integers, exact in f64
    // well past any degree used here
    let mut prev = vec![0.0; n];
    let mut cur = vec![0.0; n];
    cur[0] = 1.0;
    for (k, &a) in c.coeffs().iter().enumerate() {
        if k > 0 {
            let mut next = vec![0.0; n];
            for i in 0..k {
                next[i + 1] += 2.0 * cur[i];
            }
            for (nx, &p) in next.iter_mut().zip(&prev) {
                *nx -= p;
            }
            prev = std::mem::replace(&mut cur, next);
        }
        for ((o, err), &u) in out.iter_mut().zip(&mut comp).zip(&cur) {
            let (p, ep) = two_prod(a, u);
            let (s, es) = two_sum(*o, p);
            *o = s;
            *err += ep + es;
        }
    }
    for (o, e) in out.iter_mut().zip(comp) {
        *o += e;
    }
    CoeffVector::monomial(out)
}

/// Product of two monomial-basis polynomials.
pub fn monomial_product(a: &CoeffVector, b: &CoeffVector) -> Result<CoeffVector> {
    a.expect(Basis::Monomial)?;
    b.expect(Basis::Monomial)?;
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, &x) in a.coeffs().iter().enumerate() {
        for (j, &y) in b.coeffs().iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    CoeffVector::monomial(out)
}
