//! Numerical R-transform built from a finite cumulant list.
//!
//! A finitely supported list gives a polynomial. A truncated list is first
//! tested for rational structure: if some low-degree Padé approximant fitted
//! to all but the last stored coefficient reproduces that last coefficient
//! exactly, the rational function is used; otherwise the truncated
//! polynomial is used. Free Poisson (`r/(1 - w)`) and compound Poisson laws
//! with finitely many jump sizes are recovered exactly this way, which keeps
//! the Cauchy solver meaningful where `|G| >= 1`.

use num_complex::Complex64;
use num_traits::{One, Zero};

use crate::cumulants::CumulantSequence;
use crate::rational::{self, Rational};

#[derive(Debug, Clone, PartialEq)]
pub struct RTransform {
    /// Numerator coefficients in increasing degree.
    numerator: Vec<f64>,
    /// Denominator coefficients in increasing degree, constant term 1.
    denominator: Vec<f64>,
}

impl RTransform {
    pub fn from_cumulants(r: &CumulantSequence) -> Self {
        let coeffs = r.values();
        if !r.is_finitely_supported() {
            if let Some((p, q)) = detect_rational(coeffs) {
                return RTransform {
                    numerator: p.iter().map(rational::to_f64).collect(),
                    denominator: q.iter().map(rational::to_f64).collect(),
                };
            }
        }
        Self::polynomial(r)
    }

    /// The plain truncated polynomial `sum_k r_k w^(k-1)`.
    pub fn polynomial(r: &CumulantSequence) -> Self {
        RTransform {
            numerator: r.to_f64(),
            denominator: vec![1.0],
        }
    }

    pub fn zero() -> Self {
        RTransform {
            numerator: vec![0.0],
            denominator: vec![1.0],
        }
    }

    pub fn is_rational(&self) -> bool {
        self.denominator.len() > 1
    }

    pub fn numerator(&self) -> &[f64] {
        &self.numerator
    }

    pub fn denominator(&self) -> &[f64] {
        &self.denominator
    }

    /// `(R(w), R'(w))`.
    pub fn eval_with_derivative(&self, w: Complex64) -> (Complex64, Complex64) {
        let (p, dp) = horner(&self.numerator, w);
        if self.denominator.len() == 1 {
            return (p, dp);
        }
        let (q, dq) = horner(&self.denominator, w);
        let value = p / q;
        (value, (dp * q - p * dq) / (q * q))
    }

    pub fn eval(&self, w: Complex64) -> Complex64 {
        self.eval_with_derivative(w).0
    }
}

fn horner(coeffs: &[f64], w: Complex64) -> (Complex64, Complex64) {
    let mut value = Complex64::zero();
    let mut deriv = Complex64::zero();
    for &c in coeffs.iter().rev() {
        deriv = deriv * w + value;
        value = value * w + c;
    }
    (value, deriv)
}

/// Looks for `p/q` with `deg q = m >= 1`, `deg p = K - 2 - m`, matching the
/// first `K - 1` coefficients and predicting the last one exactly.
pub(crate) fn detect_rational(c: &[Rational]) -> Option<(Vec<Rational>, Vec<Rational>)> {
    let k = c.len();
    if k < 3 {
        return None;
    }
    for m in 1..=(k - 2) {
        let l = k - 2 - m;
        let Some(q) = pade_denominator(c, l, m) else {
            continue;
        };
        // numerator = (q * c) truncated to degree l
        let p: Vec<Rational> = (0..=l)
            .map(|i| (0..=m.min(i)).map(|j| &q[j] * &c[i - j]).sum())
            .collect();
        if reproduces(&p, &q, c) {
            return Some((p, q));
        }
    }
    None
}

/// Solves `sum_{j=0..m} q_j c_{i-j} = 0` for `i = l+1..=l+m`, `q_0 = 1`.
fn pade_denominator(c: &[Rational], l: usize, m: usize) -> Option<Vec<Rational>> {
    let coeff = |i: isize| -> Rational {
        if i < 0 {
            Rational::zero()
        } else {
            c.get(i as usize).cloned().unwrap_or_else(Rational::zero)
        }
    };
    // rows i = l+1..=l+m, columns j = 1..=m
    let mut a: Vec<Vec<Rational>> = (0..m)
        .map(|row| {
            let i = (l + 1 + row) as isize;
            let mut line: Vec<Rational> = (1..=m).map(|j| coeff(i - j as isize)).collect();
            line.push(-coeff(i));
            line
        })
        .collect();
    for col in 0..m {
        let pivot = (col..m).find(|&r| !a[r][col].is_zero())?;
        a.swap(col, pivot);
        let p = a[col][col].clone();
        for entry in a[col].iter_mut() {
            *entry /= &p;
        }
        for row in 0..m {
            if row != col && !a[row][col].is_zero() {
                let factor = a[row][col].clone();
                let pivot_row = a[col].clone();
                for (entry, pv) in a[row].iter_mut().zip(pivot_row.iter()) {
                    *entry -= &factor * pv;
                }
            }
        }
    }
    let mut q = vec![Rational::one()];
    q.extend(a.into_iter().map(|row| row[m].clone()));
    Some(q)
}

/// Checks that the power series of `p/q` agrees with every stored coefficient.
fn reproduces(p: &[Rational], q: &[Rational], c: &[Rational]) -> bool {
    let mut series: Vec<Rational> = Vec::with_capacity(c.len());
    for i in 0..c.len() {
        let mut acc = p.get(i).cloned().unwrap_or_else(Rational::zero);
        for j in 1..q.len().min(i + 1) {
            acc -= &q[j] * &series[i - j];
        }
        series.push(acc);
    }
    series.as_slice() == c
}
