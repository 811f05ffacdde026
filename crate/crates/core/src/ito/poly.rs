//! Polynomials, tensor polynomials and the free difference quotients `d^k`.

use std::collections::btree_map::Entry;
use std::collections::BTreeMap;
use std::fmt;

use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::rational::{self, Rational};

/// `sum_n c_n x^n` with rational coefficients.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Polynomial {
    coeffs: Vec<Rational>,
}

impl Polynomial {
    pub fn new(coeffs: Vec<Rational>) -> Self {
        let mut p = Polynomial { coeffs };
        while p.coeffs.last().is_some_and(Zero::is_zero) {
            p.coeffs.pop();
        }
        p
    }

    pub fn monomial(n: usize) -> Self {
        let mut coeffs = vec![Rational::zero(); n + 1];
        coeffs[n] = Rational::one();
        Polynomial { coeffs }
    }

    pub fn one() -> Self {
        Self::monomial(0)
    }

    /// Comma-separated coefficients from the constant term up, e.g. `"0,0,1"` for `x^2`.
    pub fn parse(text: &str) -> Result<Self> {
        let coeffs = text
            .split(',')
            .map(rational::parse)
            .collect::<Result<Vec<_>>>()?;
        if coeffs.is_empty() {
            return Err(Error::parse("empty polynomial"));
        }
        Ok(Self::new(coeffs))
    }

    pub fn coeffs(&self) -> &[Rational] {
        &self.coeffs
    }

    pub fn coeff(&self, n: usize) -> Rational {
        self.coeffs.get(n).cloned().unwrap_or_else(Rational::zero)
    }

    /// Degree, with `None` for the zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    pub fn times_x(&self) -> Self {
        let mut coeffs = vec![Rational::zero()];
        coeffs.extend(self.coeffs.iter().cloned());
        Self::new(coeffs)
    }

    pub fn add(&self, other: &Self) -> Self {
        let len = self.coeffs.len().max(other.coeffs.len());
        Self::new((0..len).map(|i| self.coeff(i) + other.coeff(i)).collect())
    }

    pub fn scale(&self, c: &Rational) -> Self {
        Self::new(self.coeffs.iter().map(|a| a * c).collect())
    }
}

impl fmt::Display for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let terms: Vec<String> = self
            .coeffs
            .iter()
            .enumerate()
            .filter(|(_, c)| !c.is_zero())
            .map(|(n, c)| format!("({})x^{n}", rational::format(c)))
            .collect();
        if terms.is_empty() {
            write!(f, "0")
        } else {
            write!(f, "{}", terms.join(" + "))
        }
    }
}

/// Linear combination of words `x^(i_0) (x) ... (x) x^(i_k)` of one arity.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TensorPolynomial {
    arity: usize,
    terms: BTreeMap<Vec<usize>, Rational>,
}

impl TensorPolynomial {
    pub fn zero(arity: usize) -> Self {
        TensorPolynomial {
            arity,
            terms: BTreeMap::new(),
        }
    }

    pub fn from_polynomial(p: &Polynomial) -> Self {
        let mut t = Self::zero(1);
        for (n, c) in p.coeffs.iter().enumerate() {
            t.add_term(vec![n], c.clone());
        }
        t
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&[usize], &Rational)> {
        self.terms.iter().map(|(w, c)| (w.as_slice(), c))
    }

    pub fn coeff(&self, word: &[usize]) -> Rational {
        self.terms.get(word).cloned().unwrap_or_else(Rational::zero)
    }

    pub fn add_term(&mut self, word: Vec<usize>, c: Rational) {
        assert_eq!(word.len(), self.arity, "word arity mismatch");
        if c.is_zero() {
            return;
        }
        match self.terms.entry(word) {
            Entry::Vacant(slot) => {
                slot.insert(c);
            }
            Entry::Occupied(mut slot) => {
                *slot.get_mut() += c;
                if slot.get().is_zero() {
                    slot.remove();
                }
            }
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.arity, other.arity, "arity mismatch");
        let mut out = self.clone();
        for (w, c) in &other.terms {
            out.add_term(w.clone(), c.clone());
        }
        out
    }

    pub fn scale(&self, c: &Rational) -> Self {
        let mut out = Self::zero(self.arity);
        for (w, v) in &self.terms {
            out.add_term(w.clone(), v * c);
        }
        out
    }

    /// `(1 (x) ... (x) x) * self`: multiply the last factor by `x`.
    pub fn times_x_last(&self) -> Self {
        let mut out = Self::zero(self.arity);
        for (w, c) in &self.terms {
            let mut w = w.clone();
            *w.last_mut().expect("arity >= 1") += 1;
            out.add_term(w, c.clone());
        }
        out
    }

    /// `self (x) 1`.
    pub fn tensor_one(&self) -> Self {
        let mut out = Self::zero(self.arity + 1);
        for (w, c) in &self.terms {
            let mut w = w.clone();
            w.push(0);
            out.add_term(w, c.clone());
        }
        out
    }

    /// `(1 (x) ... (x) 1 (x) d)` applied to the last factor, with
    /// `d x^j = sum_{a+b=j-1} x^a (x) x^b`.
    pub fn derive_last(&self) -> Self {
        let mut out = Self::zero(self.arity + 1);
        for (w, c) in &self.terms {
            let j = *w.last().expect("arity >= 1");
            for a in 0..j {
                let mut word = w[..w.len() - 1].to_vec();
                word.push(a);
                word.push(j - 1 - a);
                out.add_term(word, c.clone());
            }
        }
        out
    }
}

impl fmt::Display for TensorPolynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let parts: Vec<String> = self
            .terms
            .iter()
            .map(|(w, c)| {
                let word: Vec<String> = w.iter().map(|e| format!("x^{e}")).collect();
                format!("({}){}", rational::format(c), word.join("(x)"))
            })
            .collect();
        write!(f, "{}", parts.join(" + "))
    }
}

/// Calls `visit` with every composition of `total` into `parts` nonnegative parts.
pub fn for_each_composition(total: usize, parts: usize, mut visit: impl FnMut(&[usize])) {
    fn walk(rest: usize, slots: usize, prefix: &mut Vec<usize>, visit: &mut dyn FnMut(&[usize])) {
        if slots == 1 {
            prefix.push(rest);
            visit(prefix);
            prefix.pop();
            return;
        }
        for first in 0..=rest {
            prefix.push(first);
            walk(rest - first, slots - 1, prefix, visit);
            prefix.pop();
        }
    }
    if parts == 0 {
        if total == 0 {
            visit(&[]);
        }
        return;
    }
    walk(total, parts, &mut Vec::with_capacity(parts), &mut visit);
}

fn factorial(k: usize) -> Rational {
    (1..=k as i64)
        .map(rational::int)
        .fold(Rational::one(), |a, b| a * b)
}

/// `d^k p = k! sum_n c_n sum_{i_0+..+i_k = n-k} x^(i_0) (x) ... (x) x^(i_k)`.
pub fn partial_k(p: &Polynomial, k: usize) -> TensorPolynomial {
    let mut out = TensorPolynomial::zero(k + 1);
    let kf = factorial(k);
    for (n, c) in p.coeffs.iter().enumerate() {
        if n < k || c.is_zero() {
            continue;
        }
        let coeff = c * &kf;
        for_each_composition(n - k, k + 1, |word| {
            out.add_term(word.to_vec(), coeff.clone())
        });
    }
    out
}

/// `d^k` by iteration: `d^k = k (1 (x) ... (x) d) d^(k-1)`, `d^0 p = p`.
pub fn partial_k_iterated(p: &Polynomial, k: usize) -> TensorPolynomial {
    let mut t = TensorPolynomial::from_polynomial(p);
    for j in 1..=k {
        t = t.derive_last().scale(&rational::int(j as i64));
    }
    t
}

/// `d^k(p x) = (1 (x) ... (x) x) d^k p + k d^(k-1) p (x) 1`.
pub fn derivation_identity_check(p: &Polynomial, k: usize) -> bool {
    if k == 0 {
        return true;
    }
    let lhs = partial_k(&p.times_x(), k);
    let lower = if k == 1 {
        TensorPolynomial::from_polynomial(p)
    } else {
        partial_k(p, k - 1)
    };
    let rhs = partial_k(p, k)
        .times_x_last()
        .add(&lower.tensor_one().scale(&rational::int(k as i64)));
    lhs == rhs
}

/// For `p_d(x) = sum_{j<=d} z^-(j+1) x^j`, checks that `d^k p_d / k!` equals the
/// `(k+1)`-fold tensor power of the resolvent series `sum_j z^-(j+1) x^j`
/// truncated to total degree `d - k`. Powers of `1/z` are tracked exactly.
pub fn resolvent_identity_check(d: usize, k: usize) -> bool {
    if k == 0 {
        return true;
    }
    // (word, power of 1/z) -> coefficient
    let mut lhs: BTreeMap<(Vec<usize>, usize), Rational> = BTreeMap::new();
    let kf = factorial(k);
    for j in k..=d {
        for (word, c) in partial_k(&Polynomial::monomial(j), k).terms() {
            *lhs.entry((word.to_vec(), j + 1))
                .or_insert_with(Rational::zero) += c / &kf;
        }
    }
    let mut rhs: BTreeMap<(Vec<usize>, usize), Rational> = BTreeMap::new();
    for total in 0..=(d.saturating_sub(k)) {
        if d < k {
            break;
        }
        for_each_composition(total, k + 1, |word| {
            // product of z^-(i+1) over the k+1 factors
            rhs.insert((word.to_vec(), total + k + 1), Rational::one());
        });
    }
    lhs.retain(|_, v| !v.is_zero());
    lhs == rhs
}
