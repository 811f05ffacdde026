//! Truncated formal Laurent series with exact rational coefficients.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64;
use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::rational::{self, Rational};

/// Which indeterminate the exponents refer to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variable {
    Z,
    /// Series around infinity, written in powers of `1/z`.
    InverseZ,
}

/// `sum_{k >= valuation} c_k x^k + O(x^precision)`.
///
/// Only coefficients with exponent below `precision` are known; asking for
/// one at or beyond it is a truncation error.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FormalLaurentSeries {
    variable: Variable,
    valuation: i64,
    coeffs: Vec<Rational>,
    precision: i64,
}

impl FormalLaurentSeries {
    /// Builds `sum_i coeffs[i] x^(valuation + i) + O(x^precision)`.
    pub fn new(variable: Variable, valuation: i64, coeffs: Vec<Rational>, precision: i64) -> Self {
        let mut coeffs = coeffs;
        coeffs.truncate((precision - valuation).max(0) as usize);
        let mut s = FormalLaurentSeries {
            variable,
            valuation,
            coeffs,
            precision: precision.max(valuation),
        };
        s.normalize();
        s
    }

    /// Power series `sum_i coeffs[i] x^i + O(x^precision)`.
    pub fn power_series(variable: Variable, coeffs: Vec<Rational>, precision: i64) -> Self {
        Self::new(variable, 0, coeffs, precision)
    }

    pub fn monomial(variable: Variable, exponent: i64, coeff: Rational, precision: i64) -> Self {
        Self::new(variable, exponent, vec![coeff], precision)
    }

    pub fn variable(&self) -> Variable {
        self.variable
    }

    pub fn precision(&self) -> i64 {
        self.precision
    }

    /// Exponent of the first stored (nonzero) coefficient.
    pub fn valuation(&self) -> i64 {
        self.valuation
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    fn normalize(&mut self) {
        let lead = self.coeffs.iter().take_while(|c| c.is_zero()).count();
        if lead == self.coeffs.len() {
            self.coeffs.clear();
            self.valuation = self.precision;
            return;
        }
        self.coeffs.drain(..lead);
        self.valuation += lead as i64;
        while self.coeffs.last().is_some_and(Zero::is_zero) {
            self.coeffs.pop();
        }
    }

    /// Coefficient of `x^exponent`.
    pub fn coeff(&self, exponent: i64) -> Result<Rational> {
        if exponent >= self.precision {
            return Err(Error::Truncation {
                requested: exponent.max(0) as usize,
                available: self.precision.max(0) as usize,
            });
        }
        if exponent < self.valuation {
            return Ok(Rational::zero());
        }
        Ok(self
            .coeffs
            .get((exponent - self.valuation) as usize)
            .cloned()
            .unwrap_or_else(Rational::zero))
    }

    fn check_variable(&self, other: &Self) {
        assert_eq!(
            self.variable, other.variable,
            "series in different variables"
        );
    }

    /// Multiplicative inverse; the leading coefficient must be nonzero.
    pub fn inverse(&self) -> Result<Self> {
        if self.is_zero() {
            return Err(Error::domain(
                "cannot invert a series with no known nonzero term",
            ));
        }
        let rel = (self.precision - self.valuation) as usize;
        let a0 = &self.coeffs[0];
        let mut out: Vec<Rational> = Vec::with_capacity(rel);
        for i in 0..rel {
            let mut acc = if i == 0 {
                Rational::one()
            } else {
                Rational::zero()
            };
            for j in 1..=i {
                if let Some(a) = self.coeffs.get(j) {
                    acc -= a * &out[i - j];
                }
            }
            out.push(acc / a0);
        }
        Ok(Self::new(
            self.variable,
            -self.valuation,
            out,
            rel as i64 - self.valuation,
        ))
    }

    pub fn pow(&self, k: u32) -> Self {
        let mut acc = Self::new(self.variable, 0, vec![Rational::one()], i64::MAX / 4);
        for _ in 0..k {
            acc = &acc * self;
        }
        acc
    }

    /// `self(inner(x))`. `self` must be a power series (valuation >= 0) and
    /// `inner` must have positive valuation.
    pub fn compose(&self, inner: &Self) -> Result<Self> {
        if !self.is_zero() && self.valuation < 0 {
            return Err(Error::domain("outer series must not have negative powers"));
        }
        if inner.valuation < 1 && !inner.is_zero() {
            return Err(Error::domain("inner series must vanish at the origin"));
        }
        let step = inner.valuation.max(1);
        let precision = (self.precision.saturating_mul(step)).min(inner.precision);
        let mut total = Self::new(inner.variable, 0, Vec::new(), precision);
        let mut power = Self::new(inner.variable, 0, vec![Rational::one()], precision);
        for k in 0..self.precision.max(0) {
            let c = self.coeff(k)?;
            if !c.is_zero() {
                total = &total + &power.scale(&c);
            }
            power = &power * inner;
            if power.valuation >= precision {
                break;
            }
        }
        Ok(Self::new(
            inner.variable,
            total.valuation,
            total.coeffs,
            precision.min(total.precision),
        ))
    }

    pub fn scale(&self, c: &Rational) -> Self {
        Self::new(
            self.variable,
            self.valuation,
            self.coeffs.iter().map(|a| a * c).collect(),
            self.precision,
        )
    }

    /// Evaluates the stored terms at a complex point of the series' variable
    /// (for `InverseZ` series pass `z`, not `1/z`).
    pub fn evaluate(&self, z: Complex64) -> Complex64 {
        let x = match self.variable {
            Variable::Z => z,
            Variable::InverseZ => z.inv(),
        };
        let mut acc = Complex64::zero();
        for c in self.coeffs.iter().rev() {
            acc = acc * x + rational::to_f64(c);
        }
        acc * x.powi(self.valuation as i32)
    }

    /// Known coefficients as `(exponent, value)` pairs, zeros included.
    pub fn terms(&self) -> Vec<(i64, Rational)> {
        (self.valuation.min(self.precision)..self.precision)
            .map(|e| (e, self.coeff(e).expect("exponent below precision")))
            .collect()
    }
}

impl Add for &FormalLaurentSeries {
    type Output = FormalLaurentSeries;

    fn add(self, rhs: &FormalLaurentSeries) -> FormalLaurentSeries {
        self.check_variable(rhs);
        let precision = self.precision.min(rhs.precision);
        let valuation = self.valuation.min(rhs.valuation).min(precision);
        let coeffs = (valuation..precision)
            .map(|e| {
                let a = if e >= self.valuation {
                    self.coeffs.get((e - self.valuation) as usize)
                } else {
                    None
                };
                let b = if e >= rhs.valuation {
                    rhs.coeffs.get((e - rhs.valuation) as usize)
                } else {
                    None
                };
                match (a, b) {
                    (Some(a), Some(b)) => a + b,
                    (Some(a), None) => a.clone(),
                    (None, Some(b)) => b.clone(),
                    (None, None) => Rational::zero(),
                }
            })
            .collect();
        FormalLaurentSeries::new(self.variable, valuation, coeffs, precision)
    }
}

impl Neg for &FormalLaurentSeries {
    type Output = FormalLaurentSeries;

    fn neg(self) -> FormalLaurentSeries {
        self.scale(&-Rational::one())
    }
}

impl Sub for &FormalLaurentSeries {
    type Output = FormalLaurentSeries;

    fn sub(self, rhs: &FormalLaurentSeries) -> FormalLaurentSeries {
        self + &(-rhs)
    }
}

impl Mul for &FormalLaurentSeries {
    type Output = FormalLaurentSeries;

    fn mul(self, rhs: &FormalLaurentSeries) -> FormalLaurentSeries {
        self.check_variable(rhs);
        let valuation = self.valuation + rhs.valuation;
        let precision = (self.valuation.saturating_add(rhs.precision))
            .min(rhs.valuation.saturating_add(self.precision));
        let len = (precision - valuation).max(0) as usize;
        let mut coeffs = vec![Rational::zero(); len];
        for (i, a) in self.coeffs.iter().enumerate() {
            if i >= len || a.is_zero() {
                continue;
            }
            for (j, b) in rhs.coeffs.iter().enumerate().take(len - i) {
                coeffs[i + j] += a * b;
            }
        }
        FormalLaurentSeries::new(self.variable, valuation, coeffs, precision)
    }
}

impl fmt::Display for FormalLaurentSeries {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let var = match self.variable {
            Variable::Z => "z",
            Variable::InverseZ => "z^-1",
        };
        let mut first = true;
        for (i, c) in self.coeffs.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            write!(
                f,
                "({})*{}^{}",
                rational::format(c),
                var,
                self.valuation + i as i64
            )?;
        }
        if first {
            write!(f, "0")?;
        }
        write!(f, " + O({}^{})", var, self.precision)
    }
}
