//! Finite sums of elementary tensors of matrices and the bimodule calculus on them.
//!
//! For arity 2, `A (x) B` acts on `a` by `(A (x) B) # a = A a B` and multiplies
//! in `A (x) A^op`: `(X (x) Y)(A (x) B) = XA (x) BY`.

use faer::{c64, Mat};

use crate::error::{Error, Result};
use crate::linalg::{self, CMat};

#[derive(Debug, Clone)]
pub struct ElementaryTensor {
    pub coeff: c64,
    pub factors: Vec<CMat>,
}

#[derive(Debug, Clone)]
pub struct OperatorTensor {
    arity: usize,
    dim: usize,
    terms: Vec<ElementaryTensor>,
}

fn one() -> c64 {
    c64::new(1.0, 0.0)
}

impl OperatorTensor {
    pub fn zero(arity: usize, dim: usize) -> Self {
        OperatorTensor {
            arity,
            dim,
            terms: Vec::new(),
        }
    }

    pub fn elementary(coeff: c64, factors: Vec<CMat>) -> Result<Self> {
        let Some(first) = factors.first() else {
            return Err(Error::validation(
                "an elementary tensor needs at least one factor",
            ));
        };
        let dim = first.nrows();
        for f in &factors {
            linalg::check_square(f, dim)?;
        }
        Ok(OperatorTensor {
            arity: factors.len(),
            dim,
            terms: vec![ElementaryTensor { coeff, factors }],
        })
    }

    /// `A (x) B`.
    pub fn pair(a: CMat, b: CMat) -> Result<Self> {
        Self::elementary(one(), vec![a, b])
    }

    /// `1 (x) 1` in dimension `n`.
    pub fn unit(n: usize) -> Self {
        Self::pair(linalg::identity(n), linalg::identity(n)).expect("square identities")
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn terms(&self) -> &[ElementaryTensor] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    fn check_same(&self, other: &Self) -> Result<()> {
        if self.dim != other.dim {
            return Err(Error::Dimension {
                expected: self.dim,
                got: other.dim,
            });
        }
        if self.arity != other.arity {
            return Err(Error::Dimension {
                expected: self.arity,
                got: other.arity,
            });
        }
        Ok(())
    }

    fn check_pair(&self) -> Result<()> {
        if self.arity != 2 {
            return Err(Error::Dimension {
                expected: 2,
                got: self.arity,
            });
        }
        Ok(())
    }

    pub fn push(&mut self, coeff: c64, factors: Vec<CMat>) -> Result<()> {
        if factors.len() != self.arity {
            return Err(Error::Dimension {
                expected: self.arity,
                got: factors.len(),
            });
        }
        for f in &factors {
            linalg::check_square(f, self.dim)?;
        }
        self.terms.push(ElementaryTensor { coeff, factors });
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.terms.is_empty() && self.arity == other.arity {
            return Ok(other.clone());
        }
        self.check_same(other)?;
        let mut out = self.clone();
        out.terms.extend(other.terms.iter().cloned());
        Ok(out)
    }

    pub fn scale(&self, c: c64) -> Self {
        let mut out = self.clone();
        out.terms.iter_mut().for_each(|t| t.coeff *= c);
        out
    }

    /// `(X (x) Y) * self = sum X A (x) B Y`.
    pub fn left_mul(&self, x: &CMat, y: &CMat) -> Result<Self> {
        self.check_pair()?;
        linalg::check_square(x, self.dim)?;
        linalg::check_square(y, self.dim)?;
        let terms = self
            .terms
            .iter()
            .map(|t| ElementaryTensor {
                coeff: t.coeff,
                factors: vec![x * &t.factors[0], &t.factors[1] * y],
            })
            .collect();
        Ok(OperatorTensor {
            arity: 2,
            dim: self.dim,
            terms,
        })
    }

    /// Involution `(A (x) B)* = B* (x) A*`, so that `(u # a)* = u* # a*`.
    pub fn star(&self) -> Result<Self> {
        self.check_pair()?;
        let terms = self
            .terms
            .iter()
            .map(|t| ElementaryTensor {
                coeff: t.coeff.conj(),
                factors: vec![
                    linalg::adjoint(&t.factors[1]),
                    linalg::adjoint(&t.factors[0]),
                ],
            })
            .collect();
        Ok(OperatorTensor {
            arity: 2,
            dim: self.dim,
            terms,
        })
    }

    /// `sum A_t` products `A_t B_t`: the multiplication map `m(A (x) B) = AB`.
    pub fn multiply_out(&self) -> Result<CMat> {
        apply_sharp(self, &linalg::identity(self.dim))
    }

    /// Matrix of `a -> self # a` on column-major `vec(a)` (arity 2).
    pub fn dense(&self) -> Result<CMat> {
        self.check_pair()?;
        let n = self.dim;
        let mut out = Mat::zeros(n * n, n * n);
        for t in &self.terms {
            out += linalg::scale(
                &linalg::sandwich_operator(&t.factors[0], &t.factors[1]),
                t.coeff,
            );
        }
        Ok(out)
    }

    /// Rewrites an arity-2 tensor with at most `N^2` terms `C_pq (x) E_pq`.
    pub fn compact(&self) -> Result<Self> {
        self.check_pair()?;
        let n = self.dim;
        if self.terms.len() <= n * n {
            return Ok(self.clone());
        }
        let mut blocks: Vec<CMat> = (0..n * n).map(|_| linalg::zeros(n)).collect();
        for t in &self.terms {
            let (a, b) = (&t.factors[0], &t.factors[1]);
            for q in 0..n {
                for p in 0..n {
                    let w = t.coeff * b[(p, q)];
                    if w.norm() == 0.0 {
                        continue;
                    }
                    blocks[p + n * q] += linalg::scale(a, w);
                }
            }
        }
        let mut out = Self::zero(2, n);
        for (idx, block) in blocks.into_iter().enumerate() {
            if block.norm_l2() == 0.0 {
                continue;
            }
            let (p, q) = (idx % n, idx / n);
            let e = Mat::from_fn(n, n, |i, j| {
                if i == p && j == q {
                    one()
                } else {
                    c64::new(0.0, 0.0)
                }
            });
            out.terms.push(ElementaryTensor {
                coeff: one(),
                factors: vec![block, e],
            });
        }
        Ok(out)
    }

    /// Frobenius distance between the dense forms of two arity-2 tensors.
    pub fn distance(&self, other: &Self) -> Result<f64> {
        let diff = &self.dense()? - &other.dense()?;
        Ok(diff.norm_l2())
    }

    pub fn dense_norm(&self) -> Result<f64> {
        Ok(self.dense()?.norm_l2())
    }
}

/// `u # a = sum A a B`.
pub fn apply_sharp(u: &OperatorTensor, a: &CMat) -> Result<CMat> {
    u.check_pair()?;
    linalg::check_square(a, u.dim)?;
    let mut out = linalg::zeros(u.dim);
    for t in &u.terms {
        out += linalg::scale(&(&(&t.factors[0] * a) * &t.factors[1]), t.coeff);
    }
    Ok(out)
}

/// `(A (x) B) (x)_2 (C (x) D) = phi[BC] A (x) D`, extended bilinearly.
pub fn otimes2(u: &OperatorTensor, v: &OperatorTensor) -> Result<OperatorTensor> {
    u.check_pair()?;
    v.check_pair()?;
    if u.dim != v.dim {
        return Err(Error::Dimension {
            expected: u.dim,
            got: v.dim,
        });
    }
    let mut out = OperatorTensor::zero(2, u.dim);
    for s in &u.terms {
        for t in &v.terms {
            let w = linalg::ntrace_mul(&s.factors[1], &t.factors[0]);
            out.terms.push(ElementaryTensor {
                coeff: s.coeff * t.coeff * w,
                factors: vec![s.factors[0].clone(), t.factors[1].clone()],
            });
        }
    }
    Ok(out)
}

/// `phi_k = I (x) phi^(k-2) (x) I`: traces out every middle factor.
pub fn phi_contract(x: &OperatorTensor) -> Result<OperatorTensor> {
    if x.arity < 2 {
        return Err(Error::Dimension {
            expected: 2,
            got: x.arity,
        });
    }
    let mut out = OperatorTensor::zero(2, x.dim);
    for t in &x.terms {
        let k = t.factors.len();
        let w: c64 = t.factors[1..k - 1].iter().map(linalg::ntrace).product();
        out.terms.push(ElementaryTensor {
            coeff: t.coeff * w,
            factors: vec![t.factors[0].clone(), t.factors[k - 1].clone()],
        });
    }
    Ok(out)
}
