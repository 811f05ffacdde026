//! Simple adapted biprocesses: finite sums of `c A (x) B 1_[s, e)` where the
//! factors are constants or earlier values of the sampled path.

use std::borrow::Cow;

use faer::{c64, Mat};
use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, CMat};
use crate::rational::{self, Rational};

/// One side of an elementary tensor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Factor {
    Identity,
    /// Real diagonal constant.
    Diagonal(Vec<f64>),
    /// Real diagonal with entries evenly spaced from `lo` to `hi`; sized to the model.
    DiagonalRange {
        lo: f64,
        hi: f64,
    },
    /// Dense constant, row-major `[re, im]` pairs.
    Dense(Vec<Vec<[f64; 2]>>),
    /// `X(t_j)` at the current step.
    Path,
    /// `X(t)` at a fixed grid time; only readable once `t <= t_j`.
    PathAt(#[serde(with = "rational::serde_rational")] Rational),
}

impl Factor {
    pub fn dense(m: &CMat) -> Self {
        Factor::Dense(
            (0..m.nrows())
                .map(|i| {
                    (0..m.ncols())
                        .map(|j| [m[(i, j)].re, m[(i, j)].im])
                        .collect()
                })
                .collect(),
        )
    }

    pub fn is_constant(&self) -> bool {
        !matches!(self, Factor::Path | Factor::PathAt(_))
    }
}

/// `coeff * left (x) right` on `[start, end)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiprocessTerm {
    #[serde(default = "unit_coeff")]
    pub coeff: [f64; 2],
    pub left: Factor,
    pub right: Factor,
    #[serde(with = "rational::serde_rational")]
    pub start: Rational,
    #[serde(with = "rational::serde_rational")]
    pub end: Rational,
}

fn unit_coeff() -> [f64; 2] {
    [1.0, 0.0]
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AdaptedBiprocess {
    terms: Vec<BiprocessTerm>,
}

impl AdaptedBiprocess {
    pub fn new(terms: Vec<BiprocessTerm>) -> Result<Self> {
        for t in &terms {
            if t.end < t.start {
                return Err(Error::validation(
                    "biprocess support must satisfy start <= end",
                ));
            }
            if t.start.is_negative() {
                return Err(Error::validation("biprocess support must start at t >= 0"));
            }
        }
        Ok(AdaptedBiprocess { terms })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: AdaptedBiprocess =
            serde_json::from_str(text).map_err(|e| Error::parse(format!("biprocess: {e}")))?;
        Self::new(raw.terms)
    }

    /// `left (x) right 1_[start, end)`.
    pub fn elementary(left: Factor, right: Factor, start: Rational, end: Rational) -> Result<Self> {
        Self::new(vec![BiprocessTerm {
            coeff: unit_coeff(),
            left,
            right,
            start,
            end,
        }])
    }

    /// `1 (x) 1 1_[start, end)`.
    pub fn unit(start: Rational, end: Rational) -> Result<Self> {
        Self::elementary(Factor::Identity, Factor::Identity, start, end)
    }

    pub fn terms(&self) -> &[BiprocessTerm] {
        &self.terms
    }

    pub fn push(&mut self, term: BiprocessTerm) {
        self.terms.push(term);
    }

    pub fn is_constant(&self) -> bool {
        self.terms
            .iter()
            .all(|t| t.left.is_constant() && t.right.is_constant())
    }

    pub(crate) fn bind(&self, n: usize, steps: usize, dt: &Rational) -> Result<BoundBiprocess> {
        let mut terms = Vec::with_capacity(self.terms.len());
        for t in &self.terms {
            let (lo, hi) = (grid_ceil(&t.start, dt, steps), grid_ceil(&t.end, dt, steps));
            terms.push(BoundTerm {
                coeff: c64::new(t.coeff[0], t.coeff[1]),
                left: BoundFactor::bind(&t.left, n, steps, dt)?,
                right: BoundFactor::bind(&t.right, n, steps, dt)?,
                lo,
                hi,
            });
        }
        Ok(BoundBiprocess { n, terms })
    }
}

/// Smallest grid index `j` with `j dt >= t`, clamped to `steps`.
fn grid_ceil(t: &Rational, dt: &Rational, steps: usize) -> usize {
    if dt.is_zero() {
        return 0;
    }
    let q = (t / dt).ceil().to_integer();
    let q: i64 = q.try_into().unwrap_or(i64::MAX);
    q.clamp(0, steps as i64) as usize
}

/// A factor resolved against a model size and time grid.
#[derive(Debug, Clone)]
pub(crate) enum BoundFactor {
    Identity,
    Diagonal(Vec<f64>),
    Dense(CMat),
    Path,
    PathAt(usize),
}

impl BoundFactor {
    fn bind(f: &Factor, n: usize, steps: usize, dt: &Rational) -> Result<Self> {
        Ok(match f {
            Factor::Identity => BoundFactor::Identity,
            Factor::Diagonal(d) => {
                if d.len() != n {
                    return Err(Error::Dimension {
                        expected: n,
                        got: d.len(),
                    });
                }
                BoundFactor::Diagonal(d.clone())
            }
            Factor::DiagonalRange { lo, hi } => {
                let step = if n > 1 {
                    (hi - lo) / (n - 1) as f64
                } else {
                    0.0
                };
                BoundFactor::Diagonal((0..n).map(|i| lo + step * i as f64).collect())
            }
            Factor::Dense(rows) => {
                if rows.len() != n {
                    return Err(Error::Dimension {
                        expected: n,
                        got: rows.len(),
                    });
                }
                if let Some(r) = rows.iter().find(|r| r.len() != n) {
                    return Err(Error::Dimension {
                        expected: n,
                        got: r.len(),
                    });
                }
                BoundFactor::Dense(Mat::from_fn(n, n, |i, j| {
                    c64::new(rows[i][j][0], rows[i][j][1])
                }))
            }
            Factor::Path => BoundFactor::Path,
            Factor::PathAt(t) => {
                let idx = t / dt;
                if !idx.is_integer() || t.is_negative() {
                    return Err(Error::validation(format!(
                        "path time {} is not on the simulation grid",
                        rational::format(t)
                    )));
                }
                let i: usize = idx.to_integer().try_into().unwrap_or(usize::MAX);
                if i > steps {
                    return Err(Error::validation(format!(
                        "path time {} lies past the horizon",
                        rational::format(t)
                    )));
                }
                BoundFactor::PathAt(i)
            }
        })
    }

    fn path_index(&self) -> Option<usize> {
        match self {
            BoundFactor::PathAt(i) => Some(*i),
            _ => None,
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct BoundTerm {
    pub coeff: c64,
    pub left: BoundFactor,
    pub right: BoundFactor,
    pub lo: usize,
    pub hi: usize,
}

#[derive(Debug, Clone)]
pub(crate) struct BoundBiprocess {
    pub n: usize,
    pub terms: Vec<BoundTerm>,
}

/// Access to `X(t_i)` for already-visited grid points.
pub(crate) trait PathHistory {
    fn value_at(&self, i: usize) -> Option<&CMat>;
}

/// Matrix value of a factor at one step, borrowed where possible.
#[derive(Debug, Clone, Copy)]
pub(crate) enum Op<'a> {
    Identity,
    Diagonal(&'a [f64]),
    Dense(&'a CMat),
}

impl<'a> Op<'a> {
    /// Diagonal weights, `Some(None)` for the identity, `None` for a dense value.
    pub(crate) fn weight(self) -> Option<Option<&'a [f64]>> {
        match self {
            Op::Identity => Some(None),
            Op::Diagonal(d) => Some(Some(d)),
            Op::Dense(_) => None,
        }
    }
}

impl BoundBiprocess {
    /// Path indices whose values must be kept for later reads.
    pub fn snapshots(&self) -> Vec<usize> {
        let mut out: Vec<usize> = self
            .terms
            .iter()
            .flat_map(|t| [t.left.path_index(), t.right.path_index()])
            .flatten()
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    #[cfg(test)]
    pub fn is_active(&self, j: usize) -> bool {
        self.terms.iter().any(|t| t.lo <= j && j < t.hi)
    }

    /// Active terms at step `j` as `(coeff, A, B)`.
    pub fn at<'a>(
        &'a self,
        j: usize,
        history: &'a dyn PathHistory,
    ) -> Result<Vec<(c64, Op<'a>, Op<'a>)>> {
        let mut out = Vec::new();
        for t in self.terms.iter().filter(|t| t.lo <= j && j < t.hi) {
            out.push((
                t.coeff,
                resolve(&t.left, j, history)?,
                resolve(&t.right, j, history)?,
            ));
        }
        Ok(out)
    }

    /// `sum_j u(j) # x_j` style application at a single step.
    pub fn apply(&self, j: usize, history: &dyn PathHistory, x: &CMat) -> Result<Option<CMat>> {
        let terms = self.at(j, history)?;
        if terms.is_empty() {
            return Ok(None);
        }
        let mut acc = linalg::zeros(self.n);
        for (c, a, b) in terms {
            linalg::axpy(&mut acc, c, &sandwich(a, x, b));
        }
        Ok(Some(acc))
    }
}

fn resolve<'a>(f: &'a BoundFactor, j: usize, history: &'a dyn PathHistory) -> Result<Op<'a>> {
    Ok(match f {
        BoundFactor::Identity => Op::Identity,
        BoundFactor::Diagonal(d) => Op::Diagonal(d),
        BoundFactor::Dense(m) => Op::Dense(m),
        BoundFactor::Path => {
            Op::Dense(history.value_at(j).ok_or_else(|| {
                Error::Contract(format!("path value at step {j} is not available"))
            })?)
        }
        BoundFactor::PathAt(i) => {
            if *i > j {
                return Err(Error::Contract(format!(
                    "biprocess at step {j} reads the path at future step {i}"
                )));
            }
            Op::Dense(history.value_at(*i).ok_or_else(|| {
                Error::Contract(format!("path value at step {i} was not retained"))
            })?)
        }
    })
}

/// `op * m`.
pub(crate) fn lmul<'a>(op: Op, m: &'a CMat) -> Cow<'a, CMat> {
    match op {
        Op::Identity => Cow::Borrowed(m),
        Op::Diagonal(d) => Cow::Owned(Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)] * d[i])),
        Op::Dense(a) => Cow::Owned(a * m),
    }
}

/// `m * op`.
pub(crate) fn rmul<'a>(m: &'a CMat, op: Op) -> Cow<'a, CMat> {
    match op {
        Op::Identity => Cow::Borrowed(m),
        Op::Diagonal(d) => Cow::Owned(Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)] * d[j])),
        Op::Dense(b) => Cow::Owned(m * b),
    }
}

/// `a * m * b`.
pub(crate) fn sandwich<'a>(a: Op, m: &'a CMat, b: Op) -> Cow<'a, CMat> {
    match (a, b) {
        (Op::Identity, _) => rmul(m, b),
        (_, Op::Identity) => lmul(a, m),
        (Op::Diagonal(l), Op::Diagonal(r)) => {
            Cow::Owned(Mat::from_fn(m.nrows(), m.ncols(), |i, j| {
                m[(i, j)] * (l[i] * r[j])
            }))
        }
        _ => Cow::Owned(rmul(&lmul(a, m), b).into_owned()),
    }
}

/// `acc += c * a * m * b`.
pub(crate) fn sandwich_add(acc: &mut CMat, c: c64, a: Op, m: &CMat, b: Op) {
    match (a.weight(), b.weight()) {
        (Some(l), Some(r)) => {
            for j in 0..m.ncols() {
                let cj = c * r.map_or(1.0, |r| r[j]);
                let src = m.col_as_slice(j);
                for (i, (dst, x)) in acc.col_as_slice_mut(j).iter_mut().zip(src).enumerate() {
                    *dst += *x * cj * l.map_or(1.0, |l| l[i]);
                }
            }
        }
        _ => linalg::axpy(acc, c, &sandwich(a, m, b)),
    }
}

/// `phi[a b]`.
pub(crate) fn ntrace_pair(a: Op, b: Op, n: usize) -> c64 {
    let nf = n as f64;
    match (a, b) {
        (Op::Identity, Op::Identity) => c64::new(1.0, 0.0),
        (Op::Identity, Op::Diagonal(d)) | (Op::Diagonal(d), Op::Identity) => {
            c64::new(d.iter().sum::<f64>() / nf, 0.0)
        }
        (Op::Identity, Op::Dense(m)) | (Op::Dense(m), Op::Identity) => linalg::ntrace(m),
        (Op::Diagonal(x), Op::Diagonal(y)) => {
            c64::new(x.iter().zip(y).map(|(p, q)| p * q).sum::<f64>() / nf, 0.0)
        }
        (Op::Diagonal(d), Op::Dense(m)) | (Op::Dense(m), Op::Diagonal(d)) => {
            (0..n).map(|i| m[(i, i)] * d[i]).sum::<c64>() / nf
        }
        (Op::Dense(x), Op::Dense(y)) => linalg::ntrace_mul(x, y),
    }
}

/// Operator norm of a factor value.
pub(crate) fn op_norm(op: Op) -> f64 {
    match op {
        Op::Identity => 1.0,
        Op::Diagonal(d) => d.iter().fold(0.0f64, |m, x| m.max(x.abs())),
        Op::Dense(m) => linalg::op_norm(m),
    }
}
