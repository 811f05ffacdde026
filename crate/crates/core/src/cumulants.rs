//! Exact moment/free-cumulant conversion and the catalog of base laws.
//!
//! `m_n = sum over NC(n) of prod_{B} r_{|B|}`. The sum is evaluated by
//! grouping NC(n) into block profiles, so an order-n conversion costs one
//! product per integer partition of n rather than one per noncrossing
//! partition.

use std::fmt;
use std::str::FromStr;

use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::partitions::{profile_counts, MAX_ENUMERATION_SIZE};
use crate::rational::{self, Rational};

/// Highest moment order the exact converters accept.
pub const MAX_MOMENT_ORDER: usize = MAX_ENUMERATION_SIZE;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SequenceKind {
    /// Every cumulant past the stored ones is exactly zero.
    FinitelySupported,
    /// Only the stored cumulants are known; reading past them is an error.
    Truncated,
}

/// Free cumulants `r_1..r_K` of a base law.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CumulantSequence {
    kind: SequenceKind,
    #[serde(with = "rational::serde_rational::vec")]
    values: Vec<Rational>,
}

impl CumulantSequence {
    pub fn new(kind: SequenceKind, values: Vec<Rational>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::validation("a cumulant sequence needs at least r_1"));
        }
        Ok(CumulantSequence { kind, values })
    }

    pub fn finitely_supported(values: Vec<Rational>) -> Result<Self> {
        Self::new(SequenceKind::FinitelySupported, values)
    }

    pub fn truncated(values: Vec<Rational>) -> Result<Self> {
        Self::new(SequenceKind::Truncated, values)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let seq: CumulantSequence =
            serde_json::from_str(text).map_err(|e| Error::parse(format!("cumulant file: {e}")))?;
        Self::new(seq.kind, seq.values)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("cumulant sequences always serialize")
    }

    pub fn kind(&self) -> SequenceKind {
        self.kind
    }

    pub fn is_finitely_supported(&self) -> bool {
        self.kind == SequenceKind::FinitelySupported
    }

    /// Number of stored cumulants `K`.
    pub fn truncation_order(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[Rational] {
        &self.values
    }

    /// Highest order that can be read, `None` when unbounded.
    pub fn available_order(&self) -> Option<usize> {
        match self.kind {
            SequenceKind::FinitelySupported => None,
            SequenceKind::Truncated => Some(self.values.len()),
        }
    }

    /// `r_k` for `k >= 1`.
    pub fn get(&self, k: usize) -> Result<Rational> {
        if k == 0 {
            return Err(Error::domain("free cumulants are indexed from 1"));
        }
        match self.values.get(k - 1) {
            Some(v) => Ok(v.clone()),
            None if self.is_finitely_supported() => Ok(Rational::zero()),
            None => Err(Error::Truncation {
                requested: k,
                available: self.values.len(),
            }),
        }
    }

    pub fn require_order(&self, k: usize) -> Result<()> {
        match self.available_order() {
            Some(available) if k > available => Err(Error::Truncation {
                requested: k,
                available,
            }),
            _ => Ok(()),
        }
    }

    /// `r_1..r_n` as a dense vector (zero-padded when finitely supported).
    pub fn prefix(&self, n: usize) -> Result<Vec<Rational>> {
        (1..=n).map(|k| self.get(k)).collect()
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.values.iter().map(rational::to_f64).collect()
    }

    /// Fails with a regime error naming the first negative cumulant.
    pub fn check_nonnegative(&self) -> Result<()> {
        match self.values.iter().position(|v| v.is_negative()) {
            Some(i) => Err(Error::Regime {
                index: i + 1,
                value: rational::format(&self.values[i]),
            }),
            None => Ok(()),
        }
    }

    pub fn is_nonnegative(&self) -> bool {
        self.check_nonnegative().is_ok()
    }

    /// Entry-wise map that keeps the kind.
    pub fn map(&self, mut f: impl FnMut(usize, &Rational) -> Rational) -> Self {
        CumulantSequence {
            kind: self.kind,
            values: self
                .values
                .iter()
                .enumerate()
                .map(|(i, v)| f(i + 1, v))
                .collect(),
        }
    }

    /// Cumulant-wise sum: the free convolution of the two laws.
    pub fn free_convolve(&self, other: &CumulantSequence) -> Result<Self> {
        let kind = if self.is_finitely_supported() && other.is_finitely_supported() {
            SequenceKind::FinitelySupported
        } else {
            SequenceKind::Truncated
        };
        let len = match kind {
            SequenceKind::FinitelySupported => self.values.len().max(other.values.len()),
            SequenceKind::Truncated => {
                let a = self.available_order().unwrap_or(usize::MAX);
                let b = other.available_order().unwrap_or(usize::MAX);
                a.min(b)
            }
        };
        let values = (1..=len)
            .map(|k| Ok(self.get(k)? + other.get(k)?))
            .collect::<Result<Vec<_>>>()?;
        CumulantSequence::new(kind, values)
    }
}

/// Moments `m_1..m_K` of a law; `m_0 = 1` is implicit.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MomentSequence {
    #[serde(with = "rational::serde_rational::vec")]
    values: Vec<Rational>,
}

impl MomentSequence {
    pub fn new(values: Vec<Rational>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::validation("a moment sequence needs at least m_1"));
        }
        Ok(MomentSequence { values })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let seq: MomentSequence =
            serde_json::from_str(text).map_err(|e| Error::parse(format!("moment file: {e}")))?;
        Self::new(seq.values)
    }

    pub fn truncation_order(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[Rational] {
        &self.values
    }

    /// `m_k`, with `m_0 = 1`.
    pub fn get(&self, k: usize) -> Result<Rational> {
        if k == 0 {
            return Ok(rational::one());
        }
        self.values.get(k - 1).cloned().ok_or(Error::Truncation {
            requested: k,
            available: self.values.len(),
        })
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.values.iter().map(rational::to_f64).collect()
    }
}

fn check_order(n: usize) -> Result<()> {
    if n == 0 || n > MAX_MOMENT_ORDER {
        return Err(Error::Size(format!(
            "moment order must be in 1..={MAX_MOMENT_ORDER}, got {n}"
        )));
    }
    Ok(())
}

/// Sum over NC(order) of the block products `prod_B c[|B| - 1]`.
fn nc_sum(order: usize, cumulants: &[Rational]) -> Result<Rational> {
    let table = profile_counts(order)?;
    let mut total = Rational::zero();
    for entry in table.iter() {
        if entry.sizes.iter().any(|&s| cumulants[s - 1].is_zero()) {
            continue;
        }
        let mut term = Rational::from_integer(entry.count.into());
        for &s in &entry.sizes {
            term *= &cumulants[s - 1];
        }
        total += term;
    }
    Ok(total)
}

/// Real-valued version of the NC sum, used where inputs are irrational.
pub fn nc_sum_f64(order: usize, cumulants: &[f64]) -> Result<f64> {
    if cumulants.len() < order {
        return Err(Error::Truncation {
            requested: order,
            available: cumulants.len(),
        });
    }
    let table = profile_counts(order)?;
    Ok(table
        .iter()
        .map(|e| e.count as f64 * e.sizes.iter().map(|&s| cumulants[s - 1]).product::<f64>())
        .sum())
}

/// `m_1..m_n` from `r_1..r_n`, exactly.
pub fn moments_from_cumulants(r: &CumulantSequence, n: usize) -> Result<MomentSequence> {
    check_order(n)?;
    let cumulants = r.prefix(n)?;
    let values = (1..=n)
        .map(|order| nc_sum(order, &cumulants))
        .collect::<Result<Vec<_>>>()?;
    MomentSequence::new(values)
}

/// Real moments from real cumulants (`cumulants[k-1] = r_k`).
pub fn moments_from_real_cumulants(cumulants: &[f64], n: usize) -> Result<Vec<f64>> {
    check_order(n)?;
    (1..=n).map(|order| nc_sum_f64(order, cumulants)).collect()
}

/// Inverts the moment-cumulant relation order by order:
/// `r_n = m_n - sum over NC(n) minus the one-block partition`.
pub fn cumulants_from_moments(m: &MomentSequence, n: usize) -> Result<CumulantSequence> {
    check_order(n)?;
    let mut cumulants: Vec<Rational> = Vec::with_capacity(n);
    for order in 1..=n {
        let target = m.get(order)?;
        cumulants.push(Rational::zero());
        // with r_order = 0 the NC sum is exactly the non-full-block part
        let rest = nc_sum(order, &cumulants)?;
        cumulants[order - 1] = target - rest;
    }
    CumulantSequence::truncated(cumulants)
}

/// Cumulants of `mu_t`: every entry scaled by `t`.
pub fn semigroup_cumulants(r: &CumulantSequence, t: &Rational) -> Result<CumulantSequence> {
    if t.is_negative() {
        return Err(Error::domain(format!(
            "semigroup time must be nonnegative, got {}",
            rational::format(t)
        )));
    }
    Ok(r.map(|_, v| v * t))
}

/// `m_p(t) / t` for `mu_t`; tends to `r_p` as `t -> 0`.
pub fn small_time_ratio(r: &CumulantSequence, p: usize, t: &Rational) -> Result<Rational> {
    if p == 0 || !p.is_multiple_of(2) {
        return Err(Error::domain(format!(
            "small-time ratio needs an even order, got {p}"
        )));
    }
    if !t.is_positive() || *t > rational::one() {
        return Err(Error::domain(format!(
            "small-time ratio needs 0 < t <= 1, got {}",
            rational::format(t)
        )));
    }
    r.require_order(p)?;
    let scaled = semigroup_cumulants(r, t)?;
    let m = moments_from_cumulants(&scaled, p)?;
    Ok(m.get(p)? / t)
}

/// Base laws with known free cumulants.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Distribution {
    /// `r_2 = 1`, all other cumulants zero.
    Semicircular,
    /// `r_k = rate` for every k.
    FreePoisson { rate: Rational },
    /// `r_k = rate * (k-th moment of the jump law)`.
    FreeCompoundPoisson {
        rate: Rational,
        jump_moments: Vec<Rational>,
    },
}

impl Distribution {
    /// Cumulant sequence of the law. `order` is the truncation order for
    /// laws with infinitely many nonzero cumulants; it is ignored by the
    /// semicircular law and by compound Poisson (whose order is the number
    /// of jump moments supplied).
    pub fn cumulants(&self, order: usize) -> Result<CumulantSequence> {
        match self {
            Distribution::Semicircular => {
                CumulantSequence::finitely_supported(vec![rational::zero(), rational::one()])
            }
            Distribution::FreePoisson { rate } => {
                if rate.is_negative() {
                    return Err(Error::domain("free Poisson rate must be nonnegative"));
                }
                if order == 0 {
                    return Err(Error::Size(
                        "free Poisson needs truncation order >= 1".into(),
                    ));
                }
                CumulantSequence::truncated(vec![rate.clone(); order])
            }
            Distribution::FreeCompoundPoisson { rate, jump_moments } => {
                if rate.is_negative() {
                    return Err(Error::domain("compound Poisson rate must be nonnegative"));
                }
                CumulantSequence::truncated(jump_moments.iter().map(|m| rate * m).collect())
            }
        }
    }

    /// Jump-law moments of a point mass at `a`, orders `1..=order`.
    pub fn point_mass_jumps(a: &Rational, order: usize) -> Vec<Rational> {
        (1..=order).map(|k| rational::pow(a, k)).collect()
    }
}

impl fmt::Display for Distribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Distribution::Semicircular => write!(f, "semicircular"),
            Distribution::FreePoisson { rate } => {
                write!(f, "free_poisson:{}", rational::format(rate))
            }
            Distribution::FreeCompoundPoisson { rate, jump_moments } => {
                let moments: Vec<String> = jump_moments.iter().map(rational::format).collect();
                write!(
                    f,
                    "free_compound_poisson:{}:{}",
                    rational::format(rate),
                    moments.join(",")
                )
            }
        }
    }
}

impl FromStr for Distribution {
    type Err = Error;

    /// `semicircular`, `free_poisson:<rate>` or
    /// `free_compound_poisson:<rate>:<m1>,<m2>,...`.
    fn from_str(s: &str) -> Result<Self> {
        let mut parts = s.trim().splitn(3, ':');
        let name = parts.next().unwrap_or_default();
        match name {
            "semicircular" | "semicircle" => Ok(Distribution::Semicircular),
            "free_poisson" => {
                let rate = parts
                    .next()
                    .map(rational::parse)
                    .transpose()?
                    .unwrap_or_else(rational::one);
                Ok(Distribution::FreePoisson { rate })
            }
            "free_compound_poisson" => {
                let rate = rational::parse(
                    parts
                        .next()
                        .ok_or_else(|| Error::parse("free_compound_poisson needs a rate"))?,
                )?;
                let jump_moments = parts
                    .next()
                    .ok_or_else(|| Error::parse("free_compound_poisson needs jump moments"))?
                    .split(',')
                    .map(rational::parse)
                    .collect::<Result<Vec<_>>>()?;
                if jump_moments.is_empty() {
                    return Err(Error::parse("free_compound_poisson needs jump moments"));
                }
                Ok(Distribution::FreeCompoundPoisson { rate, jump_moments })
            }
            other => Err(Error::parse(format!("unknown distribution {other:?}"))),
        }
    }
}

/// `catalog("semicircular", order)` style lookup by identifier.
pub fn catalog(name: &str, order: usize) -> Result<CumulantSequence> {
    name.parse::<Distribution>()?.cumulants(order)
}
