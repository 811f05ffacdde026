//! Compactly supported piecewise-constant integrands.

use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rational::{self, Rational};

/// `f = v_i` on `[t_(i-1), t_i)`, zero outside `[t_0, t_m)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepFunction {
    #[serde(with = "rational::serde_rational::vec")]
    breakpoints: Vec<Rational>,
    #[serde(with = "rational::serde_rational::vec")]
    values: Vec<Rational>,
}

impl StepFunction {
    pub fn new(breakpoints: Vec<Rational>, values: Vec<Rational>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::validation(
                "a step function needs at least one piece",
            ));
        }
        if breakpoints.len() != values.len() + 1 {
            return Err(Error::validation(format!(
                "{} values need {} breakpoints, got {}",
                values.len(),
                values.len() + 1,
                breakpoints.len()
            )));
        }
        if let Some(i) = (1..breakpoints.len()).find(|&i| breakpoints[i] <= breakpoints[i - 1]) {
            return Err(Error::validation(format!(
                "breakpoints must increase strictly (position {i})"
            )));
        }
        Ok(StepFunction {
            breakpoints,
            values,
        })
    }

    /// `value * 1_[a, b)`.
    pub fn indicator(a: Rational, b: Rational, value: Rational) -> Result<Self> {
        Self::new(vec![a, b], vec![value])
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: StepFunction = serde_json::from_str(text)
            .map_err(|e| Error::parse(format!("step function file: {e}")))?;
        Self::new(raw.breakpoints, raw.values)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("step functions serialize")
    }

    pub fn breakpoints(&self) -> &[Rational] {
        &self.breakpoints
    }

    pub fn values(&self) -> &[Rational] {
        &self.values
    }

    /// `(length, value)` of every piece.
    pub fn pieces(&self) -> impl Iterator<Item = (Rational, &Rational)> + '_ {
        self.breakpoints
            .windows(2)
            .zip(&self.values)
            .map(|(w, v)| (&w[1] - &w[0], v))
    }

    pub fn start(&self) -> &Rational {
        &self.breakpoints[0]
    }

    pub fn end(&self) -> &Rational {
        self.breakpoints.last().expect("nonempty")
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(Zero::is_zero)
    }

    pub fn value_at(&self, t: &Rational) -> Rational {
        if t < self.start() || t >= self.end() {
            return Rational::zero();
        }
        let i = self.breakpoints.partition_point(|b| b <= t) - 1;
        self.values[i].clone()
    }

    pub fn value_at_f64(&self, t: f64) -> f64 {
        let bp: Vec<f64> = self.breakpoints.iter().map(rational::to_f64).collect();
        if t < bp[0] || t >= *bp.last().expect("nonempty") {
            return 0.0;
        }
        let i = bp.partition_point(|&b| b <= t) - 1;
        rational::to_f64(&self.values[i])
    }

    /// `sum_i |v_i|^p (t_i - t_(i-1))`.
    pub fn lp_power(&self, p: usize) -> Rational {
        self.pieces()
            .map(|(len, v)| rational::pow(&v.abs(), p) * len)
            .sum()
    }

    /// `integral f^p`, signed.
    pub fn power_integral(&self, p: usize) -> Rational {
        self.pieces()
            .map(|(len, v)| rational::pow(v, p) * len)
            .sum()
    }

    pub fn integral(&self) -> Rational {
        self.power_integral(1)
    }

    pub fn scale(&self, c: &Rational) -> Self {
        StepFunction {
            breakpoints: self.breakpoints.clone(),
            values: self.values.iter().map(|v| v * c).collect(),
        }
    }

    pub fn abs(&self) -> Self {
        StepFunction {
            breakpoints: self.breakpoints.clone(),
            values: self.values.iter().map(Signed::abs).collect(),
        }
    }

    pub fn is_nonnegative(&self) -> bool {
        self.values.iter().all(|v| !v.is_negative())
    }

    /// Pointwise combination on the common refinement of both breakpoint sets.
    pub fn combine(&self, other: &Self, op: impl Fn(&Rational, &Rational) -> Rational) -> Self {
        let mut cuts: Vec<Rational> = self
            .breakpoints
            .iter()
            .chain(&other.breakpoints)
            .cloned()
            .collect();
        cuts.sort();
        cuts.dedup();
        let values = cuts
            .windows(2)
            .map(|w| op(&self.value_at(&w[0]), &other.value_at(&w[0])))
            .collect();
        StepFunction {
            breakpoints: cuts,
            values,
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        self.combine(other, |a, b| a + b)
    }

    pub fn mul(&self, other: &Self) -> Self {
        self.combine(other, |a, b| a * b)
    }

    /// `true` if `self <= other` everywhere.
    pub fn dominated_by(&self, other: &Self) -> bool {
        other.combine(self, |a, b| a - b).is_nonnegative()
    }

    /// Pieces in floating point: `(start, end, value)`.
    pub fn to_f64_pieces(&self) -> Vec<(f64, f64, f64)> {
        self.breakpoints
            .windows(2)
            .zip(&self.values)
            .map(|(w, v)| {
                (
                    rational::to_f64(&w[0]),
                    rational::to_f64(&w[1]),
                    rational::to_f64(v),
                )
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{int, ratio};

    fn step(bp: &[i64], vals: &[i64]) -> StepFunction {
        StepFunction::new(
            bp.iter().map(|&b| int(b)).collect(),
            vals.iter().map(|&v| int(v)).collect(),
        )
        .unwrap()
    }

    #[test]
    fn lp_power_examples() {
        let one = step(&[0, 1], &[1]);
        for p in 1..6 {
            assert_eq!(one.lp_power(p), int(1));
        }
        assert_eq!(step(&[0, 3], &[2]).lp_power(2), int(12));
        assert_eq!(step(&[0, 1, 2], &[1, 3]).lp_power(3), int(28));
        assert_eq!(step(&[0, 1], &[-2]).lp_power(3), int(8));
        assert_eq!(step(&[0, 1], &[-2]).power_integral(3), int(-8));
    }

    #[test]
    fn validation() {
        assert!(StepFunction::new(vec![int(0), int(0)], vec![int(1)]).is_err());
        assert!(StepFunction::new(vec![int(0), int(1)], vec![]).is_err());
        assert!(StepFunction::new(vec![int(0)], vec![int(1)]).is_err());
    }

    #[test]
    fn json_roundtrip() {
        let f =
            StepFunction::from_json(r#"{"breakpoints": ["0", "1", "2"], "values": ["1", "3"]}"#)
                .unwrap();
        assert_eq!(f, step(&[0, 1, 2], &[1, 3]));
        assert_eq!(StepFunction::from_json(&f.to_json()).unwrap(), f);
        assert!(
            StepFunction::from_json(r#"{"breakpoints": ["1", "0"], "values": ["1"]}"#).is_err()
        );
    }

    #[test]
    fn sums_refine_breakpoints() {
        let f = step(&[0, 2], &[1]);
        let g = StepFunction::new(vec![ratio(1, 2), int(3)], vec![int(2)]).unwrap();
        let h = f.add(&g);
        assert_eq!(h.value_at(&ratio(1, 4)), int(1));
        assert_eq!(h.value_at(&int(1)), int(3));
        assert_eq!(h.value_at(&ratio(5, 2)), int(2));
        assert_eq!(h.value_at(&int(3)), int(0));
        assert_eq!(h.integral(), f.integral() + g.integral());
    }

    #[test]
    fn domination() {
        let f = step(&[0, 2], &[3]);
        let g = step(&[0, 1], &[1]);
        assert!(g.dominated_by(&f));
        assert!(!f.dominated_by(&g));
    }
}
