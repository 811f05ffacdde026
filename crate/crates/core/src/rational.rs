//! Exact rational helpers shared by the combinatorial modules.
//!
//! Rationals travel through files as `"p/q"` strings (or plain integers);
//! decimals are printed with 12 significant digits.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

pub type Rational = BigRational;

pub fn int(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

pub fn ratio(p: i64, q: i64) -> Rational {
    Rational::new(BigInt::from(p), BigInt::from(q))
}

pub fn zero() -> Rational {
    Rational::zero()
}

pub fn one() -> Rational {
    Rational::one()
}

/// Parses `"p/q"`, `"-p/q"`, `"p"` or a finite decimal such as `"0.25"`.
pub fn parse(s: &str) -> Result<Rational> {
    let s = s.trim();
    if s.is_empty() {
        return Err(Error::parse("empty rational literal"));
    }
    if let Some((p, q)) = s.split_once('/') {
        let p: BigInt = p
            .trim()
            .parse()
            .map_err(|_| Error::parse(format!("bad numerator in {s:?}")))?;
        let q: BigInt = q
            .trim()
            .parse()
            .map_err(|_| Error::parse(format!("bad denominator in {s:?}")))?;
        if q.is_zero() {
            return Err(Error::parse(format!("zero denominator in {s:?}")));
        }
        return Ok(Rational::new(p, q));
    }
    if let Some((whole, frac)) = s.split_once('.') {
        let negative = whole.trim_start().starts_with('-');
        let digits = format!("{}{}", whole.trim_start_matches(['-', '+']), frac);
        if digits.is_empty() || !digits.chars().all(|c| c.is_ascii_digit()) {
            return Err(Error::parse(format!("bad decimal literal {s:?}")));
        }
        let p: BigInt = digits
            .parse()
            .map_err(|_| Error::parse(format!("bad decimal literal {s:?}")))?;
        let q = num_traits::pow(BigInt::from(10), frac.len());
        let r = Rational::new(p, q);
        return Ok(if negative { -r } else { r });
    }
    let p: BigInt = s
        .parse()
        .map_err(|_| Error::parse(format!("bad rational literal {s:?}")))?;
    Ok(Rational::from_integer(p))
}

/// Canonical `"p/q"` form; integers are written without a denominator.
pub fn format(r: &Rational) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

pub fn to_f64(r: &Rational) -> f64 {
    r.to_f64().unwrap_or_else(|| {
        // numerator or denominator overflowed f64; fall back to a scaled division
        let shift = r.numer().bits().max(r.denom().bits()).saturating_sub(1000) as i32;
        let n = (r.numer() >> shift as usize).to_f64().unwrap_or(f64::NAN);
        let d = (r.denom() >> shift as usize).to_f64().unwrap_or(f64::NAN);
        n / d
    })
}

/// Nearest rational with denominator 2^52-ish; exact for dyadic floats.
pub fn from_f64(x: f64) -> Result<Rational> {
    Rational::from_float(x).ok_or_else(|| Error::domain(format!("{x} is not finite")))
}

/// Decimal rendering with 12 significant digits.
pub fn decimal(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let s = format!("{:.11e}", x);
    // normalise through f64 parsing so trailing zeros disappear
    let v: f64 = s.parse().unwrap_or(x);
    let magnitude = v.abs().log10();
    if (-5.0..15.0).contains(&magnitude) {
        let mut out = format!("{v}");
        if out.len() > 20 {
            out = s;
        }
        out
    } else {
        s
    }
}

pub fn abs(r: &Rational) -> Rational {
    r.abs()
}

pub fn pow(r: &Rational, k: usize) -> Rational {
    num_traits::pow(r.clone(), k)
}

pub mod serde_rational {
    //! Serde adapters for rationals encoded as strings.
    use super::*;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(r: &Rational, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&format(r))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Rational, D::Error> {
        let raw = RationalLiteral::deserialize(d)?;
        raw.into_rational().map_err(serde::de::Error::custom)
    }

    pub mod vec {
        use super::*;
        use serde::ser::SerializeSeq;

        pub fn serialize<S: Serializer>(
            v: &[Rational],
            s: S,
        ) -> std::result::Result<S::Ok, S::Error> {
            let mut seq = s.serialize_seq(Some(v.len()))?;
            for r in v {
                seq.serialize_element(&format(r))?;
            }
            seq.end()
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(
            d: D,
        ) -> std::result::Result<Vec<Rational>, D::Error> {
            let raw = Vec::<RationalLiteral>::deserialize(d)?;
            raw.into_iter()
                .enumerate()
                .map(|(i, r)| {
                    r.into_rational()
                        .map_err(|e| serde::de::Error::custom(format!("entry {i}: {e}")))
                })
                .collect()
        }
    }

    /// Accept both `"1/2"` strings and bare JSON integers.
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum RationalLiteral {
        Text(String),
        Int(i64),
    }

    impl RationalLiteral {
        fn into_rational(self) -> Result<Rational> {
            match self {
                RationalLiteral::Text(s) => parse(&s),
                RationalLiteral::Int(i) => Ok(int(i)),
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_common_forms() {
        assert_eq!(parse("3/6").unwrap(), ratio(1, 2));
        assert_eq!(parse("-7").unwrap(), int(-7));
        assert_eq!(parse("0.25").unwrap(), ratio(1, 4));
        assert_eq!(parse("-1.5").unwrap(), ratio(-3, 2));
        assert!(parse("1/0").is_err());
        assert!(parse("abc").is_err());
        assert!(parse("").is_err());
    }

    #[test]
    fn formats_canonically() {
        assert_eq!(format(&ratio(4, 8)), "1/2");
        assert_eq!(format(&int(5)), "5");
        assert_eq!(format(&ratio(-2, 3)), "-2/3");
    }

    #[test]
    fn decimal_has_twelve_significant_digits() {
        assert_eq!(decimal(1.0 / 3.0), "0.333333333333");
        assert_eq!(decimal(2.0), "2");
        assert_eq!(decimal(0.0), "0");
    }
}
