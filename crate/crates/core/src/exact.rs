//! Exact-number helpers shared across modules: rational aliases, float
//! conversion and the `{num, den}` JSON encoding.

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{Pow, ToPrimitive, Zero};
use serde::de::{self, Deserializer};
use serde::{Deserialize, Serialize, Serializer};

/// An exact nonnegative rational used for explored fractions and counted
/// probabilities.
pub type Fraction = BigRational;

pub fn ratio(num: &BigUint, den: &BigUint) -> Fraction {
    BigRational::new(BigInt::from(num.clone()), BigInt::from(den.clone()))
}

pub fn ratio_u64(num: u64, den: u64) -> Fraction {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

pub fn to_f64(value: &Fraction) -> f64 {
    value.to_f64().unwrap_or(f64::NAN)
}

pub fn biguint_to_f64(value: &BigUint) -> f64 {
    value.to_f64().unwrap_or(f64::INFINITY)
}

/// Serialized as a JSON number when it fits in `u64`, otherwise as a decimal
/// string. Both forms are accepted on input.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BigNum(pub BigUint);

impl Serialize for BigNum {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self.0.to_u64() {
            Some(v) => serializer.serialize_u64(v),
            None => serializer.serialize_str(&self.0.to_str_radix(10)),
        }
    }
}

impl<'de> Deserialize<'de> for BigNum {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Int(u64),
            Text(String),
        }
        match Raw::deserialize(deserializer)? {
            Raw::Int(v) => Ok(BigNum(BigUint::from(v))),
            Raw::Text(s) => BigUint::parse_bytes(s.as_bytes(), 10)
                .map(BigNum)
                .ok_or_else(|| de::Error::custom(format!("not a nonnegative integer: {s:?}"))),
        }
    }
}

/// `{num, den}` pair. Not reduced on output, so callers may carry raw counts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RatioRepr {
    pub num: BigNum,
    pub den: BigNum,
}

impl RatioRepr {
    pub fn from_parts(num: &BigUint, den: &BigUint) -> Self {
        RatioRepr {
            num: BigNum(num.clone()),
            den: BigNum(den.clone()),
        }
    }

    /// Encodes a nonnegative rational in lowest terms. Panics on negative input.
    pub fn from_fraction(value: &Fraction) -> Self {
        let num = value.numer().to_biguint().expect("nonnegative rational");
        let den = value.denom().to_biguint().expect("positive denominator");
        RatioRepr::from_parts(&num, &den)
    }

    /// `None` when the denominator is zero.
    pub fn to_fraction(&self) -> Option<Fraction> {
        if self.den.0.is_zero() {
            return None;
        }
        Some(ratio(&self.num.0, &self.den.0))
    }
}

/// Parses `a/b` or a plain decimal such as `0.125` into an exact
/// nonnegative rational.
pub fn parse_fraction(text: &str) -> Option<Fraction> {
    let text = text.trim();
    if let Some((num, den)) = text.split_once('/') {
        let num: BigUint = num.trim().parse().ok()?;
        let den: BigUint = den.trim().parse().ok()?;
        return (!den.is_zero()).then(|| ratio(&num, &den));
    }
    let (whole, frac) = text.split_once('.').unwrap_or((text, ""));
    if whole.is_empty() && frac.is_empty() || !frac.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    let whole: BigUint = if whole.is_empty() {
        BigUint::zero()
    } else {
        whole.parse().ok()?
    };
    let scale = BigUint::from(10u32).pow(frac.len() as u32);
    let frac: BigUint = if frac.is_empty() {
        BigUint::zero()
    } else {
        frac.parse().ok()?
    };
    Some(ratio(&(whole * &scale + frac), &scale))
}

/// `num/den` in lowest terms, always with an explicit denominator.
pub fn format_fraction(value: &Fraction) -> String {
    format!("{}/{}", value.numer(), value.denom())
}
