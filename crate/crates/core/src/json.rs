//! Serde adapters for the wire formats: big integers as decimal strings,
//! rationals as `{"num","den"}`, complex values as `{"re","im"}`.

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::hp::{Complex, Real};

/// Significant decimal digits used when printing reals.
pub const DIGITS: usize = 20;

pub mod biguint_str {
    use super::*;

    pub fn serialize<S: Serializer>(v: &BigUint, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&v.to_string())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BigUint, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

pub mod biguint_vec {
    use super::*;

    pub fn serialize<S: Serializer>(v: &[BigUint], s: S) -> Result<S::Ok, S::Error> {
        let strs: Vec<String> = v.iter().map(|x| x.to_string()).collect();
        strs.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<BigUint>, D::Error> {
        let strs = Vec::<String>::deserialize(d)?;
        strs.iter()
            .map(|s| s.parse().map_err(serde::de::Error::custom))
            .collect()
    }
}

pub mod bigint_vec {
    use super::*;

    pub fn serialize<S: Serializer>(v: &[BigInt], s: S) -> Result<S::Ok, S::Error> {
        let strs: Vec<String> = v.iter().map(|x| x.to_string()).collect();
        strs.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<BigInt>, D::Error> {
        let strs = Vec::<String>::deserialize(d)?;
        strs.iter()
            .map(|s| s.parse().map_err(serde::de::Error::custom))
            .collect()
    }
}

/// Wire form of an exact rational.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RatJson {
    pub num: String,
    pub den: String,
}

impl RatJson {
    pub fn from_parts(num: &impl ToString, den: &impl ToString) -> Self {
        RatJson {
            num: num.to_string(),
            den: den.to_string(),
        }
    }

    pub fn from_rational(r: &BigRational) -> Self {
        RatJson::from_parts(r.numer(), r.denom())
    }

    pub fn to_rational(&self) -> Option<BigRational> {
        let n: BigInt = self.num.parse().ok()?;
        let d: BigInt = self.den.parse().ok()?;
        if d == BigInt::from(0) {
            return None;
        }
        Some(BigRational::new(n, d))
    }
}

/// Wire form of a complex value.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComplexJson {
    pub re: String,
    pub im: String,
}

impl ComplexJson {
    pub fn from_complex(z: &Complex) -> Self {
        ComplexJson {
            re: z.re.to_sci(DIGITS),
            im: z.im.to_sci(DIGITS),
        }
    }

    pub fn from_f64(re: f64, im: f64) -> Self {
        ComplexJson {
            re: fmt_f64(re),
            im: fmt_f64(im),
        }
    }
}

/// Decimal string of a real.
pub fn real_str(x: &Real) -> String {
    x.to_sci(DIGITS)
}

/// Deterministic shortest round-trip decimal form of an `f64`.
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:e}")
    } else if x.is_nan() {
        "nan".to_string()
    } else if x > 0.0 {
        "inf".to_string()
    } else {
        "-inf".to_string()
    }
}

/// Serializes an `f64` field through [`fmt_f64`].
pub mod f64_str {
    use super::*;

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&fmt_f64(*v))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        let s = String::deserialize(d)?;
        match s.as_str() {
            "inf" => Ok(f64::INFINITY),
            "-inf" => Ok(f64::NEG_INFINITY),
            "nan" => Ok(f64::NAN),
            _ => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

/// Serializes a `Real` field as a decimal string.
pub mod real_string {
    use super::*;

    pub fn serialize<S: Serializer>(v: &Real, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&real_str(v))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Real, D::Error> {
        let s = String::deserialize(d)?;
        Real::parse(&s, crate::hp::DEFAULT_BITS)
            .ok_or_else(|| serde::de::Error::custom("bad real literal"))
    }
}

/// Serializes a list of `Real`s as decimal strings.
pub mod real_vec {
    use super::*;

    pub fn serialize<S: Serializer>(v: &[Real], s: S) -> Result<S::Ok, S::Error> {
        let strs: Vec<String> = v.iter().map(real_str).collect();
        strs.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Real>, D::Error> {
        let strs = Vec::<String>::deserialize(d)?;
        strs.iter()
            .map(|s| {
                Real::parse(s, crate::hp::DEFAULT_BITS)
                    .ok_or_else(|| serde::de::Error::custom("bad real literal"))
            })
            .collect()
    }
}
