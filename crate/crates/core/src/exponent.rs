//! Extended-real exponents in (0, ∞].

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// An exponent p ∈ (0, ∞]. Infinity is its own variant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Exponent {
    Finite(f64),
    Infinity,
}

impl Exponent {
    pub const ONE: Exponent = Exponent::Finite(1.0);
    pub const TWO: Exponent = Exponent::Finite(2.0);
    pub const INF: Exponent = Exponent::Infinity;

    /// Builds an exponent; `f64::INFINITY` maps to [`Exponent::Infinity`].
    pub fn new(p: f64) -> Result<Self> {
        if p.is_nan() || p <= 0.0 {
            return Err(Error::InvalidExponent(p, "must be positive"));
        }
        if p.is_infinite() {
            Ok(Exponent::Infinity)
        } else {
            Ok(Exponent::Finite(p))
        }
    }

    /// Exponent with the given reciprocal; 0 gives ∞.
    pub fn from_recip(r: f64) -> Result<Self> {
        if r.is_nan() || r < 0.0 {
            return Err(Error::InvalidExponent(r, "reciprocal must be nonnegative"));
        }
        if r == 0.0 {
            Ok(Exponent::Infinity)
        } else {
            Exponent::new(1.0 / r)
        }
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, Exponent::Infinity)
    }

    /// Numeric value, `f64::INFINITY` for ∞.
    pub fn value(self) -> f64 {
        match self {
            Exponent::Finite(p) => p,
            Exponent::Infinity => f64::INFINITY,
        }
    }

    /// 1/p, with 1/∞ = 0.
    pub fn recip(self) -> f64 {
        match self {
            Exponent::Finite(p) => 1.0 / p,
            Exponent::Infinity => 0.0,
        }
    }

    /// The conjugate exponent p' with 1/p + 1/p' = 1.
    pub fn conjugate(self) -> Result<Self> {
        match self {
            Exponent::Infinity => Ok(Exponent::ONE),
            Exponent::Finite(p) if p < 1.0 => Err(Error::InvalidExponent(p, "conjugate requires p >= 1")),
            Exponent::Finite(p) if p == 1.0 => Ok(Exponent::Infinity),
            Exponent::Finite(p) => Ok(Exponent::Finite(p / (p - 1.0))),
        }
    }

    pub(crate) fn require_banach(self, name: &str) -> Result<()> {
        if self.value() < 1.0 {
            return Err(Error::ExponentRelation(format!("{name} = {self} must be >= 1")));
        }
        Ok(())
    }

    /// Approximate equality of reciprocals.
    pub fn approx_eq(self, other: Exponent) -> bool {
        (self.recip() - other.recip()).abs() <= 1e-12
    }
}

/// Shorthand constructor, panicking on invalid input.
pub fn exp(p: f64) -> Exponent {
    Exponent::new(p).expect("invalid exponent")
}

/// Checks 1/r = 1/p + 1/s.
pub fn check_holder_triple(r: Exponent, p: Exponent, s: Exponent) -> Result<()> {
    if (r.recip() - p.recip() - s.recip()).abs() > 1e-12 {
        return Err(Error::ExponentRelation(format!("1/{r} != 1/{p} + 1/{s}")));
    }
    Ok(())
}

impl PartialOrd for Exponent {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        other.recip().partial_cmp(&self.recip())
    }
}

impl fmt::Display for Exponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Exponent::Finite(p) => write!(f, "{p}"),
            Exponent::Infinity => write!(f, "inf"),
        }
    }
}

impl std::str::FromStr for Exponent {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim().to_ascii_lowercase();
        if matches!(t.as_str(), "inf" | "infinity" | "∞") {
            return Ok(Exponent::Infinity);
        }
        let v: f64 = t
            .parse()
            .map_err(|_| Error::InvalidArgument(format!("cannot parse exponent `{s}`")))?;
        Exponent::new(v)
    }
}

impl Serialize for Exponent {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Exponent::Finite(p) => s.serialize_f64(*p),
            Exponent::Infinity => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Exponent {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Str(String),
        }
        let e = match Raw::deserialize(d)? {
            Raw::Num(v) => Exponent::new(v),
            Raw::Str(s) => s.parse(),
        };
        e.map_err(serde::de::Error::custom)
    }
}
