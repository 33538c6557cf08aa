//! Extended reals: finite values plus +inf and -inf.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExtReal {
    NegInf,
    Finite(f64),
    PosInf,
}

impl ExtReal {
    pub const ZERO: ExtReal = ExtReal::Finite(0.0);

    /// Rejects NaN; maps IEEE infinities to the matching variants.
    pub fn new(v: f64) -> Result<Self> {
        if v.is_nan() {
            Err(Error::NotANumber)
        } else {
            Ok(Self::from_f64_unchecked(v))
        }
    }

    pub(crate) fn from_f64_unchecked(v: f64) -> Self {
        if v == f64::INFINITY {
            ExtReal::PosInf
        } else if v == f64::NEG_INFINITY {
            ExtReal::NegInf
        } else {
            ExtReal::Finite(v)
        }
    }

    pub fn to_f64(self) -> f64 {
        match self {
            ExtReal::NegInf => f64::NEG_INFINITY,
            ExtReal::Finite(v) => v,
            ExtReal::PosInf => f64::INFINITY,
        }
    }

    pub fn is_finite(self) -> bool {
        matches!(self, ExtReal::Finite(_))
    }

    pub fn finite(self) -> Option<f64> {
        match self {
            ExtReal::Finite(v) => Some(v),
            _ => None,
        }
    }

    pub fn checked_add(self, other: ExtReal) -> Result<ExtReal> {
        use ExtReal::*;
        match (self, other) {
            (PosInf, NegInf) | (NegInf, PosInf) => Err(Error::UndefinedSum),
            (PosInf, _) | (_, PosInf) => Ok(PosInf),
            (NegInf, _) | (_, NegInf) => Ok(NegInf),
            (Finite(a), Finite(b)) => Ok(Self::from_f64_unchecked(a + b)),
        }
    }

    pub fn min(self, other: ExtReal) -> ExtReal {
        if other < self {
            other
        } else {
            self
        }
    }

    pub fn max(self, other: ExtReal) -> ExtReal {
        if other > self {
            other
        } else {
            self
        }
    }

    /// inf of an empty collection is +inf.
    pub fn inf_of<I: IntoIterator<Item = ExtReal>>(it: I) -> ExtReal {
        it.into_iter().fold(ExtReal::PosInf, ExtReal::min)
    }

    /// sup over a collection of nonnegatives; the empty sup is 0.
    pub fn sup_nonneg_of<I: IntoIterator<Item = ExtReal>>(it: I) -> ExtReal {
        it.into_iter().fold(ExtReal::ZERO, ExtReal::max)
    }

    /// Within `tol` of another value; infinities only match themselves.
    pub fn approx_eq(self, other: ExtReal, tol: f64) -> bool {
        match (self, other) {
            (ExtReal::Finite(a), ExtReal::Finite(b)) => (a - b).abs() <= tol,
            (a, b) => a == b,
        }
    }
}

impl From<f64> for ExtReal {
    /// NaN is treated as outside the domain, i.e. +inf.
    fn from(v: f64) -> Self {
        if v.is_nan() {
            ExtReal::PosInf
        } else {
            Self::from_f64_unchecked(v)
        }
    }
}

impl Eq for ExtReal {}

impl PartialOrd for ExtReal {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for ExtReal {
    fn cmp(&self, other: &Self) -> Ordering {
        use ExtReal::*;
        match (self, other) {
            (NegInf, NegInf) | (PosInf, PosInf) => Ordering::Equal,
            (NegInf, _) | (_, PosInf) => Ordering::Less,
            (_, NegInf) | (PosInf, _) => Ordering::Greater,
            (Finite(a), Finite(b)) => a.total_cmp(b),
        }
    }
}

impl fmt::Display for ExtReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtReal::NegInf => write!(f, "-inf"),
            ExtReal::PosInf => write!(f, "inf"),
            ExtReal::Finite(v) => write!(f, "{v}"),
        }
    }
}

impl Serialize for ExtReal {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            ExtReal::Finite(v) => s.serialize_f64(*v),
            ExtReal::PosInf => s.serialize_str("inf"),
            ExtReal::NegInf => s.serialize_str("-inf"),
        }
    }
}

impl<'de> Deserialize<'de> for ExtReal {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Str(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(ExtReal::from_f64_unchecked(v)),
            Raw::Str(s) => match s.as_str() {
                "inf" | "+inf" => Ok(ExtReal::PosInf),
                "-inf" => Ok(ExtReal::NegInf),
                other => Err(serde::de::Error::custom(format!("bad extended real {other:?}"))),
            },
        }
    }
}

impl std::ops::Neg for ExtReal {
    type Output = ExtReal;

    fn neg(self) -> ExtReal {
        match self {
            ExtReal::NegInf => ExtReal::PosInf,
            ExtReal::PosInf => ExtReal::NegInf,
            ExtReal::Finite(v) => ExtReal::Finite(-v),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ExtReal::*;

    #[test]
    fn addition_table() {
        let vals = [NegInf, Finite(-2.5), Finite(0.0), Finite(3.0), PosInf];
        for &a in &vals {
            for &b in &vals {
                let r = a.checked_add(b);
                match (a, b) {
                    (PosInf, NegInf) | (NegInf, PosInf) => assert_eq!(r, Err(Error::UndefinedSum)),
                    (PosInf, _) | (_, PosInf) => assert_eq!(r, Ok(PosInf)),
                    (NegInf, _) | (_, NegInf) => assert_eq!(r, Ok(NegInf)),
                    (Finite(x), Finite(y)) => assert_eq!(r, Ok(Finite(x + y))),
                }
                assert_eq!(a.checked_add(b), b.checked_add(a));
            }
        }
    }

    #[test]
    fn ordering_is_total() {
        let vals = [NegInf, Finite(-1e308), Finite(0.0), Finite(1e308), PosInf];
        for w in vals.windows(2) {
            assert!(w[0] < w[1]);
        }
        assert_eq!(Finite(1.0).max(PosInf), PosInf);
        assert_eq!(Finite(1.0).min(NegInf), NegInf);
    }

    #[test]
    fn empty_conventions() {
        assert_eq!(ExtReal::inf_of(std::iter::empty()), PosInf);
        assert_eq!(ExtReal::sup_nonneg_of(std::iter::empty()), Finite(0.0));
        assert_eq!(ExtReal::inf_of([Finite(2.0), Finite(-1.0)]), Finite(-1.0));
    }

    #[test]
    fn nan_rejected_and_json_round_trip() {
        assert_eq!(ExtReal::new(f64::NAN), Err(Error::NotANumber));
        assert_eq!(ExtReal::new(f64::INFINITY), Ok(PosInf));
        for v in [NegInf, Finite(0.25), PosInf] {
            let s = serde_json::to_string(&v).unwrap();
            let back: ExtReal = serde_json::from_str(&s).unwrap();
            assert_eq!(back, v);
        }
    }
}
