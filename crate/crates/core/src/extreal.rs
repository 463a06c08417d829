//! Extended reals: a finite value or `+∞`.
//!
//! Serialized as a JSON number printed with 17 significant digits, or the
//! string `"inf"` for `+∞`.

use std::fmt;

use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::value::RawValue;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExtReal {
    Finite(f64),
    PosInf,
}

impl ExtReal {
    pub const ZERO: ExtReal = ExtReal::Finite(0.0);

    /// Maps `+∞` to [`ExtReal::PosInf`]; values beyond the f64 range saturate there.
    pub fn from_f64(x: f64) -> Self {
        if x == f64::INFINITY {
            ExtReal::PosInf
        } else {
            debug_assert!(!x.is_nan(), "ExtReal must be NaN-free");
            ExtReal::Finite(x)
        }
    }

    pub fn is_finite(&self) -> bool {
        matches!(self, ExtReal::Finite(_))
    }

    pub fn finite(&self) -> Option<f64> {
        match *self {
            ExtReal::Finite(v) => Some(v),
            ExtReal::PosInf => None,
        }
    }

    /// The value as an `f64`, with `+∞` mapped to `f64::INFINITY`.
    pub fn to_f64(&self) -> f64 {
        match *self {
            ExtReal::Finite(v) => v,
            ExtReal::PosInf => f64::INFINITY,
        }
    }

    /// Closeness with a relative tolerance; two infinities are equal.
    pub fn approx_eq(&self, other: &ExtReal, rel: f64, abs: f64) -> bool {
        match (self, other) {
            (ExtReal::PosInf, ExtReal::PosInf) => true,
            (ExtReal::Finite(a), ExtReal::Finite(b)) => {
                (a - b).abs() <= abs.max(rel * a.abs().max(b.abs()))
            }
            _ => false,
        }
    }
}

impl From<f64> for ExtReal {
    fn from(x: f64) -> Self {
        ExtReal::from_f64(x)
    }
}

impl fmt::Display for ExtReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtReal::Finite(v) => write!(f, "{v}"),
            ExtReal::PosInf => f.write_str("inf"),
        }
    }
}

/// Fixed 17-significant-digit rendering used in every serialized report.
pub fn format_f64(x: f64) -> String {
    if x.is_nan() {
        "null".to_string()
    } else if x == f64::INFINITY {
        "\"inf\"".to_string()
    } else if x == f64::NEG_INFINITY {
        "\"-inf\"".to_string()
    } else {
        format!("{x:.16e}")
    }
}

/// An `f64` that serializes through [`format_f64`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Fixed(pub f64);

impl Serialize for Fixed {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let raw = RawValue::from_string(format_f64(self.0)).map_err(serde::ser::Error::custom)?;
        raw.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Fixed {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let v = ExtReal::deserialize(deserializer)?;
        Ok(Fixed(v.to_f64()))
    }
}

impl Serialize for ExtReal {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        Fixed(self.to_f64()).serialize(serializer)
    }
}

struct ExtRealVisitor;

impl<'de> Visitor<'de> for ExtRealVisitor {
    type Value = ExtReal;

    fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("a number or the string \"inf\"")
    }

    fn visit_f64<E: de::Error>(self, v: f64) -> Result<ExtReal, E> {
        Ok(ExtReal::from_f64(v))
    }

    fn visit_i64<E: de::Error>(self, v: i64) -> Result<ExtReal, E> {
        Ok(ExtReal::Finite(v as f64))
    }

    fn visit_u64<E: de::Error>(self, v: u64) -> Result<ExtReal, E> {
        Ok(ExtReal::Finite(v as f64))
    }

    fn visit_str<E: de::Error>(self, v: &str) -> Result<ExtReal, E> {
        match v {
            "inf" | "+inf" => Ok(ExtReal::PosInf),
            other => Err(E::invalid_value(de::Unexpected::Str(other), &self)),
        }
    }
}

impl<'de> Deserialize<'de> for ExtReal {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        deserializer.deserialize_any(ExtRealVisitor)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn infinity_serializes_as_inf_string() {
        let s = serde_json::to_string(&vec![ExtReal::PosInf, ExtReal::Finite(0.25)]).unwrap();
        assert_eq!(s, r#"["inf",2.5000000000000000e-1]"#);
    }

    #[test]
    fn rejects_other_strings() {
        assert!(serde_json::from_str::<ExtReal>("\"nan\"").is_err());
    }

    proptest! {
        #[test]
        fn json_round_trip_is_exact(x in proptest::num::f64::NORMAL | proptest::num::f64::SUBNORMAL | proptest::num::f64::ZERO) {
            let v = ExtReal::Finite(x);
            let back: ExtReal = serde_json::from_str(&serde_json::to_string(&v).unwrap()).unwrap();
            prop_assert_eq!(back, v);
        }
    }
}
