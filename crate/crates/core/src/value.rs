//! Typed scalar values shared by the catalog, the extractor, and the tuner.

use serde::{Deserialize, Serialize};
use std::fmt;

/// Measurement unit attached to parameter domains and extracted values.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Unit {
    Bytes,
    Count,
    Fraction,
    Dimensionless,
}

impl fmt::Display for Unit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Unit::Bytes => "bytes",
            Unit::Count => "count",
            Unit::Fraction => "fraction",
            Unit::Dimensionless => "dimensionless",
        };
        f.write_str(s)
    }
}

/// Scalar payload. Integers stay exact; reals are only produced where the
/// source genuinely carries a fractional part.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Scalar {
    Bool(bool),
    Int(i64),
    Real(f64),
}

/// A scalar plus its unit tag.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConcreteValue {
    pub scalar: Scalar,
    pub unit: Unit,
}

impl ConcreteValue {
    pub fn int(v: i64, unit: Unit) -> Self {
        ConcreteValue { scalar: Scalar::Int(v), unit }
    }

    pub fn real(v: f64, unit: Unit) -> Self {
        ConcreteValue { scalar: Scalar::Real(v), unit }
    }

    pub fn boolean(v: bool) -> Self {
        ConcreteValue { scalar: Scalar::Bool(v), unit: Unit::Dimensionless }
    }

    /// Numeric magnitude in the value's canonical unit (booleans map to 0/1).
    pub fn magnitude(&self) -> f64 {
        match self.scalar {
            Scalar::Bool(b) => {
                if b {
                    1.0
                } else {
                    0.0
                }
            }
            Scalar::Int(i) => i as f64,
            Scalar::Real(r) => r,
        }
    }

    /// Key for deduplication: values compare equal when unit and magnitude match,
    /// regardless of integer/real representation.
    pub fn canonical_key(&self) -> (Unit, u64) {
        (self.unit, self.magnitude().to_bits())
    }

    /// Rendering used in properties files and reports.
    pub fn render(&self) -> String {
        match self.scalar {
            Scalar::Bool(b) => if b { "on" } else { "off" }.to_string(),
            Scalar::Int(i) => i.to_string(),
            Scalar::Real(r) => format!("{r}"),
        }
    }

    /// JSON representation of the bare scalar (used in logs and hint dumps).
    pub fn scalar_json(&self) -> serde_json::Value {
        match self.scalar {
            Scalar::Bool(b) => serde_json::Value::Bool(b),
            Scalar::Int(i) => serde_json::Value::from(i),
            Scalar::Real(r) => serde_json::Value::from(r),
        }
    }
}

impl fmt::Display for ConcreteValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.render())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn magnitude_covers_all_variants() {
        assert_eq!(ConcreteValue::boolean(true).magnitude(), 1.0);
        assert_eq!(ConcreteValue::int(-3, Unit::Dimensionless).magnitude(), -3.0);
        assert_eq!(ConcreteValue::real(0.25, Unit::Fraction).magnitude(), 0.25);
    }

    #[test]
    fn canonical_key_merges_int_and_real() {
        let a = ConcreteValue::int(2, Unit::Bytes);
        let b = ConcreteValue::real(2.0, Unit::Bytes);
        assert_eq!(a.canonical_key(), b.canonical_key());
        let c = ConcreteValue::int(2, Unit::Count);
        assert_ne!(a.canonical_key(), c.canonical_key());
    }

    #[test]
    fn render_forms() {
        assert_eq!(ConcreteValue::boolean(false).render(), "off");
        assert_eq!(ConcreteValue::int(2147483648, Unit::Bytes).render(), "2147483648");
        assert_eq!(ConcreteValue::real(0.9, Unit::Fraction).render(), "0.9");
    }
}
