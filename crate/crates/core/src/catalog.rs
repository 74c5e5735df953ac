//! The DBMS parameter catalog: names, kinds, defaults, and admissible ranges.

use crate::error::{Error, Result};
use crate::value::{ConcreteValue, Scalar, Unit};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::io::Read;
use std::sync::Arc;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamKind {
    Integer,
    Boolean,
    Numeric,
}

/// A single tuning knob.
#[derive(Clone, Debug, PartialEq)]
pub struct Parameter {
    pub name: String,
    pub kind: ParamKind,
    pub default: ConcreteValue,
    pub min: Option<ConcreteValue>,
    pub max: Option<ConcreteValue>,
    /// Accepted values must be integer multiples of this step.
    pub granularity: Option<f64>,
    pub unit: Unit,
}

impl Parameter {
    /// Name with underscores spelled out, for text-similarity matching.
    pub fn display_name(&self) -> String {
        self.name.replace('_', " ")
    }

    /// Admissibility check used by the simulator: kind, bounds, granularity.
    pub fn accepts(&self, value: &ConcreteValue) -> bool {
        let m = value.magnitude();
        if !m.is_finite() {
            return false;
        }
        match self.kind {
            ParamKind::Boolean => {
                if m != 0.0 && m != 1.0 {
                    return false;
                }
            }
            ParamKind::Integer => {
                let integral = match value.scalar {
                    Scalar::Int(_) => true,
                    Scalar::Real(r) => r.fract() == 0.0,
                    Scalar::Bool(_) => false,
                };
                if !integral {
                    return false;
                }
            }
            ParamKind::Numeric => {
                if matches!(value.scalar, Scalar::Bool(_)) {
                    return false;
                }
            }
        }
        if let Some(min) = &self.min {
            if m < min.magnitude() {
                return false;
            }
        }
        if let Some(max) = &self.max {
            if m > max.magnitude() {
                return false;
            }
        }
        if let Some(g) = self.granularity {
            let steps = m / g;
            if (steps - steps.round()).abs() > 1e-9 * steps.abs().max(1.0) {
                return false;
            }
        }
        true
    }
}

/// Ordered set of parameters, unique by name.
#[derive(Clone, Debug)]
pub struct ParameterCatalog {
    params: Vec<Arc<Parameter>>,
    index: HashMap<String, usize>,
}

impl ParameterCatalog {
    pub fn new(params: Vec<Parameter>) -> Result<Self> {
        if params.is_empty() {
            return Err(Error::Catalog("catalog is empty".into()));
        }
        let mut index = HashMap::new();
        let mut out = Vec::with_capacity(params.len());
        for p in params {
            validate_parameter(&p)?;
            if index.insert(p.name.clone(), out.len()).is_some() {
                return Err(Error::Catalog(format!("duplicate parameter '{}'", p.name)));
            }
            out.push(Arc::new(p));
        }
        Ok(ParameterCatalog { params: out, index })
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Arc<Parameter>> {
        self.params.iter()
    }

    pub fn get(&self, name: &str) -> Option<&Arc<Parameter>> {
        self.index.get(name).map(|&i| &self.params[i])
    }
}

fn validate_parameter(p: &Parameter) -> Result<()> {
    let ctx = |msg: String| Error::Catalog(format!("parameter '{}': {}", p.name, msg));
    if p.name.trim().is_empty() {
        return Err(Error::Catalog("parameter with empty name".into()));
    }
    if let Some(g) = p.granularity {
        if g <= 0.0 || !g.is_finite() {
            return Err(ctx(format!("granularity must be positive, got {g}")));
        }
    }
    let d = p.default.magnitude();
    if p.kind == ParamKind::Boolean && d != 0.0 && d != 1.0 {
        return Err(ctx(format!("boolean default must be 0 or 1, got {d}")));
    }
    if let (Some(min), Some(max)) = (&p.min, &p.max) {
        if min.magnitude() > max.magnitude() {
            return Err(ctx(format!(
                "min {} exceeds max {}",
                min.magnitude(),
                max.magnitude()
            )));
        }
    }
    if let Some(min) = &p.min {
        if d < min.magnitude() {
            return Err(ctx(format!("default {d} below min {}", min.magnitude())));
        }
    }
    if let Some(max) = &p.max {
        if d > max.magnitude() {
            return Err(ctx(format!("default {d} above max {}", max.magnitude())));
        }
    }
    Ok(())
}

/// On-disk form of a catalog entry.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RawParameter {
    pub name: String,
    pub kind: ParamKind,
    pub default: serde_json::Value,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min: Option<serde_json::Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max: Option<serde_json::Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub granularity: Option<f64>,
    pub unit: Unit,
}

fn scalar_from_json(raw: &serde_json::Value, kind: ParamKind, what: &str, name: &str) -> Result<Scalar> {
    let err = |msg: String| Error::Catalog(format!("parameter '{name}': {what}: {msg}"));
    match raw {
        serde_json::Value::Bool(b) => Ok(Scalar::Bool(*b)),
        serde_json::Value::Number(n) => match kind {
            ParamKind::Integer => n
                .as_i64()
                .map(Scalar::Int)
                .ok_or_else(|| err(format!("expected integer, got {n}"))),
            ParamKind::Boolean => match n.as_i64() {
                Some(0) => Ok(Scalar::Bool(false)),
                Some(1) => Ok(Scalar::Bool(true)),
                _ => Err(err(format!("boolean value must be 0 or 1, got {n}"))),
            },
            ParamKind::Numeric => {
                if let Some(i) = n.as_i64() {
                    Ok(Scalar::Int(i))
                } else {
                    n.as_f64()
                        .map(Scalar::Real)
                        .ok_or_else(|| err(format!("unrepresentable number {n}")))
                }
            }
        },
        other => Err(err(format!("expected number or boolean, got {other}"))),
    }
}

pub fn parameter_from_raw(raw: &RawParameter) -> Result<Parameter> {
    let value = |v: &serde_json::Value, what: &str| -> Result<ConcreteValue> {
        Ok(ConcreteValue {
            scalar: scalar_from_json(v, raw.kind, what, &raw.name)?,
            unit: raw.unit,
        })
    };
    Ok(Parameter {
        name: raw.name.clone(),
        kind: raw.kind,
        default: value(&raw.default, "default")?,
        min: raw.min.as_ref().map(|v| value(v, "min")).transpose()?,
        max: raw.max.as_ref().map(|v| value(v, "max")).transpose()?,
        granularity: raw.granularity,
        unit: raw.unit,
    })
}

/// Load a catalog from its JSON form: an array of
/// `{"name","kind","default","min","max","granularity","unit"}` objects.
pub fn load_catalog<R: Read>(source: R) -> Result<ParameterCatalog> {
    let raw: Vec<RawParameter> =
        serde_json::from_reader(source).map_err(|e| Error::Catalog(format!("invalid JSON: {e}")))?;
    let params = raw.iter().map(parameter_from_raw).collect::<Result<Vec<_>>>()?;
    ParameterCatalog::new(params)
}

pub fn load_catalog_path(path: &std::path::Path) -> Result<ParameterCatalog> {
    let file = std::fs::File::open(path)
        .map_err(|e| Error::Catalog(format!("cannot open {}: {e}", path.display())))?;
    load_catalog(std::io::BufReader::new(file))
}
