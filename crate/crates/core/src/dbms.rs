//! DBMS handles: a deterministic simulator plus the adapter contract for
//! live systems.

use crate::catalog::{load_catalog_path, ParamKind, Parameter, ParameterCatalog, RawParameter};
use crate::encoder::fnv1a;
use crate::error::{Error, Result};
use crate::value::ConcreteValue;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    /// Lower is better (seconds).
    RunTime,
    /// Higher is better (operations per second).
    Throughput,
}

/// What to run and how to measure it.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BenchmarkSpec {
    pub kind: MetricKind,
    #[serde(default = "default_workload")]
    pub workload: String,
    /// Measurement window for throughput workloads, seconds.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub measure_secs: Option<f64>,
    #[serde(default = "default_repetitions")]
    pub repetitions: u32,
    /// Simulator-only override of the scenario noise seed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise_seed: Option<u64>,
}

fn default_workload() -> String {
    "synthetic".to_string()
}

fn default_repetitions() -> u32 {
    1
}

impl Default for BenchmarkSpec {
    fn default() -> Self {
        BenchmarkSpec {
            kind: MetricKind::RunTime,
            workload: default_workload(),
            measure_secs: None,
            repetitions: 1,
            noise_seed: None,
        }
    }
}

/// A measured benchmark result; strictly positive.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Performance(f64);

impl Performance {
    pub fn new(value: f64) -> Result<Self> {
        if !(value.is_finite() && value > 0.0) {
            return Err(Error::Benchmark(format!("non-positive performance {value}")));
        }
        Ok(Performance(value))
    }

    pub fn value(&self) -> f64 {
        self.0
    }
}

/// Seconds of tuning budget one benchmark run consumes. Run-time metrics
/// charge the measured time itself; throughput metrics charge the
/// configured measurement window.
pub fn time_charge(spec: &BenchmarkSpec, perf: &Performance) -> f64 {
    let reps = spec.repetitions.max(1) as f64;
    match spec.kind {
        MetricKind::RunTime => perf.value() * reps,
        MetricKind::Throughput => spec.measure_secs.unwrap_or(1.0) * reps,
    }
}

/// Uniform DBMS surface: try settings, reset, benchmark.
///
/// `set` never partially applies: it returns Ok(false) and leaves state
/// untouched when the value is inadmissible. Unknown parameters are an error,
/// not a rejection.
pub trait DbmsHandle {
    fn catalog(&self) -> &ParameterCatalog;

    fn set(&mut self, param: &str, value: &ConcreteValue) -> Result<bool>;

    fn get(&self, param: &str) -> Result<ConcreteValue>;

    fn reset_defaults(&mut self) -> Result<()>;

    fn run_benchmark(&mut self, spec: &BenchmarkSpec) -> Result<Performance>;
}

/// Response curve of one performance-sensitive parameter.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SensitiveSpec {
    /// Log-quadratic around the hidden optimum: exp(-k * ln(v/opt)^2).
    Numeric { name: String, opt: f64, k: f64 },
    /// Multiplier applied while the flag is on.
    Boolean { name: String, factor: f64 },
}

impl SensitiveSpec {
    pub fn name(&self) -> &str {
        match self {
            SensitiveSpec::Numeric { name, .. } => name,
            SensitiveSpec::Boolean { name, .. } => name,
        }
    }

    /// Speed factor contributed at value magnitude `v` (higher is better).
    pub fn factor(&self, v: f64) -> f64 {
        match self {
            SensitiveSpec::Numeric { opt, k, .. } => {
                let ratio = (v.max(f64::MIN_POSITIVE)) / opt;
                (-k * ratio.ln().powi(2)).exp()
            }
            SensitiveSpec::Boolean { factor, .. } => {
                if v == 1.0 {
                    *factor
                } else {
                    1.0
                }
            }
        }
    }
}

/// Scenario file: catalog reference, hidden surface, and noise controls.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ScenarioFile {
    pub catalog: CatalogSource,
    pub sensitive: Vec<SensitiveSpec>,
    /// Metric value when every sensitive knob sits at its optimum.
    pub base: f64,
    #[serde(default)]
    pub noise_sigma: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub benchmark: Option<BenchmarkSpec>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CatalogSource {
    Path(String),
    Inline(Vec<RawParameter>),
}

/// Deterministic stand-in for a live DBMS: admissibility checks against the
/// catalog and a multiplicative per-knob performance surface.
#[derive(Clone, Debug)]
pub struct SimulatedDbms {
    catalog: ParameterCatalog,
    assignments: BTreeMap<String, ConcreteValue>,
    sensitive: Vec<SensitiveSpec>,
    base: f64,
    noise_sigma: f64,
    seed: u64,
}

impl SimulatedDbms {
    pub fn new(
        catalog: ParameterCatalog,
        sensitive: Vec<SensitiveSpec>,
        base: f64,
        noise_sigma: f64,
        seed: u64,
    ) -> Result<Self> {
        if !(base.is_finite() && base > 0.0) {
            return Err(Error::Scenario(format!("base must be positive, got {base}")));
        }
        for s in &sensitive {
            let param = catalog
                .get(s.name())
                .ok_or_else(|| Error::Scenario(format!("sensitive knob '{}' not in catalog", s.name())))?;
            match s {
                SensitiveSpec::Numeric { opt, k, .. } => {
                    if !(opt.is_finite() && *opt > 0.0 && k.is_finite() && *k > 0.0) {
                        return Err(Error::Scenario(format!(
                            "knob '{}': opt and k must be positive",
                            s.name()
                        )));
                    }
                }
                SensitiveSpec::Boolean { factor, .. } => {
                    if param.kind != ParamKind::Boolean {
                        return Err(Error::Scenario(format!(
                            "knob '{}' has an on/off curve but is not boolean",
                            s.name()
                        )));
                    }
                    if !(factor.is_finite() && *factor > 0.0) {
                        return Err(Error::Scenario(format!(
                            "knob '{}': factor must be positive",
                            s.name()
                        )));
                    }
                }
            }
        }
        Ok(SimulatedDbms {
            catalog,
            assignments: BTreeMap::new(),
            sensitive,
            base,
            noise_sigma,
            seed,
        })
    }

    pub fn from_scenario(scenario: &ScenarioFile, base_dir: &Path) -> Result<Self> {
        let catalog = match &scenario.catalog {
            CatalogSource::Path(rel) => load_catalog_path(&base_dir.join(rel))?,
            CatalogSource::Inline(raw) => {
                let params = raw
                    .iter()
                    .map(crate::catalog::parameter_from_raw)
                    .collect::<Result<Vec<_>>>()?;
                ParameterCatalog::new(params)?
            }
        };
        SimulatedDbms::new(
            catalog,
            scenario.sensitive.clone(),
            scenario.base,
            scenario.noise_sigma,
            scenario.seed,
        )
    }

    pub fn from_scenario_path(path: &Path) -> Result<(Self, Option<BenchmarkSpec>)> {
        let json = std::fs::read_to_string(path)
            .map_err(|e| Error::Scenario(format!("cannot read {}: {e}", path.display())))?;
        let scenario: ScenarioFile =
            serde_json::from_str(&json).map_err(|e| Error::Scenario(format!("invalid: {e}")))?;
        let base_dir = path.parent().unwrap_or_else(|| Path::new("."));
        let dbms = SimulatedDbms::from_scenario(&scenario, base_dir)?;
        Ok((dbms, scenario.benchmark))
    }

    fn current_magnitude(&self, param: &Parameter) -> f64 {
        self.assignments
            .get(&param.name)
            .map(|v| v.magnitude())
            .unwrap_or_else(|| param.default.magnitude())
    }

    /// Combined speed factor of the current configuration (1.0 = optimal for
    /// numeric knobs at their optima).
    pub fn speed_factor(&self) -> f64 {
        self.sensitive
            .iter()
            .map(|s| {
                let param = self.catalog.get(s.name()).expect("validated at construction");
                s.factor(self.current_magnitude(param))
            })
            .product()
    }

    /// Noise-free metric value for the current configuration.
    pub fn surface_value(&self, kind: MetricKind) -> f64 {
        let g = self.speed_factor();
        match kind {
            MetricKind::RunTime => self.base / g,
            MetricKind::Throughput => self.base * g,
        }
    }

    /// Closed-form optimum of the surface: every numeric knob at its optimum,
    /// every boolean knob on its better side.
    pub fn optimal_value(&self, kind: MetricKind) -> f64 {
        let g: f64 = self
            .sensitive
            .iter()
            .map(|s| match s {
                SensitiveSpec::Numeric { .. } => 1.0,
                SensitiveSpec::Boolean { factor, .. } => factor.max(1.0),
            })
            .product();
        match kind {
            MetricKind::RunTime => self.base / g,
            MetricKind::Throughput => self.base * g,
        }
    }

    /// Noise is a pure function of (seed, configuration, workload), so
    /// repeated runs of the same configuration measure identically.
    fn noise(&self, spec: &BenchmarkSpec) -> f64 {
        if self.noise_sigma == 0.0 {
            return 1.0;
        }
        let mut key = Vec::new();
        key.extend_from_slice(&spec.noise_seed.unwrap_or(self.seed).to_le_bytes());
        key.extend_from_slice(spec.workload.as_bytes());
        for (name, value) in &self.assignments {
            key.extend_from_slice(name.as_bytes());
            key.extend_from_slice(&value.magnitude().to_bits().to_le_bytes());
        }
        let h = fnv1a(&key);
        // Box-Muller on two uniforms derived from the hash
        let u1 = ((h >> 11) as f64 + 1.0) / (1u64 << 53) as f64;
        let u2 = ((fnv1a(&h.to_le_bytes()) >> 11) as f64 + 0.5) / (1u64 << 53) as f64;
        let z = (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos();
        (self.noise_sigma * z).exp()
    }
}

impl DbmsHandle for SimulatedDbms {
    fn catalog(&self) -> &ParameterCatalog {
        &self.catalog
    }

    fn set(&mut self, param: &str, value: &ConcreteValue) -> Result<bool> {
        let p = self
            .catalog
            .get(param)
            .ok_or_else(|| Error::UnknownParameter(param.to_string()))?;
        if !p.accepts(value) {
            return Ok(false);
        }
        self.assignments.insert(param.to_string(), *value);
        Ok(true)
    }

    fn get(&self, param: &str) -> Result<ConcreteValue> {
        let p = self
            .catalog
            .get(param)
            .ok_or_else(|| Error::UnknownParameter(param.to_string()))?;
        Ok(self.assignments.get(param).copied().unwrap_or(p.default))
    }

    fn reset_defaults(&mut self) -> Result<()> {
        self.assignments.clear();
        Ok(())
    }

    fn run_benchmark(&mut self, spec: &BenchmarkSpec) -> Result<Performance> {
        Performance::new(self.surface_value(spec.kind) * self.noise(spec))
    }
}
