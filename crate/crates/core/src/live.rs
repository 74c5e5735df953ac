//! Live DBMS adapter driven by user-supplied shell command templates.
//!
//! Session lifecycle: apply settings one by one, optionally restart, run the
//! workload command and read the metric from its stdout. Concrete SQL drivers
//! live behind the same `DbmsHandle` trait; this generic driver is meant for
//! manual use and is never exercised by the hermetic test suites.

use crate::catalog::{load_catalog_path, ParameterCatalog};
use crate::dbms::{BenchmarkSpec, DbmsHandle, Performance};
use crate::error::{Error, Result};
use crate::value::ConcreteValue;
use serde::Deserialize;
use std::collections::BTreeMap;
use std::path::Path;
use std::process::Command;

/// Configuration file for the command driver.
///
/// Templates may use `{param}`, `{value}`, and `{workload}` placeholders.
/// The set command should exit 0 when the setting was accepted and 1 when the
/// DBMS rejected it; any other exit code is treated as an environment error.
#[derive(Clone, Debug, Deserialize)]
pub struct CommandDbmsConfig {
    pub catalog: String,
    pub set_command: String,
    pub reset_command: String,
    pub benchmark_command: String,
    #[serde(default)]
    pub restart_command: Option<String>,
}

pub struct CommandDbms {
    config: CommandDbmsConfig,
    catalog: ParameterCatalog,
    applied: BTreeMap<String, ConcreteValue>,
}

impl CommandDbms {
    pub fn from_config_path(path: &Path) -> Result<Self> {
        let json = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let config: CommandDbmsConfig =
            serde_json::from_str(&json).map_err(|e| Error::Config(format!("invalid: {e}")))?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        let catalog = load_catalog_path(&base.join(&config.catalog))?;
        Ok(CommandDbms { config, catalog, applied: BTreeMap::new() })
    }

    fn run(&self, template: &str, param: &str, value: &str, workload: &str) -> Result<std::process::Output> {
        let cmd = template
            .replace("{param}", param)
            .replace("{value}", value)
            .replace("{workload}", workload);
        Command::new("sh")
            .arg("-c")
            .arg(&cmd)
            .output()
            .map_err(|e| Error::Dbms(format!("cannot spawn '{cmd}': {e}")))
    }
}

impl DbmsHandle for CommandDbms {
    fn catalog(&self) -> &ParameterCatalog {
        &self.catalog
    }

    fn set(&mut self, param: &str, value: &ConcreteValue) -> Result<bool> {
        let p = self
            .catalog
            .get(param)
            .ok_or_else(|| Error::UnknownParameter(param.to_string()))?
            .clone();
        let out = self.run(&self.config.set_command, &p.name, &value.render(), "")?;
        match out.status.code() {
            Some(0) => {
                self.applied.insert(param.to_string(), *value);
                Ok(true)
            }
            Some(1) => Ok(false),
            code => Err(Error::Dbms(format!(
                "set command failed with status {code:?}: {}",
                String::from_utf8_lossy(&out.stderr)
            ))),
        }
    }

    fn get(&self, param: &str) -> Result<ConcreteValue> {
        let p = self
            .catalog
            .get(param)
            .ok_or_else(|| Error::UnknownParameter(param.to_string()))?;
        Ok(self.applied.get(param).copied().unwrap_or(p.default))
    }

    fn reset_defaults(&mut self) -> Result<()> {
        let out = self.run(&self.config.reset_command, "", "", "")?;
        if !out.status.success() {
            return Err(Error::Dbms(format!(
                "reset command failed: {}",
                String::from_utf8_lossy(&out.stderr)
            )));
        }
        self.applied.clear();
        Ok(())
    }

    fn run_benchmark(&mut self, spec: &BenchmarkSpec) -> Result<Performance> {
        if let Some(restart) = &self.config.restart_command {
            let out = self.run(restart, "", "", &spec.workload)?;
            if !out.status.success() {
                return Err(Error::Dbms(format!(
                    "restart command failed: {}",
                    String::from_utf8_lossy(&out.stderr)
                )));
            }
        }
        let out = self.run(&self.config.benchmark_command, "", "", &spec.workload)?;
        if !out.status.success() {
            return Err(Error::Benchmark(format!(
                "benchmark command failed: {}",
                String::from_utf8_lossy(&out.stderr)
            )));
        }
        let stdout = String::from_utf8_lossy(&out.stdout);
        let metric = stdout
            .lines()
            .rev()
            .find_map(|l| l.trim().parse::<f64>().ok())
            .ok_or_else(|| {
                Error::Benchmark(format!("no numeric metric on benchmark stdout: {stdout:?}"))
            })?;
        Performance::new(metric)
    }
}
