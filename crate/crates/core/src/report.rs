//! Run configurations and JSON reports.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::exponent::Exponent;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub command: String,
    #[serde(default)]
    pub inputs: Vec<String>,
    #[serde(default)]
    pub exponents: BTreeMap<String, Exponent>,
    #[serde(default)]
    pub sizes: BTreeMap<String, usize>,
    pub seed: u64,
    pub tolerance: f64,
    #[serde(default)]
    pub output: Option<String>,
}

impl RunConfig {
    pub fn new(command: &str, seed: u64, tolerance: f64) -> Self {
        RunConfig {
            command: command.into(),
            inputs: vec![],
            exponents: BTreeMap::new(),
            sizes: BTreeMap::new(),
            seed,
            tolerance,
            output: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0 && self.tolerance.is_finite()) {
            return Err(Error::InvalidArgument(format!("tolerance must be positive, got {}", self.tolerance)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub config: RunConfig,
    pub results: Vec<Value>,
    pub ok: bool,
    pub failures: Vec<String>,
    pub wall_time_ms: u64,
    pub version: &'static str,
    pub oracle_flags: Vec<String>,
}

impl Report {
    pub fn new(config: RunConfig) -> Self {
        Report { config, results: vec![], ok: true, failures: vec![], wall_time_ms: 0, version: VERSION, oracle_flags: vec![] }
    }

    pub fn push<T: Serialize>(&mut self, item: &T) -> Result<()> {
        let v = serde_json::to_value(item).map_err(|e| Error::InvalidArgument(format!("serialization: {e}")))?;
        self.results.push(v);
        Ok(())
    }

    pub fn fail(&mut self, why: impl Into<String>) {
        self.ok = false;
        self.failures.push(why.into());
    }

    /// Everything except the wall time and the suite's own timings.
    pub fn payload(&self) -> Value {
        let mut v = serde_json::to_value(self).unwrap_or(Value::Null);
        if let Value::Object(m) = &mut v {
            m.remove("wall_time_ms");
        }
        strip_keys(&mut v, &["elapsed_ms"]);
        v
    }

    /// Pretty JSON, after checking that every lower/upper pair is ordered.
    pub fn to_json(&self) -> Result<String> {
        for v in &self.results {
            check_intervals(v, self.config.tolerance)?;
        }
        serde_json::to_string_pretty(self).map_err(|e| Error::InvalidArgument(format!("serialization: {e}")))
    }
}

fn strip_keys(v: &mut Value, keys: &[&str]) {
    match v {
        Value::Object(m) => {
            for k in keys {
                m.remove(*k);
            }
            m.values_mut().for_each(|x| strip_keys(x, keys));
        }
        Value::Array(a) => a.iter_mut().for_each(|x| strip_keys(x, keys)),
        _ => {}
    }
}

/// Every object carrying numeric `lower` and `upper` must satisfy lower ≤ upper + tol·(1 + |upper|).
pub fn check_intervals(v: &Value, tol: f64) -> Result<()> {
    match v {
        Value::Object(m) => {
            if let (Some(lo), Some(up)) = (m.get("lower").and_then(Value::as_f64), m.get("upper").and_then(Value::as_f64)) {
                if lo > up + tol * (1.0 + up.abs()) {
                    return Err(Error::InvalidArgument(format!("interval out of order: lower {lo} > upper {up}")));
                }
            }
            m.values().try_for_each(|x| check_intervals(x, tol))
        }
        Value::Array(a) => a.iter().try_for_each(|x| check_intervals(x, tol)),
        _ => Ok(()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn interval_assertion() {
        assert!(check_intervals(&json!({"a": [{"lower": 1.0, "upper": 1.0}]}), 1e-9).is_ok());
        assert!(check_intervals(&json!({"lower": 1.0, "upper": null}), 1e-9).is_ok());
        assert!(check_intervals(&json!([{"x": {"lower": 2.0, "upper": 1.0}}]), 1e-9).is_err());
    }

    #[test]
    fn payload_drops_timings() {
        let mut r = Report::new(RunConfig::new("verify", 1, 1e-9));
        r.wall_time_ms = 17;
        r.push(&json!({"elapsed_ms": 3, "value": 0.1})).unwrap();
        let p = r.payload();
        assert!(p.get("wall_time_ms").is_none());
        assert_eq!(p["results"][0], json!({"value": 0.1}));
    }

    #[test]
    fn doubles_round_trip() {
        let xs = [0.1, 1.0 / 3.0, 2f64.sqrt(), 1e-300, 123456789.123456789];
        let s = serde_json::to_string(&xs).unwrap();
        let back: Vec<f64> = serde_json::from_str(&s).unwrap();
        assert_eq!(back, xs);
    }

    #[test]
    fn tolerance_must_be_positive() {
        assert!(RunConfig::new("rho", 0, 0.0).validate().is_err());
        assert!(RunConfig::new("rho", 0, f64::NAN).validate().is_err());
        assert!(RunConfig::new("rho", 0, 1e-9).validate().is_ok());
    }
}
