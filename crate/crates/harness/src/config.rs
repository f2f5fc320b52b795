use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use hlab_core::operators::KernelSpec;
use hlab_core::varexp::{ExponentFunction, ExponentSpec};
use hlab_core::{Dimension, IntegrationSpec};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{HarnessError, Result};

/// One experiment run as read from a JSON document.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct ExperimentConfig {
    pub experiment: String,
    pub n: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub kernels: Vec<KernelSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exponent: Option<ExponentSpec>,
    #[serde(default)]
    pub samples: BTreeMap<String, usize>,
    pub seed: u64,
    pub tolerance: f64,
    /// Pass/fail bounds by name.
    #[serde(default)]
    pub thresholds: BTreeMap<String, f64>,
    /// Experiment-specific parameters.
    #[serde(default, skip_serializing_if = "serde_json::Value::is_null")]
    pub params: serde_json::Value,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            serde_json::from_str(text).map_err(|e| HarnessError::config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let dim = self.dim()?;
        if let Some(k) = self.kernels.iter().find(|k| k.dim() != dim) {
            return Err(HarnessError::config(format!(
                "kernel dimension n={} differs from n={}",
                k.dim().n(),
                self.n
            )));
        }
        if !(self.tolerance > 0.0 && self.tolerance < 1.0) {
            return Err(HarnessError::config(format!(
                "tolerance must lie in (0, 1), got {}",
                self.tolerance
            )));
        }
        if let Some((k, v)) = self.thresholds.iter().find(|(_, v)| !v.is_finite()) {
            return Err(HarnessError::config(format!(
                "threshold {k} is not finite: {v}"
            )));
        }
        if self.exponent.is_some() {
            self.exponent_function()?;
        }
        if !(self.params.is_null() || self.params.is_object()) {
            return Err(HarnessError::config("params must be an object"));
        }
        Ok(())
    }

    pub fn dim(&self) -> Result<Dimension> {
        Dimension::new(self.n).map_err(|e| HarnessError::config(e.to_string()))
    }

    pub fn exponent_function(&self) -> Result<ExponentFunction> {
        let spec = self
            .exponent
            .clone()
            .ok_or_else(|| HarnessError::config("an exponent is required"))?;
        ExponentFunction::new(self.dim()?, spec).map_err(|e| HarnessError::config(e.to_string()))
    }

    pub fn threshold(&self, name: &str) -> Result<f64> {
        self.thresholds
            .get(name)
            .copied()
            .ok_or_else(|| HarnessError::config(format!("missing threshold `{name}`")))
    }

    pub fn sample_count(&self, name: &str) -> Result<usize> {
        match self.samples.get(name) {
            Some(0) => Err(HarnessError::config(format!(
                "sample count `{name}` is zero"
            ))),
            Some(v) => Ok(*v),
            None => Err(HarnessError::config(format!(
                "missing sample count `{name}`"
            ))),
        }
    }

    pub fn kernel(&self, index: usize) -> Result<&KernelSpec> {
        self.kernels
            .get(index)
            .ok_or_else(|| HarnessError::config(format!("missing kernel #{index}")))
    }

    pub fn params<T: DeserializeOwned>(&self) -> Result<T> {
        let v = if self.params.is_null() {
            serde_json::Value::Object(Default::default())
        } else {
            self.params.clone()
        };
        serde_json::from_value(v).map_err(|e| HarnessError::config(format!("params: {e}")))
    }

    pub fn integration(&self, seed: u64) -> IntegrationSpec {
        IntegrationSpec::grid(self.tolerance).with_seed(seed)
    }

    /// SHA-256 of the canonical JSON form, ignoring the seed and output directory.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.seed = 0;
        c.out = None;
        let value = serde_json::to_value(&c).expect("config serializes");
        let text = serde_json::to_string(&value).expect("value serializes");
        hex::encode(Sha256::digest(text.as_bytes()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{"experiment": "group-axioms", "n": 1, "seed": 3, "tolerance": 1e-6}"#;

    #[test]
    fn hash_ignores_seed_and_key_order() {
        let a = ExperimentConfig::from_json(MINIMAL).unwrap();
        let b = ExperimentConfig::from_json(
            r#"{"tolerance": 1e-6, "seed": 99, "n": 1, "experiment": "group-axioms", "out": "x"}"#,
        )
        .unwrap();
        assert_eq!(a.hash(), b.hash());
        let mut c = a.clone();
        c.tolerance = 1e-7;
        assert_ne!(a.hash(), c.hash());
    }

    #[test]
    fn invalid_documents_are_config_errors() {
        for bad in [
            r#"{"experiment": "x", "n": 0, "seed": 1, "tolerance": 1e-6}"#,
            r#"{"experiment": "x", "n": 1, "seed": 1, "tolerance": 2.0}"#,
            r#"{"experiment": "x", "n": 1, "seed": 1, "tolerance": 1e-6, "bogus": 1}"#,
            r#"{"experiment": "x", "n": 1, "seed": 1, "tolerance": 1e-6,
                "kernels": [{"n": 1, "alpha": 0.0, "alphas": [2.0, 2.0], "radii": [1.0, 1.0]}]}"#,
            r#"{"experiment": "x", "n": 1, "seed": 1, "tolerance": 1e-6,
                "exponent": {"kind": "constant", "value": -1.0}}"#,
        ] {
            let err = ExperimentConfig::from_json(bad).unwrap_err();
            assert_eq!(err.exit_code(), 2, "{bad}");
        }
    }

    #[test]
    fn missing_thresholds_are_reported_by_name() {
        let a = ExperimentConfig::from_json(MINIMAL).unwrap();
        let err = a.threshold("max-error").unwrap_err();
        assert!(err.to_string().contains("max-error"));
    }
}
