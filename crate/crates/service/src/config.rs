use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use faircompass_core::metrics::{DEFAULT_MIN_STRATUM_SIZE, DEFAULT_PARITY_THRESHOLD};
use faircompass_core::subgroup::DEFAULT_MAX_COMBINATIONS;
use faircompass_core::suggest::{DEFAULT_DOMINANCE, DEFAULT_K, DEFAULT_MAX_ITER, DEFAULT_SEED};

use crate::error::ServiceError;

/// Service settings, read from TOML.
///
/// ```toml
/// listen = "127.0.0.1:8080"
/// max_dataset_bytes = 52428800
/// store_path = "./faircompass-store"
/// # tree_path = "compass.json"
///
/// [defaults]
/// threshold = 0.1
/// seed = 42
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceConfig {
    pub listen: String,
    pub max_dataset_bytes: usize,
    pub store_path: PathBuf,
    /// Tree document to serve instead of the bundled one.
    pub tree_path: Option<PathBuf>,
    pub defaults: Defaults,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Defaults {
    pub threshold: f64,
    pub min_stratum_size: usize,
    pub max_combinations: usize,
    pub seed: u64,
    pub k: usize,
    pub dominance_threshold: f64,
    pub max_iter: usize,
}

impl Default for Defaults {
    fn default() -> Self {
        Self {
            threshold: DEFAULT_PARITY_THRESHOLD,
            min_stratum_size: DEFAULT_MIN_STRATUM_SIZE,
            max_combinations: DEFAULT_MAX_COMBINATIONS,
            seed: DEFAULT_SEED,
            k: DEFAULT_K,
            dominance_threshold: DEFAULT_DOMINANCE,
            max_iter: DEFAULT_MAX_ITER,
        }
    }
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            listen: "127.0.0.1:8080".into(),
            max_dataset_bytes: 50 * 1024 * 1024,
            store_path: PathBuf::from("faircompass-store"),
            tree_path: None,
            defaults: Defaults::default(),
        }
    }
}

impl ServiceConfig {
    pub fn from_toml(text: &str) -> Result<Self, ServiceError> {
        let config: Self = toml::from_str(text).map_err(|e| ServiceError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, ServiceError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ServiceError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<(), ServiceError> {
        let bad = |msg: &str| Err(ServiceError::Config(msg.to_string()));
        if self.max_dataset_bytes == 0 {
            return bad("max_dataset_bytes must be positive");
        }
        let d = &self.defaults;
        if d.k == 0 || d.max_iter == 0 || d.max_combinations == 0 {
            return bad("defaults.k, defaults.max_iter and defaults.max_combinations must be positive");
        }
        if !(d.threshold >= 0.0 && d.threshold.is_finite()) {
            return bad("defaults.threshold must be a non-negative number");
        }
        if !(0.0..=1.0).contains(&d.dominance_threshold) {
            return bad("defaults.dominance_threshold must be within [0, 1]");
        }
        if let Some(tree) = &self.tree_path {
            if std::fs::metadata(tree).is_err() {
                return Err(ServiceError::Config(format!(
                    "tree file {} is not readable",
                    tree.display()
                )));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_documents_fill_defaults() {
        let c = ServiceConfig::from_toml("listen = \"0.0.0.0:9000\"\n[defaults]\nseed = 7\n").unwrap();
        assert_eq!(c.listen, "0.0.0.0:9000");
        assert_eq!(c.defaults.seed, 7);
        assert_eq!(c.defaults.k, DEFAULT_K);
    }

    #[test]
    fn invalid_values_are_rejected() {
        assert!(ServiceConfig::from_toml("max_dataset_bytes = 0").is_err());
        assert!(ServiceConfig::from_toml("[defaults]\nk = 0").is_err());
        assert!(ServiceConfig::from_toml("tree_path = \"/no/such/tree.json\"").is_err());
        assert!(ServiceConfig::from_toml("colour = \"blue\"").is_err());
    }
}
