use std::fs;
use std::path::Path;

use chainfree::lattice::Band;
use chainfree::{ChainPattern, Error, ForbiddenFamily, WeightVector};
use serde::{Deserialize, Serialize};

pub const SCHEMA: &str = "chainfree/v1";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Exact,
    Sample,
}

/// Problem description shared by every command. Reports embed the
/// effective config (file values overridden by flags).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    #[serde(default = "schema")]
    pub schema: String,
    pub m: usize,
    /// Color sequences read bottom to top.
    pub patterns: Vec<Vec<u8>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<Vec<f64>>,
    /// Color probabilities for `expect` and `sample`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub band: Option<[u32; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<Mode>,
}

fn schema() -> String {
    SCHEMA.to_string()
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{path}: cannot read: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}: {field}: {message}")]
    Malformed { path: String, field: String, message: String },
    #[error("{0}")]
    Invalid(String),
}

impl ProblemConfig {
    pub fn new(m: usize, patterns: Vec<Vec<u8>>) -> ProblemConfig {
        ProblemConfig {
            schema: schema(),
            m,
            patterns,
            beta: None,
            p: None,
            seed: None,
            n: None,
            alpha: None,
            delta: None,
            tau: None,
            samples: None,
            band: None,
            mode: None,
        }
    }

    pub fn from_json(text: &str, origin: &str) -> Result<ProblemConfig, ConfigError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: ProblemConfig = serde_path_to_error::deserialize(de).map_err(|e| ConfigError::Malformed {
            path: origin.to_string(),
            field: field_name(e.path()),
            message: e.inner().to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<ProblemConfig, ConfigError> {
        let text = read(path)?;
        ProblemConfig::from_json(&text, &path.display().to_string())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes") + "\n"
    }

    /// Checks everything that can be checked without a command.
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.schema != SCHEMA {
            return Err(ConfigError::Invalid(format!("schema: expected \"{SCHEMA}\", found \"{}\"", self.schema)));
        }
        self.family()?;
        self.weights()?;
        if let Some(p) = &self.p {
            WeightVector::new(p.clone()).map_err(|e| prefixed("p", e))?;
        }
        if let Some([lo, hi]) = self.band {
            if lo > hi {
                return Err(ConfigError::Invalid(format!("band: lower end {lo} exceeds upper end {hi}")));
            }
        }
        Ok(())
    }

    pub fn family(&self) -> Result<ForbiddenFamily, ConfigError> {
        let patterns = self.patterns.iter().map(|p| ChainPattern::new(p.iter().copied())).collect();
        ForbiddenFamily::new(self.m, patterns).map_err(|e| ConfigError::Invalid(e.to_string()))
    }

    pub fn weights(&self) -> Result<WeightVector, ConfigError> {
        let w = match &self.beta {
            Some(b) => WeightVector::new(b.clone()).map_err(|e| ConfigError::Invalid(e.to_string()))?,
            None => WeightVector::ones(self.m),
        };
        w.check_colors(self.m).map_err(|e| prefixed("beta", e))?;
        Ok(w)
    }

    pub fn band(&self, n: u32) -> Result<Option<Band>, ConfigError> {
        self.band
            .map(|[lo, hi]| Band::new(lo, hi, n).map_err(|e| prefixed("band", e)))
            .transpose()
    }
}

fn prefixed(field: &str, e: Error) -> ConfigError {
    ConfigError::Invalid(format!("{field}: {e}"))
}

fn field_name(path: &serde_path_to_error::Path) -> String {
    let s = path.to_string();
    if s == "." { "document".into() } else { s }
}

pub fn read(path: &Path) -> Result<String, ConfigError> {
    fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.display().to_string(), source })
}
