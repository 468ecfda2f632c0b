//! Run configuration, read from TOML. Unknown keys are rejected.

use std::path::{Path, PathBuf};

use padic_harmonics::ring::{Branch, RingLevel};
use serde::Deserialize;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("cannot parse configuration: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RingSection {
    pub branch: String,
    pub p: u32,
    pub f: u32,
    /// Working level `M`.
    pub level: u32,
}

impl Default for RingSection {
    fn default() -> Self {
        RingSection {
            branch: "padic".into(),
            p: 2,
            f: 1,
            level: 2,
        }
    }
}

/// Characters for principal series runs, one per diagonal entry, each given
/// by its conductor and its position among the characters of that conductor.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CharacterSection {
    pub conductors: Vec<u32>,
    pub indices: Vec<usize>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSection {
    pub seed: u64,
    pub samples: usize,
    /// Cap on closure and enumeration sizes.
    pub budget: usize,
}

impl Default for RunSection {
    fn default() -> Self {
        RunSection {
            seed: 0,
            samples: 200,
            budget: 2_000_000,
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ArchSection {
    /// "real", "complex" or "both".
    pub branch: String,
    pub real_max_degree: u32,
    pub real_max_n: usize,
    pub complex_max_degree: u32,
    pub complex_max_n: usize,
}

impl Default for ArchSection {
    fn default() -> Self {
        ArchSection {
            branch: "both".into(),
            real_max_degree: 6,
            real_max_n: 4,
            complex_max_degree: 5,
            complex_max_n: 3,
        }
    }
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub ring: RingSection,
    pub n: Option<usize>,
    pub characters: CharacterSection,
    pub run: RunSection,
    pub arch: ArchSection,
    pub output: Option<PathBuf>,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<RunConfig, ConfigError> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<RunConfig, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml(&text)
    }

    pub fn n(&self) -> usize {
        self.n.unwrap_or(2)
    }

    pub fn branch(&self) -> Result<Branch, ConfigError> {
        match self.ring.branch.as_str() {
            "padic" => Ok(Branch::Padic),
            "laurent" => Ok(Branch::Laurent),
            other => Err(ConfigError::Invalid(format!(
                "ring.branch must be \"padic\" or \"laurent\", got {other:?}"
            ))),
        }
    }

    pub fn ring(&self) -> Result<RingLevel, ConfigError> {
        RingLevel::new(self.branch()?, self.ring.p, self.ring.f, self.ring.level)
            .map_err(|e| ConfigError::Invalid(e.to_string()))
    }

    /// Checks everything that can be checked before any computation.
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.ring.level == 0 {
            return Err(ConfigError::Invalid("ring.level must be at least 1".into()));
        }
        self.ring()?;
        if self.n() < 2 {
            return Err(ConfigError::Invalid("n must be at least 2".into()));
        }
        if self.run.samples == 0 || self.run.budget == 0 {
            return Err(ConfigError::Invalid("run.samples and run.budget must be positive".into()));
        }
        let c = &self.characters;
        if !c.indices.is_empty() && c.indices.len() != c.conductors.len() {
            return Err(ConfigError::Invalid(
                "characters.indices must be empty or match characters.conductors".into(),
            ));
        }
        if !c.conductors.is_empty() && c.conductors.len() != self.n() {
            return Err(ConfigError::Invalid(format!(
                "characters.conductors has {} entries but n = {}",
                c.conductors.len(),
                self.n()
            )));
        }
        if !matches!(self.arch.branch.as_str(), "real" | "complex" | "both") {
            return Err(ConfigError::Invalid(format!(
                "arch.branch must be \"real\", \"complex\" or \"both\", got {:?}",
                self.arch.branch
            )));
        }
        if self.arch.real_max_n < 2 || self.arch.complex_max_n < 2 {
            return Err(ConfigError::Invalid("arch dimensions must be at least 2".into()));
        }
        Ok(())
    }
}
