use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::attacks::AttackKind;
use crate::datasets::SplitConfig;
use crate::dpp::SamplingConfig;
use crate::error::{Error, Result};
use crate::model::TrainConfig;
use crate::walk::ScoringConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DatasetFormat {
    /// `<path>.content` + `<path>.cites`, or a directory holding
    /// `<dir>/<dirname>.content` and `.cites`.
    #[default]
    ContentCites,
    JsonBundle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SubgraphConfig {
    pub target_size: usize,
    /// Breadth-first start; the highest-degree node when unset.
    pub seed_node: Option<usize>,
}

impl Default for SubgraphConfig {
    fn default() -> Self {
        SubgraphConfig {
            target_size: 3000,
            seed_node: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DatasetConfig {
    pub path: PathBuf,
    pub format: DatasetFormat,
    pub normalize_features: bool,
    pub subgraph: Option<SubgraphConfig>,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        DatasetConfig {
            path: PathBuf::new(),
            format: DatasetFormat::ContentCites,
            normalize_features: true,
            subgraph: None,
        }
    }
}

/// Which nodes receive negative samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum SourceSelection {
    #[default]
    All,
    DegreeRange { lo: usize, hi: usize },
}

/// Attack applied to the graph before each run; the attack seed is the run
/// seed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttackConfig {
    pub kind: AttackKind,
    pub intensity: f64,
}

impl AttackConfig {
    pub fn label(&self) -> String {
        let kind = match self.kind {
            AttackKind::Ctbca => "ctbca",
            AttackKind::Twpa => "twpa",
        };
        format!("{kind}@{}", self.intensity)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub dataset: DatasetConfig,
    pub split: SplitConfig,
    pub model: TrainConfig,
    pub scoring: ScoringConfig,
    pub sampling: SamplingConfig,
    pub sources: SourceSelection,
    pub attack: Option<AttackConfig>,
    pub runs: usize,
    pub base_seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            dataset: DatasetConfig::default(),
            split: SplitConfig::default(),
            model: TrainConfig::default(),
            scoring: ScoringConfig::default(),
            sampling: SamplingConfig::default(),
            sources: SourceSelection::All,
            attack: None,
            runs: 10,
            base_seed: 0,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<ExperimentConfig> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<ExperimentConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Hex SHA-256 of the canonical JSON serialization.
    pub fn hash(&self) -> Result<String> {
        let text = serde_json::to_string(self)?;
        let digest = Sha256::digest(text.as_bytes());
        Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
    }

    pub fn validate(&self) -> Result<()> {
        if self.runs == 0 {
            return Err(Error::InvalidParameter("runs must be positive".into()));
        }
        self.model.validate()?;
        self.scoring.validate()?;
        if let SourceSelection::DegreeRange { lo, hi } = self.sources {
            if lo > hi {
                return Err(Error::InvalidParameter(format!("degree range {lo}..={hi} is empty")));
            }
        }
        if let Some(a) = self.attack {
            crate::attacks::AttackSpec {
                kind: a.kind,
                intensity: a.intensity,
                seed: 0,
            }
            .validate()?;
        }
        Ok(())
    }
}
