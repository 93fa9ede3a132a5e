//! Experiment configuration, read from TOML.

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interleave::InterleaveConfig;
use crate::labelforge::{EngagementGrading, ScorerConfig, SigmoidParams};
use crate::ranker::TrainConfig;
use crate::synthgen::{GenConfig, JudgeModelParams, UserModelParams};

/// Sections every config file must contain. Their keys may be left at defaults.
pub const REQUIRED_SECTIONS: [&str; 6] = ["gen", "user", "judge", "train", "grading", "variants"];

/// Where a variant's content-relevance scores come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ContentSource {
    /// Tree regressor over sparse content features, fit to judged relevance.
    GbdtBaseline,
    /// Logistic scorer over all content features, fit by cross-entropy.
    ContentScorer,
    /// Precomputed `pair_id,score` file.
    FileScores,
}

impl ContentSource {
    pub fn as_str(self) -> &'static str {
        match self {
            ContentSource::GbdtBaseline => "gbdt-baseline",
            ContentSource::ContentScorer => "content-scorer",
            ContentSource::FileScores => "file-scores",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VariantConfig {
    pub name: String,
    pub content_source: ContentSource,
    /// Required when `content_source = "file-scores"`.
    #[serde(default)]
    pub score_file: Option<PathBuf>,
    #[serde(default)]
    pub transform: Option<SigmoidParams>,
    #[serde(default)]
    pub use_xe_features: bool,
}

impl VariantConfig {
    pub fn validate(&self) -> Result<()> {
        let valid_name = !self.name.is_empty()
            && self
                .name
                .chars()
                .all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '.'))
            && self.name != "."
            && self.name != "..";
        if !valid_name {
            return Err(Error::InvalidConfig(format!(
                "variant name {:?} must be non-empty ASCII letters, digits, '_', '-' or '.'",
                self.name
            )));
        }
        if let Some(t) = self.transform {
            t.validate()?;
        }
        match (self.content_source, &self.score_file) {
            (ContentSource::FileScores, None) => Err(Error::InvalidConfig(format!(
                "variant {} reads file scores but sets no score_file",
                self.name
            ))),
            (ContentSource::GbdtBaseline | ContentSource::ContentScorer, Some(_)) => {
                Err(Error::InvalidConfig(format!(
                    "variant {} sets score_file but does not read file scores",
                    self.name
                )))
            }
            _ => Ok(()),
        }
    }
}

/// Judged sample and baseline tree scorer settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ContentConfig {
    /// Query-product pairs rated by the simulated judge for scorer training.
    pub n_judged: usize,
    pub tree_n_trees: usize,
    pub tree_max_depth: usize,
    pub tree_min_leaf_count: usize,
    pub tree_learning_rate: f64,
}

impl Default for ContentConfig {
    fn default() -> Self {
        ContentConfig {
            n_judged: 3000,
            tree_n_trees: 50,
            tree_max_depth: 3,
            tree_min_leaf_count: 20,
            tree_learning_rate: 0.1,
        }
    }
}

impl ContentConfig {
    pub fn tree_config(&self) -> TrainConfig {
        TrainConfig {
            n_trees: self.tree_n_trees,
            max_depth: self.tree_max_depth,
            min_leaf_count: self.tree_min_leaf_count,
            learning_rate: self.tree_learning_rate,
            ..TrainConfig::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalConfig {
    /// Queries in the held-out evaluation corpus.
    pub n_queries: usize,
    pub k: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            n_queries: 300,
            k: 10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExplainConfig {
    /// Evaluation items attributed per variant.
    pub sample_size: usize,
}

impl Default for ExplainConfig {
    fn default() -> Self {
        ExplainConfig { sample_size: 1000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub seed: u64,
    /// Name of the variant every other variant is compared against.
    pub baseline: String,
    pub gen: GenConfig,
    pub user: UserModelParams,
    pub judge: JudgeModelParams,
    pub train: TrainConfig,
    pub grading: EngagementGrading,
    #[serde(default)]
    pub scorer: ScorerConfig,
    #[serde(default)]
    pub content: ContentConfig,
    #[serde(default)]
    pub eval: EvalConfig,
    #[serde(default)]
    pub interleave: InterleaveConfig,
    #[serde(default)]
    pub explain: ExplainConfig,
    pub variants: Vec<VariantConfig>,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let table: toml::Table =
            toml::from_str(text).map_err(|e| Error::InvalidConfig(e.message().to_string()))?;
        for section in REQUIRED_SECTIONS {
            if !table.contains_key(section) {
                return Err(Error::MissingSection(section.to_string()));
            }
        }
        let config: ExperimentConfig = table
            .try_into()
            .map_err(|e: toml::de::Error| Error::InvalidConfig(e.message().to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut config = Self::parse(&text)?;
        // relative score files resolve against the config's directory
        let dir = path.parent().unwrap_or(Path::new(""));
        for v in &mut config.variants {
            if let Some(f) = &mut v.score_file {
                if f.is_relative() {
                    *f = dir.join(&*f);
                }
            }
        }
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        self.gen.validate()?;
        self.user.validate()?;
        self.judge.validate()?;
        self.train.validate()?;
        self.grading.validate()?;
        self.content.tree_config().validate()?;
        if self.eval.k == 0 || self.eval.n_queries == 0 {
            return Err(Error::InvalidConfig(
                "eval.k and eval.n_queries must be positive".into(),
            ));
        }
        if self.interleave.n_sessions == 0 {
            return Err(Error::InvalidConfig(
                "interleave.n_sessions must be positive".into(),
            ));
        }
        if self.explain.sample_size == 0 {
            return Err(Error::InvalidConfig(
                "explain.sample_size must be positive".into(),
            ));
        }
        if self.content.n_judged < 2 {
            return Err(Error::InvalidConfig(
                "content.n_judged must be at least 2".into(),
            ));
        }
        let mut seen = HashSet::new();
        for v in &self.variants {
            v.validate()?;
            if !seen.insert(v.name.as_str()) {
                return Err(Error::InvalidConfig(format!(
                    "duplicate variant name {}",
                    v.name
                )));
            }
        }
        if !seen.contains(self.baseline.as_str()) {
            return Err(Error::InvalidConfig(format!(
                "baseline {:?} is not a listed variant",
                self.baseline
            )));
        }
        Ok(())
    }

    pub fn variant(&self, name: &str) -> Result<&VariantConfig> {
        self.variants
            .iter()
            .find(|v| v.name == name)
            .ok_or_else(|| Error::InvalidConfig(format!("no variant named {name:?}")))
    }

    pub fn baseline_variant(&self) -> &VariantConfig {
        self.variant(&self.baseline).expect("validated")
    }
}

/// The shipped seven-variant grid.
pub const DEFAULT_CONFIG: &str = include_str!("../../../../configs/default.toml");
