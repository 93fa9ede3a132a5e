//! Shared experiment steps: corpora, judged samples, content scores and
//! per-variant ranker training. Every step is a pure function of the config
//! and the master seed.

use rand::seq::index::sample;

use crate::datamodel::{Channel, Dataset};
use crate::error::{Error, Result};
use crate::eval::judgment_seed;
use crate::labelforge::{
    compose_dataset_labels, load_score_file, scores_from_map, train_content_scorer,
    ContentScorerModel, TreeContentScorer,
};
use crate::ranker::{train_ranker, TrainConfig, TrainOutcome};
use crate::seed;
use crate::synthgen::generate_corpus;

use super::config::{ContentSource, ExperimentConfig, VariantConfig};

/// Stable labels for the seed streams derived from the master seed.
pub mod streams {
    pub const TRAIN_CORPUS: &str = "corpus/train";
    pub const EVAL_CORPUS: &str = "corpus/eval";
    pub const JUDGED_SAMPLE: &str = "judged/sample";
    pub const JUDGMENTS: &str = "judged/ratings";
    pub const OFFLINE: &str = "eval/offline";
    pub const INTERLEAVE: &str = "eval/interleave";
    pub const EXPLAIN: &str = "explain/sample";
    pub const VARIANT: &str = "variant/";
}

pub fn stream(master: u64, label: &str) -> u64 {
    seed::derive_str(master, label)
}

pub fn variant_seed(master: u64, name: &str) -> u64 {
    seed::derive_str(master, &format!("{}{name}", streams::VARIANT))
}

pub fn train_corpus(config: &ExperimentConfig, master: u64) -> Result<Dataset> {
    let gen = crate::synthgen::GenConfig {
        seed: stream(master, streams::TRAIN_CORPUS),
        ..config.gen.clone()
    };
    generate_corpus(&gen, &config.user)
}

/// Held-out queries for offline and online evaluation.
pub fn eval_corpus(config: &ExperimentConfig, master: u64) -> Result<Dataset> {
    let gen = crate::synthgen::GenConfig {
        seed: stream(master, streams::EVAL_CORPUS),
        n_queries: config.eval.n_queries,
        ..config.gen.clone()
    };
    generate_corpus(&gen, &config.user)
}

/// Judged relevance for a sample of training pairs: full feature rows and a
/// rating rescaled to [0, 1].
pub fn judged_examples(
    config: &ExperimentConfig,
    train: &Dataset,
    master: u64,
) -> Result<Vec<(Vec<f64>, f64)>> {
    if !train.has_latent() {
        return Err(Error::InvalidDataset(
            "judging needs latent relevance".into(),
        ));
    }
    let pairs: Vec<_> = train.items().collect();
    let n = config.content.n_judged.min(pairs.len());
    let mut rng = seed::rng(stream(master, streams::JUDGED_SAMPLE));
    let mut chosen = sample(&mut rng, pairs.len(), n).into_vec();
    chosen.sort_unstable();
    let ratings_seed = stream(master, streams::JUDGMENTS);
    let scale = config.judge.thresholds.len() as f64;
    chosen
        .into_iter()
        .map(|i| {
            let (g, item) = pairs[i];
            let rho = item.latent.expect("checked above").rho;
            let rating = crate::synthgen::simulate_judgment(
                rho,
                &config.judge,
                judgment_seed(ratings_seed, &g.query.id, &item.product.id),
            )?;
            Ok((item.features.values().to_vec(), f64::from(rating) / scale))
        })
        .collect()
}

/// Content scorers trained once and shared by every variant.
pub struct ContentModels {
    pub tree: Option<TreeContentScorer>,
    pub scorer: Option<ContentScorerModel>,
}

impl ContentModels {
    /// Trains the scorers that `variants` need.
    pub fn train<'a>(
        config: &ExperimentConfig,
        train: &Dataset,
        master: u64,
        variants: impl IntoIterator<Item = &'a VariantConfig>,
    ) -> Result<Self> {
        let sources: Vec<ContentSource> = variants.into_iter().map(|v| v.content_source).collect();
        let needs_tree = sources.contains(&ContentSource::GbdtBaseline);
        let needs_scorer = sources.contains(&ContentSource::ContentScorer);
        if !needs_tree && !needs_scorer {
            return Ok(ContentModels {
                tree: None,
                scorer: None,
            });
        }
        let judged = judged_examples(config, train, master)?;
        let tree = if needs_tree {
            Some(TreeContentScorer::train(
                train.schema(),
                &judged,
                &config.content.tree_config(),
            )?)
        } else {
            None
        };
        let scorer = if needs_scorer {
            let cols = train.schema().indices_where(Channel::is_content);
            let names = cols
                .iter()
                .map(|&c| train.schema().features()[c].name.clone())
                .collect();
            let examples: Vec<(Vec<f64>, f64)> = judged
                .iter()
                .map(|(x, r)| (cols.iter().map(|&c| x[c]).collect(), *r))
                .collect();
            let model = train_content_scorer(names, &examples, &config.scorer)?;
            if model.degenerate {
                log::warn!("judged sample holds a single class; content scorer is constant");
            }
            Some(model)
        } else {
            None
        };
        Ok(ContentModels { tree, scorer })
    }

    /// Raw content score per item of `dataset` for `variant`'s source.
    pub fn content_scores(
        &self,
        variant: &VariantConfig,
        dataset: &Dataset,
    ) -> Result<Vec<Vec<f64>>> {
        match variant.content_source {
            ContentSource::GbdtBaseline => self
                .tree
                .as_ref()
                .expect("trained for this variant")
                .score_dataset(dataset),
            ContentSource::ContentScorer => self
                .scorer
                .as_ref()
                .expect("trained for this variant")
                .score_dataset(dataset),
            ContentSource::FileScores => {
                let path = variant.score_file.as_ref().expect("validated");
                scores_from_map(dataset, &load_score_file(path)?)
            }
        }
    }
}

/// Ranker settings for `variant`: its own seed and, without XE features, the
/// dense channel excluded.
pub fn variant_train_config(
    config: &ExperimentConfig,
    variant: &VariantConfig,
    master: u64,
) -> TrainConfig {
    let mut tc = config.train.clone();
    tc.seed = variant_seed(master, &variant.name);
    if !variant.use_xe_features && !tc.exclude_channels.contains(&Channel::XeDense) {
        tc.exclude_channels.push(Channel::XeDense);
    }
    tc
}

/// Labels `train` per `variant` and fits its ranker.
pub fn train_variant(
    config: &ExperimentConfig,
    variant: &VariantConfig,
    train: &Dataset,
    content: &ContentModels,
    master: u64,
) -> Result<TrainOutcome> {
    let c = content.content_scores(variant, train)?;
    let labels = compose_dataset_labels(train, &c, &config.grading, variant.transform)?;
    let y: Vec<Vec<f64>> = labels
        .iter()
        .map(|g| g.iter().map(|l| l.y).collect())
        .collect();
    train_ranker(train, &y, &variant_train_config(config, variant, master))
}
