//! Listwise learning-to-rank with gradient-boosted regression trees.

mod io;
pub mod lambda;
pub mod tree;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datamodel::{Channel, Dataset, Item, QueryGroup, Schema};
use crate::error::{Error, Result};
use crate::eval::metrics::{ndcg_at_k_with, Gain};
use crate::seed;

pub use io::{
    load_ensemble, read_ensemble, save_ensemble, write_ensemble, MODEL_FORMAT, MODEL_VERSION,
};
pub use lambda::lambda_gradients;
pub use tree::{Node, NodeKind, Tree, TreeParams, LAMBDA_REG};

use tree::{fit_tree, ColumnData};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub n_trees: usize,
    pub max_depth: usize,
    pub min_leaf_count: usize,
    pub learning_rate: f64,
    /// NDCG truncation used to weight the lambda gradients.
    pub ndcg_k: usize,
    /// Channels the learner may not split on.
    pub exclude_channels: Vec<Channel>,
    /// Fraction of groups (rows for regression) sampled per round.
    pub subsample: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            n_trees: 100,
            max_depth: 4,
            min_leaf_count: 10,
            learning_rate: 0.1,
            ndcg_k: 10,
            exclude_channels: Vec::new(),
            subsample: 1.0,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_depth == 0 || self.min_leaf_count == 0 || self.ndcg_k == 0 {
            return Err(Error::InvalidConfig(
                "max_depth, min_leaf_count and ndcg_k must be positive".into(),
            ));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return Err(Error::InvalidConfig(
                "learning_rate must lie in (0, 1]".into(),
            ));
        }
        if !(self.subsample > 0.0 && self.subsample <= 1.0) {
            return Err(Error::InvalidConfig("subsample must lie in (0, 1]".into()));
        }
        Ok(())
    }

    fn tree_params(&self) -> TreeParams {
        TreeParams {
            max_depth: self.max_depth,
            min_leaf_count: self.min_leaf_count,
        }
    }

    /// Feature indices the learner may split on under this config.
    pub fn allowed_features(&self, schema: &Schema) -> Vec<usize> {
        schema.indices_where(|c| !self.exclude_channels.contains(&c))
    }
}

/// Additive tree model: `base_score + learning_rate * sum(tree outputs)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TreeEnsemble {
    trees: Vec<Tree>,
    learning_rate: f64,
    base_score: f64,
    schema: Schema,
}

impl TreeEnsemble {
    pub fn new(
        trees: Vec<Tree>,
        learning_rate: f64,
        base_score: f64,
        schema: Schema,
    ) -> Result<Self> {
        for (t, tree) in trees.iter().enumerate() {
            tree.validate(schema.len())
                .map_err(|e| Error::ModelFormat(format!("tree {t}: {e}")))?;
        }
        Ok(TreeEnsemble {
            trees,
            learning_rate,
            base_score,
            schema,
        })
    }

    pub fn trees(&self) -> &[Tree] {
        &self.trees
    }

    pub fn learning_rate(&self) -> f64 {
        self.learning_rate
    }

    pub fn base_score(&self) -> f64 {
        self.base_score
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn n_features(&self) -> usize {
        self.schema.len()
    }

    pub fn check_schema(&self, schema: &Schema) -> Result<()> {
        if schema.fingerprint() != self.schema.fingerprint() {
            return Err(Error::SchemaMismatch(format!(
                "model schema {} does not match data schema {}",
                self.schema.fingerprint(),
                schema.fingerprint()
            )));
        }
        Ok(())
    }

    pub fn predict(&self, features: &[f64]) -> Result<f64> {
        if features.len() != self.schema.len() {
            return Err(Error::SchemaMismatch(format!(
                "model expects {} features, got {}",
                self.schema.len(),
                features.len()
            )));
        }
        Ok(self.predict_unchecked(features))
    }

    pub(crate) fn predict_unchecked(&self, features: &[f64]) -> f64 {
        let sum: f64 = self.trees.iter().map(|t| t.predict(features)).sum();
        self.base_score + self.learning_rate * sum
    }

    /// Features used by at least one split, ascending.
    pub fn active_features(&self) -> Vec<usize> {
        let mut used = vec![false; self.schema.len()];
        for t in &self.trees {
            for f in t.split_features() {
                used[f] = true;
            }
        }
        (0..used.len()).filter(|&f| used[f]).collect()
    }

    pub fn score_group(&self, group: &QueryGroup) -> Vec<f64> {
        group
            .items
            .iter()
            .map(|i| self.predict_unchecked(i.features.values()))
            .collect()
    }
}

/// Item indices of `group` by descending score, ties by ascending product id.
pub fn rank_group(ensemble: &TreeEnsemble, group: &QueryGroup) -> Result<Vec<usize>> {
    if let Some(item) = group
        .items
        .iter()
        .find(|i| i.features.len() != ensemble.n_features())
    {
        return Err(Error::SchemaMismatch(format!(
            "item {} has {} features, model expects {}",
            item.product.id,
            item.features.len(),
            ensemble.n_features()
        )));
    }
    let scores = ensemble.score_group(group);
    Ok(order_by_scores(&scores, &group.items))
}

pub(crate) fn order_by_scores(scores: &[f64], items: &[Item]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..items.len()).collect();
    order.sort_by(|&a, &b| {
        scores[b]
            .total_cmp(&scores[a])
            .then_with(|| items[a].product.id.cmp(&items[b].product.id))
    });
    order
}

/// A trained ensemble plus the mean training NDCG@k after every round
/// (entry 0 is before the first tree).
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub ensemble: TreeEnsemble,
    pub train_ndcg: Vec<f64>,
}

fn mean_ndcg(groups: &[(usize, usize)], scores: &[f64], labels: &[f64], k: usize) -> f64 {
    let (sum, n) = groups
        .iter()
        .filter_map(|&(start, end)| {
            let pos = lambda::positions_by_score(&scores[start..end]);
            let mut ranked = vec![0.0; end - start];
            for (i, &p) in pos.iter().enumerate() {
                ranked[p] = labels[start + i];
            }
            ndcg_at_k_with(&ranked, k, Gain::Identity).ok().flatten()
        })
        .fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

/// Trains a LambdaMART ranker. `labels[g][i]` is the label of item `i` of
/// group `g`; labels must be non-negative (identity gain).
pub fn train_ranker(
    dataset: &Dataset,
    labels: &[Vec<f64>],
    config: &TrainConfig,
) -> Result<TrainOutcome> {
    config.validate()?;
    if dataset.groups().is_empty() {
        return Err(Error::EmptyDataset);
    }
    if labels.len() != dataset.groups().len() {
        return Err(Error::InvalidDataset(format!(
            "{} label groups for {} query groups",
            labels.len(),
            dataset.groups().len()
        )));
    }
    let mut spans = Vec::with_capacity(labels.len());
    let mut flat_labels = Vec::with_capacity(dataset.n_items());
    let mut rows: Vec<&[f64]> = Vec::with_capacity(dataset.n_items());
    for (g, ls) in dataset.groups().iter().zip(labels) {
        if ls.len() != g.items.len() {
            return Err(Error::InvalidDataset(format!(
                "label count mismatch in group {}",
                g.group_id
            )));
        }
        if let Some(l) = ls.iter().find(|l| !(**l >= 0.0) || !l.is_finite()) {
            return Err(Error::Domain(format!(
                "label {l} in group {} is negative or not finite",
                g.group_id
            )));
        }
        let start = flat_labels.len();
        flat_labels.extend_from_slice(ls);
        rows.extend(g.items.iter().map(|i| i.features.values()));
        spans.push((start, flat_labels.len()));
    }
    let has_signal = labels.iter().any(|ls| ls.iter().any(|&l| l != ls[0]));
    if !has_signal {
        return Err(Error::NoRankingSignal);
    }

    let schema = dataset.schema().clone();
    let features = config.allowed_features(&schema);
    let data = ColumnData::new(&rows, schema.len(), &features);
    let n = rows.len();
    let base_score = 0.0;
    let mut scores = vec![base_score; n];
    let mut grad = vec![0.0; n];
    let mut hess = vec![0.0; n];
    let mut pairs = vec![(0.0, 0.0); n];
    let mut trees = Vec::with_capacity(config.n_trees);
    let mut history = vec![mean_ndcg(&spans, &scores, &flat_labels, config.ndcg_k)];
    let mut active = vec![true; n];

    for round in 0..config.n_trees {
        // per-group work is independent; each group writes only its own span
        let mut chunks: Vec<&mut [(f64, f64)]> = Vec::with_capacity(spans.len());
        let mut rest = pairs.as_mut_slice();
        for &(start, end) in &spans {
            let (head, tail) = rest.split_at_mut(end - start);
            chunks.push(head);
            rest = tail;
        }
        chunks
            .into_par_iter()
            .zip(spans.par_iter())
            .for_each(|(out, &(start, end))| {
                lambda::lambda_gradients_into(
                    &scores[start..end],
                    &flat_labels[start..end],
                    config.ndcg_k,
                    out,
                );
            });
        for (i, &(g, h)) in pairs.iter().enumerate() {
            grad[i] = g;
            hess[i] = h;
        }
        let mask = if config.subsample < 1.0 {
            let mut rng = seed::rng(seed::derive(config.seed, round as u64));
            for &(start, end) in &spans {
                let keep = rng.random::<f64>() < config.subsample;
                active[start..end].iter_mut().for_each(|a| *a = keep);
            }
            Some(active.as_slice())
        } else {
            None
        };
        let (tree, _) = fit_tree(&data, &features, &grad, &hess, mask, config.tree_params());
        for (s, row) in scores.iter_mut().zip(&rows) {
            *s += config.learning_rate * tree.predict(row);
        }
        trees.push(tree);
        history.push(mean_ndcg(&spans, &scores, &flat_labels, config.ndcg_k));
    }
    let ensemble = TreeEnsemble::new(trees, config.learning_rate, base_score, schema)?;
    Ok(TrainOutcome {
        ensemble,
        train_ndcg: history,
    })
}

/// Squared-error gradient boosting over `rows`, splitting only on `features`.
/// The base score is the target mean.
pub fn train_regressor(
    rows: &[&[f64]],
    targets: &[f64],
    schema: &Schema,
    features: &[usize],
    config: &TrainConfig,
) -> Result<TreeEnsemble> {
    config.validate()?;
    if rows.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if rows.len() != targets.len() {
        return Err(Error::Domain(format!(
            "{} rows for {} targets",
            rows.len(),
            targets.len()
        )));
    }
    if let Some(r) = rows.iter().find(|r| r.len() != schema.len()) {
        return Err(Error::SchemaMismatch(format!(
            "row has {} features, schema has {}",
            r.len(),
            schema.len()
        )));
    }
    let data = ColumnData::new(rows, schema.len(), features);
    let base_score = targets.iter().sum::<f64>() / targets.len() as f64;
    let mut pred = vec![base_score; rows.len()];
    let hess = vec![1.0; rows.len()];
    let mut grad = vec![0.0; rows.len()];
    let mut active = vec![true; rows.len()];
    let mut trees = Vec::with_capacity(config.n_trees);
    for round in 0..config.n_trees {
        for i in 0..rows.len() {
            grad[i] = pred[i] - targets[i];
        }
        let mask = if config.subsample < 1.0 {
            let mut rng = seed::rng(seed::derive(config.seed, round as u64));
            active
                .iter_mut()
                .for_each(|a| *a = rng.random::<f64>() < config.subsample);
            Some(active.as_slice())
        } else {
            None
        };
        let (tree, _) = fit_tree(&data, features, &grad, &hess, mask, config.tree_params());
        for (p, row) in pred.iter_mut().zip(rows) {
            *p += config.learning_rate * tree.predict(row);
        }
        trees.push(tree);
    }
    TreeEnsemble::new(trees, config.learning_rate, base_score, schema.clone())
}
