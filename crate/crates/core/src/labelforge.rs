//! Training labels: `y = sigma(C) * E`, where `C` is a content-relevance score
//! in [0, 1], `sigma` an optional polarizing sigmoid, and `E` a grade for the
//! logged engagement outcome.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufReader, Read};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::datamodel::{Channel, Dataset, EngagementOutcome, Schema};
use crate::error::{Error, Result};
use crate::ranker::{self, TrainConfig, TreeEnsemble};

/// Shape of the logistic transform `1 / (1 + exp(-alpha (C - beta)))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SigmoidParams {
    pub alpha: f64,
    pub beta: f64,
}

impl SigmoidParams {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        let p = SigmoidParams { alpha, beta };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::Domain(format!(
                "alpha must be positive, got {}",
                self.alpha
            )));
        }
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return Err(Error::Domain(format!(
                "beta must lie in (0,1), got {}",
                self.beta
            )));
        }
        Ok(())
    }

    #[inline]
    fn eval(&self, c: f64) -> f64 {
        1.0 / (1.0 + (-self.alpha * (c - self.beta)).exp())
    }

    /// d sigma / dC.
    pub fn derivative(&self, c: f64) -> f64 {
        let s = self.eval(c);
        self.alpha * s * (1.0 - s)
    }
}

fn check_unit(name: &str, v: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&v) {
        return Err(Error::Domain(format!("{name} = {v} outside [0,1]")));
    }
    Ok(())
}

pub fn sigmoid_transform(c: f64, params: SigmoidParams) -> Result<f64> {
    check_unit("content score", c)?;
    Ok(params.eval(c))
}

/// Content-score bounds where the transform's slope crosses 1.
///
/// `[0, c1)` and `[c2, 1]` are flattened (slope <= 1), `[c1, c2)` is magnified.
/// The crossings are the roots of `alpha s (1 - s) = 1`, i.e.
/// `s = (1 ± sqrt(1 - 4/alpha)) / 2`, mapped back through the logit. They are
/// reported unclipped so a crossing outside [0, 1] stays visible.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntervalBounds {
    pub c1: f64,
    pub c2: f64,
    /// No region has slope above 1 (alpha <= 4).
    pub degenerate: bool,
}

pub fn compute_intervals(params: SigmoidParams) -> IntervalBounds {
    if params.alpha <= 4.0 {
        return IntervalBounds {
            c1: params.beta,
            c2: params.beta,
            degenerate: true,
        };
    }
    let root = (1.0 - 4.0 / params.alpha).sqrt();
    let s_lo = (1.0 - root) / 2.0;
    let logit = |s: f64| (s / (1.0 - s)).ln();
    let half_width = -logit(s_lo) / params.alpha;
    IntervalBounds {
        c1: params.beta - half_width,
        c2: params.beta + half_width,
        degenerate: false,
    }
}

/// Binary cross-entropy of a soft target `r` against a prediction `r_hat`.
pub fn cross_entropy(r: f64, r_hat: f64) -> Result<f64> {
    check_unit("target", r)?;
    if !(r_hat > 0.0 && r_hat < 1.0) {
        return Err(Error::Domain(format!("prediction {r_hat} outside (0,1)")));
    }
    let mut loss = 0.0;
    if r > 0.0 {
        loss -= r * r_hat.ln();
    }
    if r < 1.0 {
        loss -= (1.0 - r) * (1.0 - r_hat).ln();
    }
    Ok(loss)
}

/// Positive grade per engagement outcome, strictly increasing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EngagementGrading {
    pub non_engaged: f64,
    pub clicked: f64,
    pub added_to_cart: f64,
    pub ordered: f64,
    /// Divide each group's grades by the group maximum.
    pub normalize_within_group: bool,
}

impl Default for EngagementGrading {
    fn default() -> Self {
        EngagementGrading {
            non_engaged: 1.0,
            clicked: 2.0,
            added_to_cart: 4.0,
            ordered: 8.0,
            normalize_within_group: false,
        }
    }
}

impl EngagementGrading {
    pub fn validate(&self) -> Result<()> {
        let g = [
            self.non_engaged,
            self.clicked,
            self.added_to_cart,
            self.ordered,
        ];
        if !(g[0] > 0.0) || g.windows(2).any(|w| !(w[1] > w[0])) || g.iter().any(|v| !v.is_finite())
        {
            return Err(Error::InvalidConfig(format!(
                "engagement grades must be positive and strictly increasing, got {g:?}"
            )));
        }
        Ok(())
    }

    pub fn grade(&self, outcome: EngagementOutcome) -> f64 {
        match outcome {
            EngagementOutcome::NonEngaged => self.non_engaged,
            EngagementOutcome::Clicked => self.clicked,
            EngagementOutcome::AddedToCart => self.added_to_cart,
            EngagementOutcome::Ordered => self.ordered,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainingLabel {
    pub y: f64,
    pub content: f64,
    pub transformed: f64,
    pub engagement: f64,
}

pub fn compose_label(
    content: f64,
    outcome: EngagementOutcome,
    grading: &EngagementGrading,
    transform: Option<SigmoidParams>,
) -> Result<TrainingLabel> {
    compose_with_grade(content, grading.grade(outcome), transform)
}

fn compose_with_grade(
    content: f64,
    engagement: f64,
    transform: Option<SigmoidParams>,
) -> Result<TrainingLabel> {
    let transformed = match transform {
        Some(p) => sigmoid_transform(content, p)?,
        None => {
            check_unit("content score", content)?;
            content
        }
    };
    Ok(TrainingLabel {
        y: transformed * engagement,
        content,
        transformed,
        engagement,
    })
}

/// Labels for every item of `dataset`. `content[g][i]` is the content score
/// of item `i` in group `g`.
pub fn compose_dataset_labels(
    dataset: &Dataset,
    content: &[Vec<f64>],
    grading: &EngagementGrading,
    transform: Option<SigmoidParams>,
) -> Result<Vec<Vec<TrainingLabel>>> {
    grading.validate()?;
    if content.len() != dataset.groups().len() {
        return Err(Error::InvalidDataset(
            "content scores do not cover every group".into(),
        ));
    }
    dataset
        .groups()
        .iter()
        .zip(content)
        .map(|(g, cs)| {
            if cs.len() != g.items.len() {
                return Err(Error::InvalidDataset(format!(
                    "content score count mismatch in {}",
                    g.group_id
                )));
            }
            let grades: Vec<f64> = g.items.iter().map(|i| grading.grade(i.outcome)).collect();
            let scale = if grading.normalize_within_group {
                grades.iter().copied().fold(f64::MIN, f64::max)
            } else {
                1.0
            };
            g.items
                .iter()
                .zip(cs)
                .zip(grades)
                .map(|((_, &c), e)| compose_with_grade(c, e / scale, transform))
                .collect()
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScorerConfig {
    pub epochs: usize,
    pub learning_rate: f64,
}

impl Default for ScorerConfig {
    fn default() -> Self {
        ScorerConfig {
            epochs: 500,
            learning_rate: 1.0,
        }
    }
}

/// Logistic content scorer `C = 1 / (1 + exp(-(w . x + b)))` over named
/// content features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContentScorerModel {
    pub feature_names: Vec<String>,
    pub weights: Vec<f64>,
    pub bias: f64,
    pub epochs: usize,
    pub final_loss: f64,
    /// Training data held a single class; the model is constant.
    pub degenerate: bool,
    pub loss_history: Vec<f64>,
}

const PROB_FLOOR: f64 = 1e-12;

fn logistic(z: f64) -> f64 {
    (1.0 / (1.0 + (-z).exp())).clamp(PROB_FLOOR, 1.0 - PROB_FLOOR)
}

fn mean_loss(examples: &[(Vec<f64>, f64)], w: &[f64], b: f64) -> f64 {
    let total: f64 = examples
        .iter()
        .map(|(x, r)| {
            let p = logistic(dot(w, x) + b);
            cross_entropy(*r, p).expect("validated inputs")
        })
        .sum();
    total / examples.len() as f64
}

fn dot(w: &[f64], x: &[f64]) -> f64 {
    w.iter().zip(x).map(|(a, b)| a * b).sum()
}

/// Full-batch gradient descent on mean cross-entropy. A step that would raise
/// the loss is retried at half the learning rate, so the loss history never
/// increases.
pub fn train_content_scorer(
    feature_names: Vec<String>,
    examples: &[(Vec<f64>, f64)],
    config: &ScorerConfig,
) -> Result<ContentScorerModel> {
    if examples.len() < 2 {
        return Err(Error::InsufficientSamples {
            needed: 2,
            got: examples.len(),
        });
    }
    let d = feature_names.len();
    for (x, r) in examples {
        if x.len() != d {
            return Err(Error::SchemaMismatch(format!(
                "example has {} features, expected {d}",
                x.len()
            )));
        }
        check_unit("judged relevance", *r)?;
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("non-finite feature in judged example".into()));
        }
    }
    let n = examples.len() as f64;
    let has_low = examples.iter().any(|(_, r)| *r < 0.5);
    let has_high = examples.iter().any(|(_, r)| *r >= 0.5);
    if !(has_low && has_high) {
        let mean = (examples.iter().map(|(_, r)| r).sum::<f64>() / n).clamp(1e-6, 1.0 - 1e-6);
        log::warn!("content scorer trained on a single class; returning a constant model");
        let bias = (mean / (1.0 - mean)).ln();
        let loss = mean_loss(examples, &vec![0.0; d], bias);
        return Ok(ContentScorerModel {
            feature_names,
            weights: vec![0.0; d],
            bias,
            epochs: 0,
            final_loss: loss,
            degenerate: true,
            loss_history: vec![loss],
        });
    }

    let mut w = vec![0.0; d];
    let mut b = 0.0;
    let mut lr = config.learning_rate;
    let mut loss = mean_loss(examples, &w, b);
    let mut history = vec![loss];
    let mut gw = vec![0.0; d];
    for _ in 0..config.epochs {
        gw.iter_mut().for_each(|g| *g = 0.0);
        let mut gb = 0.0;
        for (x, r) in examples {
            let err = logistic(dot(&w, x) + b) - r;
            for (g, xi) in gw.iter_mut().zip(x) {
                *g += err * xi;
            }
            gb += err;
        }
        loop {
            let cand_w: Vec<f64> = w.iter().zip(&gw).map(|(wi, g)| wi - lr * g / n).collect();
            let cand_b = b - lr * gb / n;
            let cand_loss = mean_loss(examples, &cand_w, cand_b);
            if cand_loss <= loss {
                w = cand_w;
                b = cand_b;
                loss = cand_loss;
                break;
            }
            lr /= 2.0;
            if lr < 1e-12 {
                break;
            }
        }
        history.push(loss);
    }
    Ok(ContentScorerModel {
        feature_names,
        weights: w,
        bias: b,
        epochs: config.epochs,
        final_loss: loss,
        degenerate: false,
        loss_history: history,
    })
}

/// Score in (0, 1) for the model's content features, given in model order.
pub fn predict_content(model: &ContentScorerModel, features: &[f64]) -> Result<f64> {
    if features.len() != model.weights.len() {
        return Err(Error::SchemaMismatch(format!(
            "scorer expects {} features, got {}",
            model.weights.len(),
            features.len()
        )));
    }
    Ok(logistic(dot(&model.weights, features) + model.bias))
}

impl ContentScorerModel {
    /// Column indices of the model's features in `schema`.
    pub fn bind(&self, schema: &Schema) -> Result<Vec<usize>> {
        self.feature_names
            .iter()
            .map(|n| {
                schema
                    .index_of(n)
                    .ok_or_else(|| Error::SchemaMismatch(format!("feature {n} missing from data")))
            })
            .collect()
    }

    pub fn score_dataset(&self, dataset: &Dataset) -> Result<Vec<Vec<f64>>> {
        let cols = self.bind(dataset.schema())?;
        dataset
            .groups()
            .iter()
            .map(|g| {
                g.items
                    .iter()
                    .map(|i| {
                        let x: Vec<f64> = cols.iter().map(|&c| i.features[c]).collect();
                        predict_content(self, &x)
                    })
                    .collect()
            })
            .collect()
    }
}

/// Content scores from a tree regressor over the sparse content channel,
/// clamped to [0, 1].
#[derive(Debug, Clone)]
pub struct TreeContentScorer {
    pub model: TreeEnsemble,
}

impl TreeContentScorer {
    /// Fits to judged relevance using only sparse-content features.
    pub fn train(
        schema: &Schema,
        examples: &[(Vec<f64>, f64)],
        config: &TrainConfig,
    ) -> Result<Self> {
        let features = schema.indices_of(Channel::SparseContent);
        if features.is_empty() {
            return Err(Error::SchemaMismatch(
                "no sparse-content features to score with".into(),
            ));
        }
        let rows: Vec<&[f64]> = examples.iter().map(|(x, _)| x.as_slice()).collect();
        let targets: Vec<f64> = examples.iter().map(|(_, r)| *r).collect();
        let model = ranker::train_regressor(&rows, &targets, schema, &features, config)?;
        Ok(TreeContentScorer { model })
    }

    pub fn score(&self, features: &[f64]) -> Result<f64> {
        Ok(self.model.predict(features)?.clamp(0.0, 1.0))
    }

    pub fn score_dataset(&self, dataset: &Dataset) -> Result<Vec<Vec<f64>>> {
        self.model.check_schema(dataset.schema())?;
        dataset
            .groups()
            .iter()
            .map(|g| {
                g.items
                    .iter()
                    .map(|i| self.score(i.features.values()))
                    .collect()
            })
            .collect()
    }
}

/// Pair id used by content-score files: `group_id/product_id`.
pub fn pair_id(group_id: &str, product_id: &str) -> String {
    format!("{group_id}/{product_id}")
}

/// Reads a two-column CSV (`pair_id,score`) of externally computed content
/// scores. Scores are clamped to [0, 1].
pub fn read_score_file<R: Read>(input: R) -> Result<HashMap<String, f64>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(input);
    let mut out = HashMap::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| Error::Parse {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != 2 {
            return Err(Error::Parse {
                line,
                message: "expected pair_id,score".into(),
            });
        }
        let score: f64 = rec[1].trim().parse().map_err(|_| Error::Parse {
            line,
            message: format!("bad score {:?}", &rec[1]),
        })?;
        if !score.is_finite() {
            return Err(Error::SchemaViolation {
                line,
                message: "non-finite score".into(),
            });
        }
        out.insert(rec[0].to_string(), score.clamp(0.0, 1.0));
    }
    Ok(out)
}

pub fn load_score_file(path: impl AsRef<Path>) -> Result<HashMap<String, f64>> {
    let path = path.as_ref();
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    read_score_file(BufReader::new(f))
}

/// Looks up every item of `dataset` in a score map.
pub fn scores_from_map(dataset: &Dataset, scores: &HashMap<String, f64>) -> Result<Vec<Vec<f64>>> {
    dataset
        .groups()
        .iter()
        .map(|g| {
            g.items
                .iter()
                .map(|i| {
                    let id = pair_id(&g.group_id, &i.product.id);
                    scores
                        .get(&id)
                        .copied()
                        .ok_or_else(|| Error::InvalidDataset(format!("no content score for {id}")))
                })
                .collect()
        })
        .collect()
}
