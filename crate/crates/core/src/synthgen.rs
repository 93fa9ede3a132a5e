//! Synthetic corpora with known latent truth, plus the user and judge
//! simulators used by the online and offline evaluations.
//!
//! Every item gets a content relevance `rho` and an engagement propensity
//! `pi`, drawn independently. Content features observe `rho` through noise;
//! engagement features and logged outcomes come from simulated traffic over a
//! noisy logging ranking, so they carry the same position bias real logs do.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datamodel::{
    Channel, Dataset, EngagementOutcome, FeatureDef, FeatureVector, Item, Latent, Product, Query,
    QueryGroup, Schema, Segment,
};
use crate::error::{Error, Result};
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GenConfig {
    pub n_queries: usize,
    pub items_per_group: usize,
    pub n_sparse_features: usize,
    /// Noise on the sparse text-match features.
    pub sparse_noise: f64,
    /// Noise on the dense cross-encoder feature.
    pub xe_noise: f64,
    /// Noise on the popularity feature.
    pub engagement_feature_noise: f64,
    /// Noise added to the logging policy's ranking score.
    pub logging_noise: f64,
    /// Historical sessions per query behind the engagement-rate features.
    pub history_sessions: usize,
    /// Head / torso / tail proportions.
    pub segment_mix: [f64; 3],
    /// Beta mixture for content relevance: `[weight, a, b]` per component.
    pub relevance_mixture: Vec<[f64; 3]>,
    /// Beta shape `[a, b]` of the engagement propensity.
    pub propensity_shape: [f64; 2],
    pub seed: u64,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            n_queries: 500,
            items_per_group: 30,
            n_sparse_features: 4,
            sparse_noise: 0.25,
            xe_noise: 0.08,
            engagement_feature_noise: 0.05,
            logging_noise: 0.3,
            history_sessions: 200,
            segment_mix: [0.2, 0.3, 0.5],
            relevance_mixture: vec![[0.1, 2.0, 6.0], [0.9, 8.0, 8.0]],
            propensity_shape: [2.0, 2.5],
            seed: 0,
        }
    }
}

impl GenConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_queries == 0 || self.n_sparse_features == 0 {
            return Err(Error::InvalidConfig(
                "n_queries and n_sparse_features must be at least 1".into(),
            ));
        }
        if self.items_per_group < 2 {
            return Err(Error::InvalidConfig(
                "items_per_group must be at least 2".into(),
            ));
        }
        for (name, v) in [
            ("sparse_noise", self.sparse_noise),
            ("xe_noise", self.xe_noise),
            ("engagement_feature_noise", self.engagement_feature_noise),
            ("logging_noise", self.logging_noise),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::InvalidConfig(format!(
                    "{name} must be finite and non-negative"
                )));
            }
        }
        if self.segment_mix.iter().any(|w| !(*w >= 0.0))
            || self.segment_mix.iter().sum::<f64>() <= 0.0
        {
            return Err(Error::InvalidConfig(
                "segment_mix needs non-negative weights with a positive sum".into(),
            ));
        }
        let shapes_ok = self.relevance_mixture.iter().all(|[w, a, b]| {
            *w >= 0.0 && w.is_finite() && *a > 0.0 && *b > 0.0 && a.is_finite() && b.is_finite()
        });
        let total: f64 = self.relevance_mixture.iter().map(|c| c[0]).sum();
        if !shapes_ok || !(total > 0.0) {
            return Err(Error::InvalidConfig(
                "relevance_mixture needs positive Beta shapes and non-negative weights with a positive sum".into(),
            ));
        }
        if self
            .propensity_shape
            .iter()
            .any(|v| !(*v > 0.0 && v.is_finite()))
        {
            return Err(Error::InvalidConfig(
                "propensity_shape must be positive".into(),
            ));
        }
        Ok(())
    }

    pub fn schema(&self) -> Schema {
        let mut defs: Vec<FeatureDef> = (0..self.n_sparse_features)
            .map(|j| FeatureDef::new(format!("text_match_{j}"), Channel::SparseContent))
            .collect();
        defs.push(FeatureDef::new("xe_relevance", Channel::XeDense));
        for name in ENGAGEMENT_FEATURES {
            defs.push(FeatureDef::new(name, Channel::Engagement));
        }
        Schema::new(defs).expect("generated names are unique")
    }
}

const ENGAGEMENT_FEATURES: [&str; 4] =
    ["hist_ctr", "hist_atc_rate", "hist_order_rate", "popularity"];

/// Cascade user model. Position `i` is examined with probability
/// `persistence^i`; an examined item is clicked, carted and ordered through a
/// funnel whose stage probabilities grow with the item's affinity
/// `content_weight * rho + (1 - content_weight) * pi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct UserModelParams {
    pub persistence: f64,
    pub click_slope: f64,
    pub atc_slope: f64,
    pub order_slope: f64,
    pub content_weight: f64,
}

impl Default for UserModelParams {
    fn default() -> Self {
        UserModelParams {
            persistence: 0.92,
            click_slope: 2.0,
            atc_slope: 1.5,
            order_slope: 1.0,
            content_weight: 0.1,
        }
    }
}

#[inline]
fn saturating(slope: f64, affinity: f64) -> f64 {
    1.0 - (-slope * affinity).exp()
}

impl UserModelParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.persistence > 0.0 && self.persistence < 1.0) {
            return Err(Error::InvalidConfig("persistence must lie in (0,1)".into()));
        }
        if [self.click_slope, self.atc_slope, self.order_slope]
            .iter()
            .any(|s| !(*s >= 0.0 && s.is_finite()))
        {
            return Err(Error::InvalidConfig(
                "slopes must be finite and non-negative".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.content_weight) {
            return Err(Error::InvalidConfig(
                "content_weight must lie in [0,1]".into(),
            ));
        }
        Ok(())
    }

    pub fn affinity(&self, latent: Latent) -> f64 {
        self.content_weight * latent.rho + (1.0 - self.content_weight) * latent.pi
    }

    /// Probability that an examined item is at least clicked.
    pub fn p_click(&self, latent: Latent) -> f64 {
        saturating(self.click_slope, self.affinity(latent))
    }

    /// Probabilities of (NonEngaged, Clicked, AddedToCart, Ordered) for an
    /// examined item.
    pub fn outcome_distribution(&self, latent: Latent) -> [f64; 4] {
        let a = self.affinity(latent);
        let click = saturating(self.click_slope, a);
        let atc = click * saturating(self.atc_slope, a);
        let order = atc * saturating(self.order_slope, a);
        [1.0 - click, click - atc, atc - order, order]
    }

    /// Probability of an add-to-cart or order at 0-based `position`.
    pub fn p_cart_at(&self, latent: Latent, position: usize) -> f64 {
        let d = self.outcome_distribution(latent);
        self.persistence.powi(position as i32) * (d[2] + d[3])
    }

    fn sample_examined(&self, latent: Latent, rng: &mut ChaCha8Rng) -> EngagementOutcome {
        let a = self.affinity(latent);
        if rng.random::<f64>() >= saturating(self.click_slope, a) {
            return EngagementOutcome::NonEngaged;
        }
        if rng.random::<f64>() >= saturating(self.atc_slope, a) {
            return EngagementOutcome::Clicked;
        }
        if rng.random::<f64>() >= saturating(self.order_slope, a) {
            return EngagementOutcome::AddedToCart;
        }
        EngagementOutcome::Ordered
    }
}

/// Simulates one user session over `ranking` (latent truth in display order).
pub fn simulate_session(
    ranking: &[Latent],
    params: &UserModelParams,
    seed: u64,
) -> Result<Vec<EngagementOutcome>> {
    if ranking.is_empty() {
        return Err(Error::Domain(
            "cannot simulate a session over an empty ranking".into(),
        ));
    }
    params.validate()?;
    let mut rng = seed::rng(seed);
    Ok(session_with_rng(ranking, params, &mut rng))
}

pub(crate) fn session_with_rng(
    ranking: &[Latent],
    params: &UserModelParams,
    rng: &mut ChaCha8Rng,
) -> Vec<EngagementOutcome> {
    let mut out = vec![EngagementOutcome::NonEngaged; ranking.len()];
    for (i, latent) in ranking.iter().enumerate() {
        if i > 0 && rng.random::<f64>() >= params.persistence {
            break;
        }
        out[i] = params.sample_examined(*latent, rng);
    }
    out
}

/// Simulated human rater: `rho` plus Gaussian noise, clamped to [0,1] and
/// bucketed by four increasing cut points into a 0..=4 rating.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct JudgeModelParams {
    pub thresholds: [f64; 4],
    pub judge_noise: f64,
}

impl Default for JudgeModelParams {
    fn default() -> Self {
        JudgeModelParams {
            thresholds: [0.2, 0.4, 0.6, 0.8],
            judge_noise: 0.05,
        }
    }
}

impl JudgeModelParams {
    pub fn validate(&self) -> Result<()> {
        let t = self.thresholds;
        if t.iter().any(|v| !(*v > 0.0 && *v < 1.0)) || t.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidConfig(format!(
                "judge thresholds must increase inside (0,1): {t:?}"
            )));
        }
        if !(self.judge_noise >= 0.0 && self.judge_noise.is_finite()) {
            return Err(Error::InvalidConfig(
                "judge_noise must be finite and non-negative".into(),
            ));
        }
        Ok(())
    }

    pub fn bucket(&self, value: f64) -> u8 {
        self.thresholds.iter().filter(|&&t| value >= t).count() as u8
    }

    pub(crate) fn judge_with_rng(&self, rho: f64, rng: &mut ChaCha8Rng) -> u8 {
        let noise = if self.judge_noise > 0.0 {
            Normal::new(0.0, self.judge_noise)
                .expect("validated")
                .sample(rng)
        } else {
            0.0
        };
        self.bucket((rho + noise).clamp(0.0, 1.0))
    }
}

pub fn simulate_judgment(rho: f64, params: &JudgeModelParams, seed: u64) -> Result<u8> {
    if !(0.0..=1.0).contains(&rho) {
        return Err(Error::Domain(format!("rho = {rho} outside [0,1]")));
    }
    params.validate()?;
    let mut rng = seed::rng(seed);
    Ok(params.judge_with_rng(rho, &mut rng))
}

/// Weight of `rho` in the logging policy's ranking score.
const LOGGING_CONTENT_WEIGHT: f64 = 0.5;

fn sample_rho(mixture: &[[f64; 3]], rng: &mut ChaCha8Rng) -> f64 {
    let total: f64 = mixture.iter().map(|c| c[0]).sum();
    let u = rng.random::<f64>() * total;
    let mut acc = 0.0;
    let mut pick = mixture[mixture.len() - 1];
    for c in mixture {
        acc += c[0];
        if u < acc {
            pick = *c;
            break;
        }
    }
    Beta::new(pick[1], pick[2]).expect("validated").sample(rng)
}

/// Strictly increasing shape applied to `rho` by sparse feature `j`.
fn sparse_shape(j: usize, rho: f64) -> f64 {
    match j % 4 {
        0 => rho,
        1 => rho.sqrt(),
        2 => rho * rho,
        _ => (1.0 + 3.0 * rho).ln(),
    }
}

fn sample_segment(mix: &[f64; 3], rng: &mut ChaCha8Rng) -> Segment {
    let total: f64 = mix.iter().sum();
    let u = rng.random::<f64>() * total;
    let mut acc = 0.0;
    for (s, w) in Segment::ALL.iter().zip(mix) {
        acc += w;
        if u < acc {
            return *s;
        }
    }
    Segment::Tail
}

/// A noisy logging-policy ranking of `latents` (indices in display order).
fn logging_ranking(latents: &[Latent], noise: f64, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let normal = (noise > 0.0).then(|| Normal::new(0.0, noise).expect("validated"));
    let keys: Vec<f64> = latents
        .iter()
        .map(|l| {
            let base = LOGGING_CONTENT_WEIGHT * l.rho + (1.0 - LOGGING_CONTENT_WEIGHT) * l.pi;
            base + normal.map_or(0.0, |n| n.sample(rng))
        })
        .collect();
    let mut order: Vec<usize> = (0..latents.len()).collect();
    order.sort_by(|&a, &b| keys[b].total_cmp(&keys[a]).then(a.cmp(&b)));
    order
}

fn simulate_logged(
    latents: &[Latent],
    noise: f64,
    user: &UserModelParams,
    rng: &mut ChaCha8Rng,
) -> Vec<EngagementOutcome> {
    let order = logging_ranking(latents, noise, rng);
    let shown: Vec<Latent> = order.iter().map(|&i| latents[i]).collect();
    let outcomes = session_with_rng(&shown, user, rng);
    let mut by_item = vec![EngagementOutcome::NonEngaged; latents.len()];
    for (pos, &i) in order.iter().enumerate() {
        by_item[i] = outcomes[pos];
    }
    by_item
}

fn generate_group(config: &GenConfig, user: &UserModelParams, index: usize) -> QueryGroup {
    let mut rng = seed::rng(seed::derive(config.seed, index as u64));
    let segment = sample_segment(&config.segment_mix, &mut rng);
    let n = config.items_per_group;
    let pi_dist =
        Beta::new(config.propensity_shape[0], config.propensity_shape[1]).expect("validated");
    let latents: Vec<Latent> = (0..n)
        .map(|_| Latent {
            rho: sample_rho(&config.relevance_mixture, &mut rng),
            pi: pi_dist.sample(&mut rng),
        })
        .collect();

    let sparse = (config.sparse_noise > 0.0)
        .then(|| Normal::new(0.0, config.sparse_noise).expect("validated"));
    let xe = (config.xe_noise > 0.0).then(|| Normal::new(0.0, config.xe_noise).expect("validated"));
    let pop = (config.engagement_feature_noise > 0.0)
        .then(|| Normal::new(0.0, config.engagement_feature_noise).expect("validated"));

    let mut features: Vec<Vec<f64>> = latents
        .iter()
        .map(|l| {
            let mut v: Vec<f64> = (0..config.n_sparse_features)
                .map(|j| sparse_shape(j, l.rho) + sparse.map_or(0.0, |d| d.sample(&mut rng)))
                .collect();
            v.push(l.rho + xe.map_or(0.0, |d| d.sample(&mut rng)));
            v
        })
        .collect();

    // historical traffic behind the engagement-rate features
    let mut counts = vec![[0u32; 3]; n];
    for _ in 0..config.history_sessions {
        for (i, o) in simulate_logged(&latents, config.logging_noise, user, &mut rng)
            .iter()
            .enumerate()
        {
            counts[i][0] += u32::from(*o >= EngagementOutcome::Clicked);
            counts[i][1] += u32::from(*o >= EngagementOutcome::AddedToCart);
            counts[i][2] += u32::from(*o >= EngagementOutcome::Ordered);
        }
    }
    let denom = config.history_sessions.max(1) as f64;
    for (i, f) in features.iter_mut().enumerate() {
        f.extend(counts[i].iter().map(|&c| f64::from(c) / denom));
        f.push(latents[i].pi + pop.map_or(0.0, |d| d.sample(&mut rng)));
    }

    // the logged search event this group represents
    let outcomes = simulate_logged(&latents, config.logging_noise, user, &mut rng);

    let items = (0..n)
        .map(|i| Item {
            product: Product::new(format!("q{index:05}-p{i:03}")),
            features: FeatureVector::new(std::mem::take(&mut features[i]))
                .expect("finite by construction"),
            outcome: outcomes[i],
            latent: Some(latents[i]),
        })
        .collect();
    QueryGroup {
        group_id: format!("g{index:05}"),
        query: Query {
            id: format!("q{index:05}"),
            segment,
        },
        items,
    }
}

/// Generates a corpus. Each group is seeded from `(config.seed, index)`, so
/// generation parallelizes without affecting the output.
pub fn generate_corpus(config: &GenConfig, user: &UserModelParams) -> Result<Dataset> {
    config.validate()?;
    user.validate()?;
    let groups: Vec<QueryGroup> = (0..config.n_queries)
        .into_par_iter()
        .map(|i| generate_group(config, user, i))
        .collect();
    Dataset::new(config.schema(), groups)
}
