//! DCG and NDCG.

use crate::error::{Error, Result};

/// Mapping from a relevance grade to a DCG gain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Gain {
    /// `2^r - 1`, the usual choice for judged ratings.
    #[default]
    Exponential,
    /// `r`, used for training labels that are already calibrated.
    Identity,
}

impl Gain {
    #[inline]
    pub fn apply(self, r: f64) -> f64 {
        match self {
            Gain::Exponential => r.exp2() - 1.0,
            Gain::Identity => r,
        }
    }
}

/// Discount for 0-based `position`: 1 / log2(position + 2).
#[inline]
pub fn discount(position: usize) -> f64 {
    1.0 / ((position + 2) as f64).log2()
}

fn check(ratings: &[f64], k: usize) -> Result<()> {
    if ratings.is_empty() {
        return Err(Error::Domain("ndcg of an empty list".into()));
    }
    if k == 0 {
        return Err(Error::Domain("ndcg truncation k must be at least 1".into()));
    }
    if let Some(r) = ratings.iter().find(|r| !(**r >= 0.0) || !r.is_finite()) {
        return Err(Error::Domain(format!(
            "rating {r} is negative or not finite"
        )));
    }
    Ok(())
}

pub fn dcg_at_k(ratings: &[f64], k: usize, gain: Gain) -> f64 {
    ratings
        .iter()
        .take(k)
        .enumerate()
        .map(|(i, &r)| gain.apply(r) * discount(i))
        .sum()
}

pub fn ideal_dcg_at_k(ratings: &[f64], k: usize, gain: Gain) -> f64 {
    let mut sorted = ratings.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    dcg_at_k(&sorted, k, gain)
}

/// NDCG@k with exponential gain. `Ok(None)` is the undefined case (IDCG = 0).
pub fn ndcg_at_k(ratings: &[f64], k: usize) -> Result<Option<f64>> {
    ndcg_at_k_with(ratings, k, Gain::Exponential)
}

pub fn ndcg_at_k_with(ratings: &[f64], k: usize, gain: Gain) -> Result<Option<f64>> {
    check(ratings, k)?;
    let ideal = ideal_dcg_at_k(ratings, k, gain);
    if ideal <= 0.0 {
        return Ok(None);
    }
    Ok(Some((dcg_at_k(ratings, k, gain) / ideal).min(1.0)))
}

/// NDCG@k of `ranked` normalized by the ideal DCG of a (possibly larger)
/// judged `pool`. Returns `None` when the pool's ideal DCG is zero.
pub fn ndcg_against_pool(
    ranked: &[f64],
    pool: &[f64],
    k: usize,
    gain: Gain,
) -> Result<Option<f64>> {
    check(ranked, k)?;
    check(pool, k)?;
    let ideal = ideal_dcg_at_k(pool, k, gain);
    if ideal <= 0.0 {
        return Ok(None);
    }
    Ok(Some(dcg_at_k(ranked, k, gain) / ideal))
}
