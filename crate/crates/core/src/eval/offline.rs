//! Offline content-relevance evaluation with simulated judges.

use std::collections::HashMap;
use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use super::metrics::{ndcg_against_pool, Gain};
use crate::datamodel::Dataset;
use crate::error::{Error, Result};
use crate::ranker::{rank_group, TreeEnsemble};
use crate::seed;
use crate::stats::{mean, sample_variance, student_t_two_sided};
use crate::synthgen::JudgeModelParams;

/// Result of a paired t-test. `degenerate` marks the p = 1 conventions for
/// zero variance or fewer than two samples.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TTest {
    pub t: f64,
    pub p: f64,
    pub df: usize,
    pub degenerate: bool,
}

impl TTest {
    pub fn degenerate(n: usize) -> Self {
        TTest {
            t: 0.0,
            p: 1.0,
            df: n.saturating_sub(1),
            degenerate: true,
        }
    }
}

/// Paired t-test on per-unit differences, two-sided.
pub fn paired_t_test(deltas: &[f64]) -> Result<TTest> {
    let n = deltas.len();
    if n < 2 {
        return Err(Error::InsufficientSamples { needed: 2, got: n });
    }
    let var = sample_variance(deltas);
    if var <= 0.0 {
        return Ok(TTest::degenerate(n));
    }
    let t = mean(deltas) / (var / n as f64).sqrt();
    let df = n - 1;
    Ok(TTest {
        t,
        p: student_t_two_sided(t, df as f64),
        df,
        degenerate: false,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QueryNdcg {
    pub query_id: String,
    pub baseline: f64,
    pub variant: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub per_query: Vec<QueryNdcg>,
    pub k: usize,
    pub mean_baseline: f64,
    pub mean_variant: f64,
    /// `100 * (mean_variant - mean_baseline) / mean_baseline`.
    pub pct_change: f64,
    pub test: TTest,
    /// Queries skipped because every judged item was rated 0.
    pub n_undefined: usize,
}

impl EvalReport {
    pub fn n_queries(&self) -> usize {
        self.per_query.len()
    }

    pub const CSV_HEADER: &'static str =
        "metric,n_queries,mean_baseline,mean_variant,pct_change,t,p,degenerate";

    pub fn csv_row(&self) -> String {
        format!(
            "ndcg@{},{},{:.6},{:.6},{:.4},{:.4},{:.6},{}",
            self.k,
            self.n_queries(),
            self.mean_baseline,
            self.mean_variant,
            self.pct_change,
            self.test.t,
            self.test.p,
            self.test.degenerate
        )
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{}", Self::CSV_HEADER)?;
        writeln!(out, "{}", self.csv_row())
    }

    pub fn write_per_query_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "query_id,baseline_ndcg,variant_ndcg")?;
        for q in &self.per_query {
            writeln!(out, "{},{},{}", q.query_id, q.baseline, q.variant)?;
        }
        Ok(())
    }
}

/// Seed for the single judgment of one query-product pair. Shared by every
/// comparison run under the same evaluation seed.
pub fn judgment_seed(seed: u64, query_id: &str, product_id: &str) -> u64 {
    seed::derive_str(seed::derive_str(seed, query_id), product_id)
}

/// Ranks every query with both models, pools their top-k, rates each pooled
/// pair once, and compares NDCG@k (normalized by the pool's ideal DCG) with a
/// paired t-test.
pub fn evaluate_offline(
    baseline: &TreeEnsemble,
    variant: &TreeEnsemble,
    queries: &Dataset,
    judge: &JudgeModelParams,
    k: usize,
    seed: u64,
) -> Result<EvalReport> {
    judge.validate()?;
    if k == 0 {
        return Err(Error::Domain("k must be at least 1".into()));
    }
    baseline.check_schema(queries.schema())?;
    variant.check_schema(queries.schema())?;
    if !queries.has_latent() {
        return Err(Error::InvalidDataset(
            "offline evaluation needs latent relevance".into(),
        ));
    }
    let results: Vec<Option<QueryNdcg>> = queries
        .groups()
        .par_iter()
        .map(|g| -> Result<Option<QueryNdcg>> {
            let top_b: Vec<usize> = rank_group(baseline, g)?.into_iter().take(k).collect();
            let top_v: Vec<usize> = rank_group(variant, g)?.into_iter().take(k).collect();
            let mut ratings: HashMap<usize, f64> = HashMap::new();
            for &i in top_b.iter().chain(&top_v) {
                ratings.entry(i).or_insert_with(|| {
                    let item = &g.items[i];
                    let mut rng = seed::rng(judgment_seed(seed, &g.query.id, &item.product.id));
                    let rho = item.latent.expect("checked above").rho;
                    f64::from(judge.judge_with_rng(rho, &mut rng))
                });
            }
            let mut pool: Vec<usize> = ratings.keys().copied().collect();
            pool.sort_unstable();
            let pool: Vec<f64> = pool.iter().map(|i| ratings[i]).collect();
            let ranked_b: Vec<f64> = top_b.iter().map(|i| ratings[i]).collect();
            let ranked_v: Vec<f64> = top_v.iter().map(|i| ratings[i]).collect();
            let b = ndcg_against_pool(&ranked_b, &pool, k, Gain::Exponential)?;
            let v = ndcg_against_pool(&ranked_v, &pool, k, Gain::Exponential)?;
            Ok(match (b, v) {
                (Some(baseline), Some(variant)) => Some(QueryNdcg {
                    query_id: g.query.id.clone(),
                    baseline,
                    variant,
                }),
                _ => None,
            })
        })
        .collect::<Result<_>>()?;
    let n_undefined = results.iter().filter(|r| r.is_none()).count();
    let per_query: Vec<QueryNdcg> = results.into_iter().flatten().collect();
    if per_query.is_empty() {
        return Err(Error::InsufficientSamples { needed: 1, got: 0 });
    }
    let b: Vec<f64> = per_query.iter().map(|q| q.baseline).collect();
    let v: Vec<f64> = per_query.iter().map(|q| q.variant).collect();
    let deltas: Vec<f64> = per_query.iter().map(|q| q.variant - q.baseline).collect();
    let mean_baseline = mean(&b);
    let mean_variant = mean(&v);
    let test = paired_t_test(&deltas).unwrap_or_else(|_| TTest::degenerate(deltas.len()));
    Ok(EvalReport {
        per_query,
        k,
        mean_baseline,
        mean_variant,
        pct_change: 100.0 * (mean_variant - mean_baseline) / mean_baseline,
        test,
        n_undefined,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_and_symmetric_deltas_give_p_one() {
        let t = paired_t_test(&[0.0; 5]).unwrap();
        assert_eq!((t.t, t.p), (0.0, 1.0));
        assert!(t.degenerate);
        let t = paired_t_test(&[1.0, -1.0]).unwrap();
        assert_eq!(t.t, 0.0);
        assert_eq!(t.p, 1.0);
        assert!(!t.degenerate);
        assert!(paired_t_test(&[1.0]).is_err());
    }

    #[test]
    fn negation_flips_t_only() {
        let d = [0.3, -0.1, 0.7, 0.2, 0.05];
        let neg: Vec<f64> = d.iter().map(|x| -x).collect();
        let a = paired_t_test(&d).unwrap();
        let b = paired_t_test(&neg).unwrap();
        assert_eq!(a.t, -b.t);
        assert_eq!(a.p, b.p);
    }

    #[test]
    fn judgment_seed_depends_on_pair() {
        assert_eq!(judgment_seed(1, "q", "p"), judgment_seed(1, "q", "p"));
        assert_ne!(judgment_seed(1, "q", "p"), judgment_seed(1, "q", "p2"));
        assert_ne!(judgment_seed(1, "q", "p"), judgment_seed(2, "q", "p"));
    }
}
