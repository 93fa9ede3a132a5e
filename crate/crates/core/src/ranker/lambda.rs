//! NDCG-weighted pairwise logistic gradients (LambdaRank).

use crate::error::{Error, Result};
use crate::eval::metrics::{discount, ideal_dcg_at_k, Gain};

/// Pair weights are snapped to this grid so that per-item accumulation is
/// exact in f64 and the gradients of a group sum to exactly zero.
const GRID: f64 = (1u64 << 40) as f64;

#[inline]
fn snap(x: f64) -> f64 {
    (x * GRID).round() / GRID
}

/// Positions (0-based) of each item when sorted by descending score, ties
/// broken by input index.
pub fn positions_by_score(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    let mut pos = vec![0; scores.len()];
    for (p, &i) in order.iter().enumerate() {
        pos[i] = p;
    }
    pos
}

/// |ΔNDCG@k| (identity gain) from swapping the items at positions `pi`, `pj`.
#[inline]
pub fn swap_delta(yi: f64, yj: f64, pi: usize, pj: usize, k: usize, idcg: f64) -> f64 {
    let d = |p: usize| if p < k { discount(p) } else { 0.0 };
    ((yi - yj) * (d(pi) - d(pj))).abs() / idcg
}

/// Per-item (gradient, hessian) of the NDCG-weighted pairwise logistic loss.
///
/// For every pair with `labels[i] > labels[j]`, with `rho = 1/(1+exp(s_i - s_j))`
/// and `delta` the NDCG@k change from swapping them in the current order,
/// item `i` receives `-rho*delta`, item `j` receives `+rho*delta`, and both
/// receive hessian `rho*(1-rho)*delta`.
pub fn lambda_gradients(scores: &[f64], labels: &[f64], k: usize) -> Result<Vec<(f64, f64)>> {
    if scores.len() != labels.len() {
        return Err(Error::Domain(format!(
            "{} scores for {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if scores.len() < 2 {
        return Err(Error::Domain("a group needs at least two items".into()));
    }
    if k == 0 {
        return Err(Error::Domain("truncation k must be at least 1".into()));
    }
    let mut out = vec![(0.0, 0.0); scores.len()];
    lambda_gradients_into(scores, labels, k, &mut out);
    Ok(out)
}

/// Unchecked core of [`lambda_gradients`], writing into `out`.
pub(crate) fn lambda_gradients_into(
    scores: &[f64],
    labels: &[f64],
    k: usize,
    out: &mut [(f64, f64)],
) {
    out.iter_mut().for_each(|o| *o = (0.0, 0.0));
    let idcg = ideal_dcg_at_k(labels, k, Gain::Identity);
    if idcg <= 0.0 {
        return;
    }
    let pos = positions_by_score(scores);
    let n = scores.len();
    for i in 0..n {
        for j in (i + 1)..n {
            let (hi, lo) = if labels[i] > labels[j] {
                (i, j)
            } else if labels[j] > labels[i] {
                (j, i)
            } else {
                continue;
            };
            let delta = swap_delta(labels[hi], labels[lo], pos[hi], pos[lo], k, idcg);
            if delta == 0.0 {
                continue;
            }
            let rho = 1.0 / (1.0 + (scores[hi] - scores[lo]).exp());
            let lambda = snap(rho * delta);
            let h = rho * (1.0 - rho) * delta;
            out[hi].0 -= lambda;
            out[lo].0 += lambda;
            out[hi].1 += h;
            out[lo].1 += h;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::metrics::ndcg_at_k_with;

    #[test]
    fn saturated_pair_has_vanishing_gradient() {
        let g = lambda_gradients(&[10.0, -10.0], &[1.0, 0.0], 10).unwrap();
        assert!(g[0].0.abs() < 1e-4 && g[1].0.abs() < 1e-4);
    }

    #[test]
    fn tied_scores_give_half_delta() {
        let g = lambda_gradients(&[0.0, 0.0], &[1.0, 0.0], 2).unwrap();
        // delta from the metric itself: current order vs swapped
        let cur = ndcg_at_k_with(&[1.0, 0.0], 2, Gain::Identity)
            .unwrap()
            .unwrap();
        let swapped = ndcg_at_k_with(&[0.0, 1.0], 2, Gain::Identity)
            .unwrap()
            .unwrap();
        let delta = (cur - swapped).abs();
        assert!((g[0].0 + 0.5 * delta).abs() < 1e-12);
        assert_eq!(g[1].0, -g[0].0);
        assert!((g[0].1 - 0.25 * delta).abs() < 1e-15);
    }

    #[test]
    fn constant_labels_yield_zero() {
        let g = lambda_gradients(&[0.3, -1.0, 2.0], &[2.0, 2.0, 2.0], 3).unwrap();
        assert!(g.iter().all(|&(a, b)| a == 0.0 && b == 0.0));
        let g = lambda_gradients(&[0.3, -1.0], &[0.0, 0.0], 3).unwrap();
        assert!(g.iter().all(|&(a, b)| a == 0.0 && b == 0.0));
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(lambda_gradients(&[1.0], &[1.0], 3).is_err());
        assert!(lambda_gradients(&[1.0, 2.0], &[1.0], 3).is_err());
        assert!(lambda_gradients(&[1.0, 2.0], &[1.0, 0.0], 0).is_err());
    }
}
