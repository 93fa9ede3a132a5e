//! Shapley attributions for tree ensembles.
//!
//! Both routes share one value function: for a feature subset `S`, a tree's
//! output follows `x` at splits on features in `S` and averages the children
//! by cover everywhere else. [`tree_shap`] computes the Shapley values of that
//! game in polynomial time by tracking path weights; [`brute_force_shapley`]
//! enumerates every subset.

use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::ranker::{NodeKind, Tree, TreeEnsemble};

/// Largest number of distinct split features [`brute_force_shapley`] accepts.
pub const MAX_BRUTE_FORCE_FEATURES: usize = 12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Attribution {
    pub phi: Vec<f64>,
    pub base_value: f64,
}

impl Attribution {
    /// `base_value + sum(phi)`, which equals the model output.
    pub fn total(&self) -> f64 {
        self.base_value + self.phi.iter().sum::<f64>()
    }
}

fn check_inputs(ensemble: &TreeEnsemble, x: &[f64]) -> Result<()> {
    if x.len() != ensemble.n_features() {
        return Err(Error::SchemaMismatch(format!(
            "model expects {} features, got {}",
            ensemble.n_features(),
            x.len()
        )));
    }
    for (t, tree) in ensemble.trees().iter().enumerate() {
        if let Some(node) = tree.nodes().iter().position(|n| !(n.cover > 0.0)) {
            return Err(Error::ZeroCover { tree: t, node });
        }
    }
    Ok(())
}

fn base_value(ensemble: &TreeEnsemble) -> f64 {
    ensemble.base_score()
        + ensemble.learning_rate()
            * ensemble
                .trees()
                .iter()
                .map(Tree::expected_value)
                .sum::<f64>()
}

#[derive(Clone, Copy, Debug)]
struct PathElement {
    feature: Option<usize>,
    zero_fraction: f64,
    one_fraction: f64,
    weight: f64,
}

fn extend_path(
    path: &mut Vec<PathElement>,
    zero_fraction: f64,
    one_fraction: f64,
    feature: Option<usize>,
) {
    let depth = path.len();
    path.push(PathElement {
        feature,
        zero_fraction,
        one_fraction,
        weight: if depth == 0 { 1.0 } else { 0.0 },
    });
    let d = depth as f64;
    for i in (0..depth).rev() {
        let w = path[i].weight;
        path[i + 1].weight += one_fraction * w * (i as f64 + 1.0) / (d + 1.0);
        path[i].weight = zero_fraction * w * (d - i as f64) / (d + 1.0);
    }
}

fn unwind_path(path: &mut Vec<PathElement>, index: usize) {
    let depth = path.len() - 1;
    let d = depth as f64;
    let one = path[index].one_fraction;
    let zero = path[index].zero_fraction;
    let mut next_one_portion = path[depth].weight;
    for i in (0..depth).rev() {
        if one != 0.0 {
            let tmp = path[i].weight;
            path[i].weight = next_one_portion * (d + 1.0) / ((i as f64 + 1.0) * one);
            next_one_portion = tmp - path[i].weight * zero * (d - i as f64) / (d + 1.0);
        } else {
            path[i].weight = path[i].weight * (d + 1.0) / (zero * (d - i as f64));
        }
    }
    for i in index..depth {
        path[i].feature = path[i + 1].feature;
        path[i].zero_fraction = path[i + 1].zero_fraction;
        path[i].one_fraction = path[i + 1].one_fraction;
    }
    path.pop();
}

/// Total weight of the path with element `index` removed, without mutating it.
fn unwound_sum(path: &[PathElement], index: usize) -> f64 {
    let depth = path.len() - 1;
    let d = depth as f64;
    let one = path[index].one_fraction;
    let zero = path[index].zero_fraction;
    let mut next_one_portion = path[depth].weight;
    let mut total = 0.0;
    for i in (0..depth).rev() {
        if one != 0.0 {
            let tmp = next_one_portion * (d + 1.0) / ((i as f64 + 1.0) * one);
            total += tmp;
            next_one_portion = path[i].weight - tmp * zero * (d - i as f64) / (d + 1.0);
        } else {
            total += path[i].weight / zero / ((d - i as f64) / (d + 1.0));
        }
    }
    total
}

#[allow(clippy::too_many_arguments)]
fn recurse(
    tree: &Tree,
    x: &[f64],
    node: usize,
    mut path: Vec<PathElement>,
    zero_fraction: f64,
    one_fraction: f64,
    feature: Option<usize>,
    scale: f64,
    phi: &mut [f64],
) {
    extend_path(&mut path, zero_fraction, one_fraction, feature);
    let n = tree.node(node);
    match n.kind {
        NodeKind::Leaf { value } => {
            for i in 1..path.len() {
                let w = unwound_sum(&path, i);
                let el = path[i];
                let f = el.feature.expect("only the root element lacks a feature");
                phi[f] += w * (el.one_fraction - el.zero_fraction) * value * scale;
            }
        }
        NodeKind::Split {
            feature: split,
            threshold,
            left,
            right,
        } => {
            let (hot, cold) = if x[split] < threshold {
                (left, right)
            } else {
                (right, left)
            };
            let hot_zero = tree.node(hot).cover / n.cover;
            let cold_zero = tree.node(cold).cover / n.cover;
            let mut incoming_zero = 1.0;
            let mut incoming_one = 1.0;
            if let Some(k) = path.iter().position(|e| e.feature == Some(split)) {
                incoming_zero = path[k].zero_fraction;
                incoming_one = path[k].one_fraction;
                unwind_path(&mut path, k);
            }
            recurse(
                tree,
                x,
                hot,
                path.clone(),
                hot_zero * incoming_zero,
                incoming_one,
                Some(split),
                scale,
                phi,
            );
            recurse(
                tree,
                x,
                cold,
                path,
                cold_zero * incoming_zero,
                0.0,
                Some(split),
                scale,
                phi,
            );
        }
    }
}

/// Adds one tree's attributions, multiplied by `scale`, into `phi`.
pub fn tree_shap_single(tree: &Tree, x: &[f64], scale: f64, phi: &mut [f64]) {
    recurse(
        tree,
        x,
        0,
        Vec::with_capacity(tree.depth() + 2),
        1.0,
        1.0,
        None,
        scale,
        phi,
    );
}

/// Path-dependent TreeSHAP over the whole ensemble.
pub fn tree_shap(ensemble: &TreeEnsemble, x: &[f64]) -> Result<Attribution> {
    check_inputs(ensemble, x)?;
    let mut phi = vec![0.0; x.len()];
    for tree in ensemble.trees() {
        tree_shap_single(tree, x, ensemble.learning_rate(), &mut phi);
    }
    Ok(Attribution {
        phi,
        base_value: base_value(ensemble),
    })
}

/// Expected tree output when only features with `mask[f]` follow `x`.
fn conditional_value(tree: &Tree, x: &[f64], mask: &[bool], node: usize) -> f64 {
    let n = tree.node(node);
    match n.kind {
        NodeKind::Leaf { value } => value,
        NodeKind::Split {
            feature,
            threshold,
            left,
            right,
        } => {
            if mask[feature] {
                let next = if x[feature] < threshold { left } else { right };
                conditional_value(tree, x, mask, next)
            } else {
                let l = tree.node(left).cover / n.cover;
                let r = tree.node(right).cover / n.cover;
                l * conditional_value(tree, x, mask, left)
                    + r * conditional_value(tree, x, mask, right)
            }
        }
    }
}

/// Exact Shapley values by enumerating all subsets of the split features.
pub fn brute_force_shapley(ensemble: &TreeEnsemble, x: &[f64]) -> Result<Attribution> {
    check_inputs(ensemble, x)?;
    let active = ensemble.active_features();
    let m = active.len();
    if m > MAX_BRUTE_FORCE_FEATURES {
        return Err(Error::TooManyFeatures(m));
    }
    let n_subsets = 1usize << m;
    let mut values = vec![0.0; n_subsets];
    let mut mask = vec![false; x.len()];
    for (s, value) in values.iter_mut().enumerate() {
        for (bit, &f) in active.iter().enumerate() {
            mask[f] = s & (1 << bit) != 0;
        }
        *value = ensemble.base_score()
            + ensemble.learning_rate()
                * ensemble
                    .trees()
                    .iter()
                    .map(|t| conditional_value(t, x, &mask, 0))
                    .sum::<f64>();
    }
    // weight(|S|) = |S|! (m - |S| - 1)! / m!
    let mut fact = vec![1.0f64; m + 1];
    for i in 1..=m {
        fact[i] = fact[i - 1] * i as f64;
    }
    let mut phi = vec![0.0; x.len()];
    for (bit, &f) in active.iter().enumerate() {
        let mut acc = 0.0;
        for s in (0..n_subsets).filter(|s| s & (1 << bit) == 0) {
            let size = s.count_ones() as usize;
            let w = fact[size] * fact[m - size - 1] / fact[m];
            acc += w * (values[s | (1 << bit)] - values[s]);
        }
        phi[f] = acc;
    }
    Ok(Attribution {
        phi,
        base_value: values[0],
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ImportanceReport {
    pub feature_names: Vec<String>,
    pub mean_abs_shap: Vec<f64>,
    /// 1-based rank per feature; 1 is most important, ties by feature index.
    pub rank: Vec<usize>,
    pub n_samples: usize,
}

impl ImportanceReport {
    pub fn rank_of(&self, name: &str) -> Option<(usize, f64)> {
        let i = self.feature_names.iter().position(|n| n == name)?;
        Some((self.rank[i], self.mean_abs_shap[i]))
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "rank,feature,mean_abs_shap")?;
        let mut order: Vec<usize> = (0..self.rank.len()).collect();
        order.sort_by_key(|&i| self.rank[i]);
        for i in order {
            writeln!(
                out,
                "{},{},{}",
                self.rank[i], self.feature_names[i], self.mean_abs_shap[i]
            )?;
        }
        Ok(())
    }
}

/// Mean |phi| per feature over `sample`, with ranks.
pub fn feature_importance<'a, I>(ensemble: &TreeEnsemble, sample: I) -> Result<ImportanceReport>
where
    I: IntoIterator<Item = &'a [f64]>,
{
    let d = ensemble.n_features();
    let mut sums = vec![0.0; d];
    let mut n = 0usize;
    for x in sample {
        let a = tree_shap(ensemble, x)?;
        for (s, p) in sums.iter_mut().zip(&a.phi) {
            *s += p.abs();
        }
        n += 1;
    }
    if n == 0 {
        return Err(Error::InsufficientSamples { needed: 1, got: 0 });
    }
    let mean_abs_shap: Vec<f64> = sums.iter().map(|s| s / n as f64).collect();
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| {
        mean_abs_shap[b]
            .total_cmp(&mean_abs_shap[a])
            .then(a.cmp(&b))
    });
    let mut rank = vec![0; d];
    for (r, &f) in order.iter().enumerate() {
        rank[f] = r + 1;
    }
    Ok(ImportanceReport {
        feature_names: ensemble
            .schema()
            .features()
            .iter()
            .map(|f| f.name.clone())
            .collect(),
        mean_abs_shap,
        rank,
        n_samples: n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datamodel::{Channel, FeatureDef, Schema};
    use crate::ranker::Node;

    fn schema(d: usize) -> Schema {
        Schema::new(
            (0..d)
                .map(|i| FeatureDef::new(format!("f{i}"), Channel::SparseContent))
                .collect(),
        )
        .unwrap()
    }

    fn split(cover: f64, feature: usize, threshold: f64, left: usize, right: usize) -> Node {
        Node {
            cover,
            kind: NodeKind::Split {
                feature,
                threshold,
                left,
                right,
            },
        }
    }

    fn leaf(cover: f64, value: f64) -> Node {
        Node {
            cover,
            kind: NodeKind::Leaf { value },
        }
    }

    fn stump(lr: f64) -> TreeEnsemble {
        let t = Tree::from_nodes(vec![
            split(10.0, 0, 0.5, 1, 2),
            leaf(5.0, 0.0),
            leaf(5.0, 1.0),
        ]);
        TreeEnsemble::new(vec![t], lr, 0.0, schema(3)).unwrap()
    }

    #[test]
    fn single_leaf_has_no_attribution() {
        let e = TreeEnsemble::new(vec![Tree::leaf(2.5, 7.0)], 0.1, 1.0, schema(2)).unwrap();
        let a = tree_shap(&e, &[3.0, 4.0]).unwrap();
        assert_eq!(a.phi, vec![0.0, 0.0]);
        assert_eq!(a.base_value, 1.0 + 0.1 * 2.5);
        let b = brute_force_shapley(&e, &[3.0, 4.0]).unwrap();
        assert_eq!(b.phi, vec![0.0, 0.0]);
    }

    #[test]
    fn stump_attribution() {
        let lr = 0.3;
        let a = tree_shap(&stump(lr), &[0.8, 0.0, 0.0]).unwrap();
        assert!((a.phi[0] - lr * 0.5).abs() < 1e-15);
        assert_eq!(&a.phi[1..], &[0.0, 0.0]);
        assert!((a.base_value - lr * 0.5).abs() < 1e-15);
    }

    #[test]
    fn duplicate_features_share_credit() {
        // f0 and f1 split identically, each in its own tree
        let t0 = Tree::from_nodes(vec![
            split(4.0, 0, 0.5, 1, 2),
            leaf(2.0, -1.0),
            leaf(2.0, 3.0),
        ]);
        let t1 = Tree::from_nodes(vec![
            split(4.0, 1, 0.5, 1, 2),
            leaf(2.0, -1.0),
            leaf(2.0, 3.0),
        ]);
        let e = TreeEnsemble::new(vec![t0, t1], 1.0, 0.0, schema(2)).unwrap();
        let b = brute_force_shapley(&e, &[0.9, 0.9]).unwrap();
        assert!((b.phi[0] - b.phi[1]).abs() < 1e-12);
        let t = tree_shap(&e, &[0.9, 0.9]).unwrap();
        assert!((t.phi[0] - t.phi[1]).abs() < 1e-12);
    }

    #[test]
    fn repeated_feature_on_a_path() {
        let t = Tree::from_nodes(vec![
            split(8.0, 0, 0.5, 1, 2),
            split(3.0, 1, 0.2, 3, 4),
            split(5.0, 0, 0.8, 5, 6),
            leaf(1.0, 2.0),
            leaf(2.0, -1.0),
            leaf(4.0, 0.5),
            leaf(1.0, 4.0),
        ]);
        let e = TreeEnsemble::new(vec![t], 1.0, 0.0, schema(2)).unwrap();
        for x in [[0.9, 0.1], [0.6, 0.9], [0.1, 0.1], [0.1, 0.5]] {
            let a = tree_shap(&e, &x).unwrap();
            let b = brute_force_shapley(&e, &x).unwrap();
            for (p, q) in a.phi.iter().zip(&b.phi) {
                assert!((p - q).abs() < 1e-12, "{x:?}: {:?} vs {:?}", a.phi, b.phi);
            }
            assert!((a.total() - e.predict(&x).unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn importance_of_stump() {
        let lr = 0.3;
        let e = stump(lr);
        let xs = [
            [0.8, 5.0, 5.0],
            [0.1, 5.0, 5.0],
            [0.9, 1.0, 1.0],
            [0.2, 0.0, 0.0],
        ];
        let rep = feature_importance(&e, xs.iter().map(|x| x.as_slice())).unwrap();
        assert!((rep.mean_abs_shap[0] - lr * 0.5).abs() < 1e-15);
        assert_eq!(rep.rank, vec![1, 2, 3]);
        let doubled: Vec<&[f64]> = xs.iter().chain(xs.iter()).map(|x| x.as_slice()).collect();
        let rep2 = feature_importance(&e, doubled).unwrap();
        assert_eq!(rep.mean_abs_shap, rep2.mean_abs_shap);
        assert_eq!(rep.rank, rep2.rank);
        assert!(feature_importance(&e, std::iter::empty()).is_err());
    }

    #[test]
    fn input_errors() {
        let e = stump(0.1);
        assert!(matches!(
            tree_shap(&e, &[0.1]),
            Err(Error::SchemaMismatch(_))
        ));
    }
}
