mod common;

use common::{group, item, latent_corpus, random_ensemble, schema};
use ltrkit::datamodel::{Channel, Dataset, EngagementOutcome, FeatureDef, Latent, Schema};
use ltrkit::eval::evaluate_offline;
use ltrkit::explain::{brute_force_shapley, feature_importance, tree_shap};
use ltrkit::interleave::{run_interleaving_experiment, team_draft_seeded, InterleaveConfig, Team};
use ltrkit::ranker::{train_ranker, TrainConfig, Tree, TreeEnsemble};
use ltrkit::synthgen::{JudgeModelParams, UserModelParams};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::HashSet;

fn rho_labels(d: &Dataset) -> Vec<Vec<f64>> {
    d.groups()
        .iter()
        .map(|g| g.items.iter().map(|i| i.latent.unwrap().rho).collect())
        .collect()
}

/// Ensemble whose score is `sign * feature[f]` through one fine-grained tree
/// per threshold.
fn linear_on(feature: usize, sign: f64, n_features: usize) -> TreeEnsemble {
    use ltrkit::ranker::{Node, NodeKind};
    let trees = (1..50)
        .map(|i| {
            let t = i as f64 / 50.0;
            Tree::from_nodes(vec![
                Node {
                    cover: 2.0,
                    kind: NodeKind::Split {
                        feature,
                        threshold: t,
                        left: 1,
                        right: 2,
                    },
                },
                Node {
                    cover: 1.0,
                    kind: NodeKind::Leaf { value: 0.0 },
                },
                Node {
                    cover: 1.0,
                    kind: NodeKind::Leaf { value: sign },
                },
            ])
        })
        .collect();
    TreeEnsemble::new(trees, 1.0, 0.0, schema(n_features)).unwrap()
}

#[test]
fn ranker_learns_a_separable_corpus() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let d = latent_corpus(&mut rng, 60, 15);
    let labels: Vec<Vec<f64>> = d
        .groups()
        .iter()
        .map(|g| {
            g.items
                .iter()
                .map(|i| (i.features[0] * 4.0).floor())
                .collect()
        })
        .collect();
    let config = TrainConfig {
        n_trees: 40,
        min_leaf_count: 5,
        ..Default::default()
    };
    let out = train_ranker(&d, &labels, &config).unwrap();
    assert_eq!(out.train_ndcg.len(), 41);
    assert!(
        *out.train_ndcg.last().unwrap() > 0.99,
        "{:?}",
        out.train_ndcg.last()
    );
    assert!(
        out.train_ndcg.windows(2).all(|w| w[1] >= w[0] - 1e-9),
        "{:?}",
        out.train_ndcg
    );
    assert_eq!(out.ensemble.trees()[0].split_features().next(), Some(0));
}

#[test]
fn ranker_is_deterministic_and_seed_sensitive_with_subsampling() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let d = latent_corpus(&mut rng, 30, 10);
    let labels = rho_labels(&d);
    let config = TrainConfig {
        n_trees: 10,
        min_leaf_count: 3,
        subsample: 0.7,
        seed: 5,
        ..Default::default()
    };
    let a = train_ranker(&d, &labels, &config).unwrap();
    let b = train_ranker(&d, &labels, &config).unwrap();
    assert_eq!(a.ensemble, b.ensemble);
    assert_eq!(a.train_ndcg, b.train_ndcg);
    let c = train_ranker(&d, &labels, &TrainConfig { seed: 6, ..config }).unwrap();
    assert_ne!(a.ensemble, c.ensemble);
}

#[test]
fn excluded_channels_are_never_split_on() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let base = latent_corpus(&mut rng, 30, 10);
    let s = Schema::new(vec![
        FeatureDef::new("xe", Channel::XeDense),
        FeatureDef::new("noise", Channel::SparseContent),
    ])
    .unwrap();
    let d = Dataset::new(s, base.into_groups()).unwrap();
    let labels = rho_labels(&d);
    let free = train_ranker(
        &d,
        &labels,
        &TrainConfig {
            n_trees: 5,
            ..Default::default()
        },
    )
    .unwrap();
    assert!(free.ensemble.active_features().contains(&0));
    let config = TrainConfig {
        n_trees: 5,
        exclude_channels: vec![Channel::XeDense],
        ..Default::default()
    };
    let filtered = train_ranker(&d, &labels, &config).unwrap();
    assert!(!filtered.ensemble.active_features().contains(&0));
}

#[test]
fn offline_self_comparison_is_null() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let d = latent_corpus(&mut rng, 50, 20);
    let m = linear_on(0, 1.0, 2);
    let r = evaluate_offline(&m, &m, &d, &JudgeModelParams::default(), 10, 9).unwrap();
    assert_eq!(r.pct_change, 0.0);
    assert_eq!(r.test.p, 1.0);
    assert!(r.per_query.iter().all(|q| q.baseline == q.variant));
}

#[test]
fn offline_oracle_beats_noise() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let d = latent_corpus(&mut rng, 100, 30);
    let oracle = linear_on(0, 1.0, 2);
    let noise = linear_on(1, 1.0, 2);
    let r = evaluate_offline(&noise, &oracle, &d, &JudgeModelParams::default(), 10, 1).unwrap();
    assert!(r.mean_variant > r.mean_baseline);
    assert!(r.pct_change > 0.0);
    assert!(r.test.p < 0.01, "p = {}", r.test.p);
    let again = evaluate_offline(&noise, &oracle, &d, &JudgeModelParams::default(), 10, 1).unwrap();
    assert_eq!(r, again);
}

#[test]
fn offline_rejects_bad_inputs() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let d = latent_corpus(&mut rng, 5, 5);
    let m = linear_on(0, 1.0, 2);
    assert!(evaluate_offline(&m, &m, &d, &JudgeModelParams::default(), 0, 0).is_err());
    let wide = linear_on(0, 1.0, 3);
    assert!(evaluate_offline(&m, &wide, &d, &JudgeModelParams::default(), 10, 0).is_err());
}

fn engagement_corpus(rng: &mut ChaCha8Rng) -> Dataset {
    // feature 0 is the engagement propensity, feature 1 its negation
    let groups = (0..60)
        .map(|g| {
            let items = (0..60)
                .map(|i| {
                    let pi: f64 = rng.random();
                    item(
                        &format!("p{i}"),
                        vec![pi, 1.0 - pi],
                        EngagementOutcome::NonEngaged,
                        Some(Latent {
                            rho: rng.random(),
                            pi,
                        }),
                    )
                })
                .collect();
            group(g, items)
        })
        .collect();
    Dataset::new(schema(2), groups).unwrap()
}

#[test]
fn interleaving_prefers_the_engagement_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let d = engagement_corpus(&mut rng);
    let oracle = linear_on(0, 1.0, 2);
    let anti = linear_on(1, 1.0, 2);
    let config = InterleaveConfig {
        n_sessions: 2000,
        ..Default::default()
    };
    let user = UserModelParams::default();
    let r = run_interleaving_experiment(&anti, &oracle, &d, &user, &config, 3).unwrap();
    assert!(r.atc_variant > r.atc_baseline);
    assert!(r.test.p < 0.01);
    let flipped = run_interleaving_experiment(&oracle, &anti, &d, &user, &config, 3).unwrap();
    assert!(flipped.atc_baseline > flipped.atc_variant);
}

#[test]
fn interleaving_edge_cases() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let d = engagement_corpus(&mut rng);
    let m = linear_on(0, 1.0, 2);
    let user = UserModelParams::default();
    let one = InterleaveConfig {
        n_sessions: 1,
        ..Default::default()
    };
    let r = run_interleaving_experiment(&m, &m, &d, &user, &one, 0).unwrap();
    assert_eq!(r.n_sessions, 1);
    assert!(r.test.degenerate && r.test.p == 1.0);
    let zero = InterleaveConfig {
        n_sessions: 0,
        ..Default::default()
    };
    assert!(run_interleaving_experiment(&m, &m, &d, &user, &zero, 0).is_err());
}

#[test]
fn a_a_interleaving_is_rarely_significant() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let d = engagement_corpus(&mut rng);
    let m = linear_on(0, 1.0, 2);
    let config = InterleaveConfig {
        n_sessions: 2000,
        ..Default::default()
    };
    let significant = (0..10)
        .filter(|&s| {
            let r =
                run_interleaving_experiment(&m, &m, &d, &UserModelParams::default(), &config, s)
                    .unwrap();
            r.test.p <= 0.05
        })
        .count();
    assert!(significant <= 1, "{significant} of 10 A/A runs significant");
}

proptest! {
    #[test]
    fn team_draft_invariants(n in 1usize..30, seed_a in any::<u64>(), seed_b in any::<u64>(), coin in any::<u64>()) {
        let mut a: Vec<usize> = (0..n).collect();
        let mut b = a.clone();
        use rand::seq::SliceRandom;
        a.shuffle(&mut ChaCha8Rng::seed_from_u64(seed_a));
        b.shuffle(&mut ChaCha8Rng::seed_from_u64(seed_b));
        let out = team_draft_seeded(&a, &b, coin).unwrap();
        prop_assert_eq!(out.len(), n);
        prop_assert_eq!(out.items.iter().collect::<HashSet<_>>().len(), n);
        // every prefix of even length is balanced; odd prefixes differ by one
        let mut diff = 0i64;
        for (p, t) in out.teams.iter().enumerate() {
            diff += if *t == Team::A { 1 } else { -1 };
            prop_assert!(diff.abs() <= 1);
            if p % 2 == 1 {
                prop_assert_eq!(diff, 0);
            }
        }
        // each team's picks appear in its own preference order
        for (team, list) in [(Team::A, &a), (Team::B, &b)] {
            let picks: Vec<usize> = out.items.iter().zip(&out.teams).filter(|(_, t)| **t == team).map(|(i, _)| *i).collect();
            let rank: Vec<usize> = picks.iter().map(|p| list.iter().position(|x| x == p).unwrap()).collect();
            prop_assert!(rank.windows(2).all(|w| w[0] < w[1]));
        }
        prop_assert_eq!(team_draft_seeded(&a, &b, coin).unwrap(), out);
    }
}

#[test]
fn tree_shap_matches_brute_force_on_random_ensembles() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    for _ in 0..20 {
        let d = rng.random_range(2..8);
        let features: Vec<usize> = (0..d).collect();
        let (n_trees, depth) = (rng.random_range(1..6), rng.random_range(1..6));
        let m = random_ensemble(&mut rng, d, &features, n_trees, depth);
        for _ in 0..5 {
            let x: Vec<f64> = (0..d).map(|_| rng.random()).collect();
            let fast = tree_shap(&m, &x).unwrap();
            let slow = brute_force_shapley(&m, &x).unwrap();
            for (a, b) in fast.phi.iter().zip(&slow.phi) {
                assert!((a - b).abs() <= 1e-9, "{a} vs {b}");
            }
            assert!((fast.base_value - slow.base_value).abs() <= 1e-9);
            assert!((fast.total() - m.predict(&x).unwrap()).abs() <= 1e-9);
        }
    }
}

#[test]
fn importance_ranks_the_informative_feature_first() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let d = latent_corpus(&mut rng, 40, 10);
    let out = train_ranker(
        &d,
        &rho_labels(&d),
        &TrainConfig {
            n_trees: 20,
            ..Default::default()
        },
    )
    .unwrap();
    let rows: Vec<&[f64]> = d.items().map(|(_, i)| i.features.values()).collect();
    let report = feature_importance(&out.ensemble, rows).unwrap();
    assert_eq!(report.rank_of("f0").unwrap().0, 1);
    assert_eq!(report.n_samples, 400);
    let mut csv = Vec::new();
    report.write_csv(&mut csv).unwrap();
    assert!(String::from_utf8(csv)
        .unwrap()
        .starts_with("rank,feature,mean_abs_shap\n1,f0,"));
}
