use ltrkit::datamodel::EngagementOutcome;
use ltrkit::labelforge::{
    compose_label, compute_intervals, cross_entropy, sigmoid_transform, train_content_scorer,
    EngagementGrading, ScorerConfig, SigmoidParams,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn params(alpha: f64, beta: f64) -> SigmoidParams {
    SigmoidParams::new(alpha, beta).unwrap()
}

/// Root of `f` on [lo, hi] by bisection, given a sign change.
fn bisect(mut lo: f64, mut hi: f64, f: impl Fn(f64) -> f64) -> f64 {
    let flo = f(lo);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if (f(mid) > 0.0) == (flo > 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[test]
fn intervals_match_bisection_on_the_derivative() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..100 {
        let p = params(rng.random_range(4.001..50.0), rng.random_range(0.05..0.95));
        let b = compute_intervals(p);
        assert!(!b.degenerate);
        let slope_minus_one = |c: f64| {
            let s = 1.0 / (1.0 + (-p.alpha * (c - p.beta)).exp());
            p.alpha * s * (1.0 - s) - 1.0
        };
        let half = 20.0 / p.alpha;
        let c1 = bisect(p.beta - half, p.beta, slope_minus_one);
        let c2 = bisect(p.beta, p.beta + half, slope_minus_one);
        assert!((b.c1 - c1).abs() < 1e-9, "{p:?}: {} vs {c1}", b.c1);
        assert!((b.c2 - c2).abs() < 1e-9, "{p:?}: {} vs {c2}", b.c2);
    }
}

#[test]
fn interval_examples() {
    let b = compute_intervals(params(12.0, 0.5));
    assert!((b.c1 - 0.3090).abs() < 1e-3 && (b.c2 - 0.6910).abs() < 1e-3);
    let b = compute_intervals(params(10.0, 0.7));
    assert!((b.c1 - 0.4937).abs() < 1e-3 && (b.c2 - 0.9063).abs() < 1e-3);
    for beta in [0.1, 0.5, 0.9] {
        assert!(compute_intervals(params(4.0, beta)).degenerate);
        assert!(compute_intervals(params(2.5, beta)).degenerate);
    }
}

#[test]
fn slope_exceeds_one_exactly_inside_the_interval() {
    for (alpha, beta) in [(12.0, 0.5), (10.0, 0.7), (10.0, 0.3), (30.0, 0.45)] {
        let p = params(alpha, beta);
        let b = compute_intervals(p);
        let h = 1e-6;
        for i in 1..1000 {
            let c = i as f64 / 1000.0;
            if (c - b.c1).abs() < 1e-4 || (c - b.c2).abs() < 1e-4 || c + h > 1.0 {
                continue;
            }
            let d = (sigmoid_transform(c + h, p).unwrap() - sigmoid_transform(c - h, p).unwrap())
                / (2.0 * h);
            assert_eq!(
                d > 1.0,
                c > b.c1 && c < b.c2,
                "alpha {alpha} beta {beta} c {c} slope {d}"
            );
        }
    }
}

#[test]
fn sigmoid_examples() {
    assert_eq!(sigmoid_transform(0.5, params(12.0, 0.5)).unwrap(), 0.5);
    assert_eq!(sigmoid_transform(0.7, params(10.0, 0.7)).unwrap(), 0.5);
    let v = sigmoid_transform(1.0, params(12.0, 0.5)).unwrap();
    assert!((v - 1.0 / (1.0 + (-6.0f64).exp())).abs() < 1e-15);
    assert!((v - 0.997_527).abs() < 1e-6);
    assert!(sigmoid_transform(-0.01, params(12.0, 0.5)).is_err());
    assert!(sigmoid_transform(1.01, params(12.0, 0.5)).is_err());
}

#[test]
fn polarization_pushes_scores_toward_the_extremes() {
    for (alpha, beta) in [(12.0, 0.5), (10.0, 0.7), (20.0, 0.6), (10.0, 0.3)] {
        let p = params(alpha, beta);
        for i in 5..=95 {
            let c = i as f64 / 100.0;
            let t = sigmoid_transform(c, p).unwrap();
            if c < beta && beta >= 0.5 {
                assert!(t < c, "alpha {alpha} beta {beta} c {c}");
            }
            if c > beta && beta <= 0.5 {
                assert!(t > c, "alpha {alpha} beta {beta} c {c}");
            }
        }
    }
}

#[test]
fn label_examples() {
    let g = EngagementGrading::default();
    let l = compose_label(0.5, EngagementOutcome::Ordered, &g, Some(params(12.0, 0.5))).unwrap();
    assert_eq!(l.y, 4.0);
    let l = compose_label(0.37, EngagementOutcome::NonEngaged, &g, None).unwrap();
    assert_eq!((l.y, l.transformed), (0.37, 0.37));
    let l = compose_label(
        1.0,
        EngagementOutcome::AddedToCart,
        &g,
        Some(params(12.0, 0.5)),
    )
    .unwrap();
    assert!((l.y - 3.990_11).abs() < 1e-5);
}

#[test]
fn cross_entropy_minimum_at_half() {
    let grid: Vec<f64> = (1..1000).map(|i| i as f64 / 1000.0).collect();
    let (best, loss) = grid
        .iter()
        .map(|&q| (q, cross_entropy(0.5, q).unwrap()))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap();
    assert_eq!(best, 0.5);
    assert!((loss - std::f64::consts::LN_2).abs() < 1e-12);
    assert!((cross_entropy(1.0, 0.5).unwrap() - std::f64::consts::LN_2).abs() < 1e-12);
    assert!(cross_entropy(1.0, 1.0 - 1e-12).unwrap() < 1e-11);
    assert!(cross_entropy(1.0, 1.0).is_err() && cross_entropy(0.0, 0.0).is_err());
}

#[test]
fn scorer_fits_a_separable_toy_set() {
    let examples: Vec<(Vec<f64>, f64)> = (0..10)
        .map(|i| {
            let x = i as f64 / 9.0;
            (vec![x, 1.0 - x], if i >= 5 { 1.0 } else { 0.0 })
        })
        .collect();
    let cfg = ScorerConfig {
        epochs: 5000,
        learning_rate: 1.0,
    };
    let m = train_content_scorer(vec!["a".into(), "b".into()], &examples, &cfg).unwrap();
    assert!(m.final_loss < 0.1, "loss {}", m.final_loss);
    assert!(m.loss_history.windows(2).all(|w| w[1] <= w[0] + 1e-9));
    for (x, r) in &examples {
        let p = ltrkit::labelforge::predict_content(&m, x).unwrap();
        assert_eq!(p > 0.5, *r > 0.5);
    }
    let doubled: Vec<_> = examples.iter().chain(&examples).cloned().collect();
    let m2 = train_content_scorer(vec!["a".into(), "b".into()], &doubled, &cfg).unwrap();
    for (a, b) in m
        .weights
        .iter()
        .chain([&m.bias])
        .zip(m2.weights.iter().chain([&m2.bias]))
    {
        assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0), "{a} vs {b}");
    }
}

proptest! {
    #[test]
    fn sigmoid_is_strictly_increasing(alpha in 0.5f64..50.0, beta in 0.01f64..0.99, a in 0.0f64..1.0, b in 0.0f64..1.0) {
        prop_assume!((a - b).abs() > 1e-9);
        let p = params(alpha, beta);
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        let (tl, th) = (sigmoid_transform(lo, p).unwrap(), sigmoid_transform(hi, p).unwrap());
        prop_assert!(tl <= th);
        if alpha * (hi - beta) < 30.0 {
            prop_assert!(tl < th);
        }
    }

    #[test]
    fn labels_factor_exactly(c in 0.0f64..=1.0, o in 0usize..4, t in proptest::option::of((0.5f64..50.0, 0.01f64..0.99))) {
        let transform = t.map(|(a, b)| params(a, b));
        let l = compose_label(c, EngagementOutcome::ALL[o], &EngagementGrading::default(), transform).unwrap();
        prop_assert_eq!(l.y, l.transformed * l.engagement);
        if transform.is_none() {
            prop_assert_eq!(l.transformed, c);
        }
    }

    #[test]
    fn labels_increase_with_content_and_outcome(c in 0.0f64..0.99, dc in 0.001f64..0.01, o in 0usize..3) {
        let g = EngagementGrading::default();
        let t = Some(params(12.0, 0.5));
        let lo = compose_label(c, EngagementOutcome::ALL[o], &g, t).unwrap().y;
        let hi_c = compose_label((c + dc).min(1.0), EngagementOutcome::ALL[o], &g, t).unwrap().y;
        let hi_o = compose_label(c, EngagementOutcome::ALL[o + 1], &g, t).unwrap().y;
        prop_assert!(hi_c > lo);
        prop_assert!(hi_o > lo || c == 0.0 && hi_o >= lo);
    }
}
