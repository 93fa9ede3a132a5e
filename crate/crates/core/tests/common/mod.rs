#![allow(dead_code)]

use ltrkit::datamodel::{
    Channel, Dataset, EngagementOutcome, FeatureDef, FeatureVector, Item, Latent, Product, Query,
    QueryGroup, Schema, Segment,
};
use ltrkit::ranker::{Node, NodeKind, Tree, TreeEnsemble};
use rand::Rng;

pub fn schema(d: usize) -> Schema {
    Schema::new(
        (0..d)
            .map(|i| FeatureDef::new(format!("f{i}"), Channel::SparseContent))
            .collect(),
    )
    .unwrap()
}

fn grow(
    nodes: &mut Vec<Node>,
    rng: &mut impl Rng,
    features: &[usize],
    depth: usize,
    cover: f64,
) -> usize {
    let id = nodes.len();
    nodes.push(Node {
        cover,
        kind: NodeKind::Leaf { value: 0.0 },
    });
    if depth == 0 || cover < 2.0 || rng.random::<f64>() < 0.15 {
        nodes[id].kind = NodeKind::Leaf {
            value: rng.random_range(-2.0..2.0),
        };
        return id;
    }
    let left_cover = rng.random_range(1..cover as u64) as f64;
    let feature = features[rng.random_range(0..features.len())];
    let threshold = rng.random_range(0.1..0.9);
    let left = grow(nodes, rng, features, depth - 1, left_cover);
    let right = grow(nodes, rng, features, depth - 1, cover - left_cover);
    nodes[id].kind = NodeKind::Split {
        feature,
        threshold,
        left,
        right,
    };
    id
}

/// A random tree over `features` with integer covers that add up.
pub fn random_tree(rng: &mut impl Rng, features: &[usize], max_depth: usize) -> Tree {
    let mut nodes = Vec::new();
    let cover = rng.random_range(20..200) as f64;
    grow(&mut nodes, rng, features, max_depth, cover);
    Tree::from_nodes(nodes)
}

pub fn random_ensemble(
    rng: &mut impl Rng,
    n_features: usize,
    features: &[usize],
    n_trees: usize,
    max_depth: usize,
) -> TreeEnsemble {
    let trees = (0..n_trees)
        .map(|_| random_tree(rng, features, max_depth))
        .collect();
    TreeEnsemble::new(
        trees,
        rng.random_range(0.05..1.0),
        rng.random_range(-1.0..1.0),
        schema(n_features),
    )
    .unwrap()
}

pub fn item(
    id: &str,
    features: Vec<f64>,
    outcome: EngagementOutcome,
    latent: Option<Latent>,
) -> Item {
    Item {
        product: Product::new(id),
        features: FeatureVector::new(features).unwrap(),
        outcome,
        latent,
    }
}

pub fn group(index: usize, items: Vec<Item>) -> QueryGroup {
    QueryGroup::new(
        format!("g{index}"),
        Query {
            id: format!("q{index}"),
            segment: Segment::ALL[index % 3],
        },
        items,
    )
    .unwrap()
}

/// Groups whose single feature equals the latent relevance (and an
/// uninformative second feature).
pub fn latent_corpus(rng: &mut impl Rng, n_groups: usize, n_items: usize) -> Dataset {
    let groups = (0..n_groups)
        .map(|g| {
            let items = (0..n_items)
                .map(|i| {
                    let rho: f64 = rng.random();
                    let pi: f64 = rng.random();
                    item(
                        &format!("g{g}-p{i}"),
                        vec![rho, rng.random()],
                        EngagementOutcome::NonEngaged,
                        Some(Latent { rho, pi }),
                    )
                })
                .collect();
            group(g, items)
        })
        .collect();
    Dataset::new(schema(2), groups).unwrap()
}
