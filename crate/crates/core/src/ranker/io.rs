//! JSON model files with nested node records.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::tree::{Node, NodeKind, Tree};
use super::TreeEnsemble;
use crate::datamodel::Schema;
use crate::error::{Error, Result};

pub const MODEL_FORMAT: &str = "ltrkit-ensemble";
pub const MODEL_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum NodeRecord {
    Leaf {
        cover: f64,
        value: f64,
    },
    Split {
        cover: f64,
        feature: usize,
        threshold: f64,
        left: Box<NodeRecord>,
        right: Box<NodeRecord>,
    },
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    format: String,
    version: u32,
    schema_hash: String,
    schema: Schema,
    base_score: f64,
    learning_rate: f64,
    trees: Vec<NodeRecord>,
}

fn to_record(tree: &Tree, i: usize) -> NodeRecord {
    let node = tree.node(i);
    match node.kind {
        NodeKind::Leaf { value } => NodeRecord::Leaf {
            cover: node.cover,
            value,
        },
        NodeKind::Split {
            feature,
            threshold,
            left,
            right,
        } => NodeRecord::Split {
            cover: node.cover,
            feature,
            threshold,
            left: Box::new(to_record(tree, left)),
            right: Box::new(to_record(tree, right)),
        },
    }
}

/// Flattens in pre-order, matching the layout produced by training only up
/// to node numbering; predictions are unaffected.
fn flatten(record: NodeRecord, nodes: &mut Vec<Node>) -> usize {
    let id = nodes.len();
    match record {
        NodeRecord::Leaf { cover, value } => nodes.push(Node {
            cover,
            kind: NodeKind::Leaf { value },
        }),
        NodeRecord::Split {
            cover,
            feature,
            threshold,
            left,
            right,
        } => {
            nodes.push(Node {
                cover,
                kind: NodeKind::Leaf { value: 0.0 },
            });
            let l = flatten(*left, nodes);
            let r = flatten(*right, nodes);
            nodes[id].kind = NodeKind::Split {
                feature,
                threshold,
                left: l,
                right: r,
            };
        }
    }
    id
}

pub fn write_ensemble<W: Write>(ensemble: &TreeEnsemble, out: W) -> Result<()> {
    let file = ModelFile {
        format: MODEL_FORMAT.into(),
        version: MODEL_VERSION,
        schema_hash: ensemble.schema().fingerprint(),
        schema: ensemble.schema().clone(),
        base_score: ensemble.base_score(),
        learning_rate: ensemble.learning_rate(),
        trees: ensemble.trees().iter().map(|t| to_record(t, 0)).collect(),
    };
    serde_json::to_writer_pretty(out, &file).map_err(|e| Error::ModelFormat(e.to_string()))
}

pub fn read_ensemble<R: Read>(input: R) -> Result<TreeEnsemble> {
    let file: ModelFile =
        serde_json::from_reader(input).map_err(|e| Error::ModelFormat(e.to_string()))?;
    if file.format != MODEL_FORMAT {
        return Err(Error::ModelFormat(format!(
            "unexpected format tag {:?}",
            file.format
        )));
    }
    if file.version != MODEL_VERSION {
        return Err(Error::ModelFormat(format!(
            "unsupported version {}",
            file.version
        )));
    }
    if file.schema_hash != file.schema.fingerprint() {
        return Err(Error::ModelFormat(
            "schema hash does not match embedded schema".into(),
        ));
    }
    let trees = file
        .trees
        .into_iter()
        .map(|r| {
            let mut nodes = Vec::new();
            flatten(r, &mut nodes);
            Tree::from_nodes(nodes)
        })
        .collect();
    TreeEnsemble::new(trees, file.learning_rate, file.base_score, file.schema)
}

pub fn save_ensemble(ensemble: &TreeEnsemble, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(f);
    write_ensemble(ensemble, &mut w)?;
    w.write_all(b"\n")
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

pub fn load_ensemble(path: impl AsRef<Path>) -> Result<TreeEnsemble> {
    let path = path.as_ref();
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    read_ensemble(BufReader::new(f))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datamodel::{Channel, FeatureDef};

    fn model() -> TreeEnsemble {
        let schema = Schema::new(vec![
            FeatureDef::new("a", Channel::SparseContent),
            FeatureDef::new("b", Channel::Engagement),
        ])
        .unwrap();
        let t = Tree::from_nodes(vec![
            Node {
                cover: 5.0,
                kind: NodeKind::Split {
                    feature: 1,
                    threshold: 0.1 + 0.2,
                    left: 1,
                    right: 2,
                },
            },
            Node {
                cover: 2.0,
                kind: NodeKind::Leaf {
                    value: -0.123_456_789_012_345_67,
                },
            },
            Node {
                cover: 3.0,
                kind: NodeKind::Split {
                    feature: 0,
                    threshold: -4.0,
                    left: 3,
                    right: 4,
                },
            },
            Node {
                cover: 1.0,
                kind: NodeKind::Leaf { value: 1e-300 },
            },
            Node {
                cover: 2.0,
                kind: NodeKind::Leaf { value: 7.0 / 3.0 },
            },
        ]);
        TreeEnsemble::new(vec![t.clone(), t], 0.3, 1.0 / 3.0, schema).unwrap()
    }

    #[test]
    fn round_trip_is_exact() {
        let m = model();
        let mut buf = Vec::new();
        write_ensemble(&m, &mut buf).unwrap();
        let back = read_ensemble(buf.as_slice()).unwrap();
        assert_eq!(back, m);
        let mut again = Vec::new();
        write_ensemble(&back, &mut again).unwrap();
        assert_eq!(buf, again);
    }

    #[test]
    fn rejects_bad_covers_and_tags() {
        let m = model();
        let mut buf = Vec::new();
        write_ensemble(&m, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let broken = text.replacen("\"cover\": 5.0", "\"cover\": 6.0", 1);
        assert!(matches!(
            read_ensemble(broken.as_bytes()),
            Err(Error::ModelFormat(_))
        ));
        let wrong = text.replacen(MODEL_FORMAT, "other", 1);
        assert!(matches!(
            read_ensemble(wrong.as_bytes()),
            Err(Error::ModelFormat(_))
        ));
        let zero = text.replacen("\"cover\": 1.0", "\"cover\": 0.0", 1);
        assert!(read_ensemble(zero.as_bytes()).is_err());
    }
}
