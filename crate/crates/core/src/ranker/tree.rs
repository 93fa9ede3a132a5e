//! Regression trees grown depth-wise by exact greedy split search on
//! (gradient, hessian) statistics.

use serde::{Deserialize, Serialize};

/// Regularization added to the hessian sum in split gains and leaf values.
pub const LAMBDA_REG: f64 = 1.0;
const MIN_SPLIT_GAIN: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub enum NodeKind {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        value: f64,
    },
}

/// Tree node. `cover` is the number of training samples routed through it.
#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub cover: f64,
    pub kind: NodeKind,
}

/// Binary tree stored as a flat node array with the root at index 0.
/// Samples with `x[feature] < threshold` go left.
#[derive(Debug, Clone, PartialEq)]
pub struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    pub fn leaf(value: f64, cover: f64) -> Self {
        Tree {
            nodes: vec![Node {
                cover,
                kind: NodeKind::Leaf { value },
            }],
        }
    }

    /// Builds a tree from raw nodes; callers are expected to have validated
    /// child indices (see [`Tree::validate`]).
    pub fn from_nodes(nodes: Vec<Node>) -> Self {
        Tree { nodes }
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn root(&self) -> &Node {
        &self.nodes[0]
    }

    pub fn node(&self, i: usize) -> &Node {
        &self.nodes[i]
    }

    pub fn leaf_index(&self, x: &[f64]) -> usize {
        let mut i = 0;
        loop {
            match self.nodes[i].kind {
                NodeKind::Leaf { .. } => return i,
                NodeKind::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if x[feature] < threshold { left } else { right },
            }
        }
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        match self.nodes[self.leaf_index(x)].kind {
            NodeKind::Leaf { value } => value,
            NodeKind::Split { .. } => unreachable!(),
        }
    }

    /// Cover-weighted mean of the leaf values.
    pub fn expected_value(&self) -> f64 {
        let total = self.nodes[0].cover;
        self.nodes
            .iter()
            .filter_map(|n| match n.kind {
                NodeKind::Leaf { value } => Some(value * n.cover / total),
                NodeKind::Split { .. } => None,
            })
            .sum()
    }

    pub fn split_features(&self) -> impl Iterator<Item = usize> + '_ {
        self.nodes.iter().filter_map(|n| match n.kind {
            NodeKind::Split { feature, .. } => Some(feature),
            NodeKind::Leaf { .. } => None,
        })
    }

    pub fn depth(&self) -> usize {
        fn go(t: &Tree, i: usize) -> usize {
            match t.nodes[i].kind {
                NodeKind::Leaf { .. } => 0,
                NodeKind::Split { left, right, .. } => 1 + go(t, left).max(go(t, right)),
            }
        }
        go(self, 0)
    }

    /// Checks structure and cover invariants. Returns a description of the
    /// first violation.
    pub fn validate(&self, n_features: usize) -> Result<(), String> {
        if self.nodes.is_empty() {
            return Err("tree has no nodes".into());
        }
        let mut visited = vec![false; self.nodes.len()];
        let mut stack = vec![0usize];
        while let Some(i) = stack.pop() {
            if std::mem::replace(&mut visited[i], true) {
                return Err(format!("node {i} reached twice"));
            }
            let node = &self.nodes[i];
            if !(node.cover > 0.0) {
                return Err(format!("node {i} has non-positive cover"));
            }
            if let NodeKind::Split {
                feature,
                threshold,
                left,
                right,
            } = node.kind
            {
                if feature >= n_features {
                    return Err(format!("node {i} splits on unknown feature {feature}"));
                }
                if !threshold.is_finite() {
                    return Err(format!("node {i} has non-finite threshold"));
                }
                if left >= self.nodes.len() || right >= self.nodes.len() {
                    return Err(format!("node {i} has dangling child"));
                }
                let sum = self.nodes[left].cover + self.nodes[right].cover;
                if (sum - node.cover).abs() > 1e-9 * node.cover {
                    return Err(format!("node {i} cover {} != children {sum}", node.cover));
                }
                stack.push(left);
                stack.push(right);
            }
        }
        if visited.iter().any(|v| !v) {
            return Err("tree has unreachable nodes".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    pub max_depth: usize,
    pub min_leaf_count: usize,
}

/// Column-major copy of a feature matrix plus per-feature sort orders.
pub struct ColumnData {
    n_rows: usize,
    columns: Vec<Vec<f64>>,
    sorted: Vec<Vec<u32>>,
}

impl ColumnData {
    /// `features` lists the columns eligible for splitting; the others are
    /// neither copied nor sorted.
    pub fn new(rows: &[&[f64]], n_features: usize, features: &[usize]) -> Self {
        let n_rows = rows.len();
        let mut columns = vec![Vec::new(); n_features];
        let mut sorted = vec![Vec::new(); n_features];
        for &f in features {
            let col: Vec<f64> = rows.iter().map(|r| r[f]).collect();
            let mut order: Vec<u32> = (0..n_rows as u32).collect();
            order.sort_by(|&a, &b| col[a as usize].total_cmp(&col[b as usize]).then(a.cmp(&b)));
            columns[f] = col;
            sorted[f] = order;
        }
        ColumnData {
            n_rows,
            columns,
            sorted,
        }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }
}

#[derive(Clone, Copy, Default)]
struct Stats {
    grad: f64,
    hess: f64,
    count: usize,
}

impl Stats {
    fn score(&self) -> f64 {
        self.grad * self.grad / (self.hess + LAMBDA_REG)
    }

    fn leaf_value(&self) -> f64 {
        -self.grad / (self.hess + LAMBDA_REG)
    }
}

#[derive(Clone, Copy)]
struct Candidate {
    gain: f64,
    feature: usize,
    threshold: f64,
}

/// Scan state for one frontier node while sweeping a sorted column.
#[derive(Clone, Copy, Default)]
struct Sweep {
    left: Stats,
    last: f64,
}

/// Fits one tree. `active[i] == false` excludes row `i` (subsampling).
/// Returns the tree and the leaf node index of every active row
/// (`usize::MAX` for inactive rows).
pub fn fit_tree(
    data: &ColumnData,
    features: &[usize],
    grad: &[f64],
    hess: &[f64],
    active: Option<&[bool]>,
    params: TreeParams,
) -> (Tree, Vec<usize>) {
    let n = data.n_rows;
    let is_active = |i: usize| active.is_none_or(|a| a[i]);
    let mut node_of: Vec<usize> = (0..n)
        .map(|i| if is_active(i) { 0 } else { usize::MAX })
        .collect();

    let mut root = Stats::default();
    for i in (0..n).filter(|&i| is_active(i)) {
        root.grad += grad[i];
        root.hess += hess[i];
        root.count += 1;
    }
    let mut nodes = vec![Node {
        cover: root.count as f64,
        kind: NodeKind::Leaf {
            value: root.leaf_value(),
        },
    }];
    let mut node_stats = vec![root];
    // frontier nodes eligible for splitting at this level
    let mut frontier: Vec<usize> = if root.count >= 2 * params.min_leaf_count.max(1) {
        vec![0]
    } else {
        vec![]
    };

    for _depth in 0..params.max_depth {
        if frontier.is_empty() {
            break;
        }
        // slot of each node in the frontier, usize::MAX when not splittable
        let mut slot = vec![usize::MAX; nodes.len()];
        for (s, &nid) in frontier.iter().enumerate() {
            slot[nid] = s;
        }
        let mut best: Vec<Option<Candidate>> = vec![None; frontier.len()];
        for &f in features {
            let col = &data.columns[f];
            let mut sweeps = vec![Sweep::default(); frontier.len()];
            for &row in &data.sorted[f] {
                let row = row as usize;
                let nid = node_of[row];
                if nid == usize::MAX || slot[nid] == usize::MAX {
                    continue;
                }
                let s = slot[nid];
                let total = node_stats[nid];
                let sw = &mut sweeps[s];
                let v = col[row];
                if sw.left.count >= params.min_leaf_count.max(1)
                    && v > sw.last
                    && total.count - sw.left.count >= params.min_leaf_count.max(1)
                {
                    let right = Stats {
                        grad: total.grad - sw.left.grad,
                        hess: total.hess - sw.left.hess,
                        count: total.count - sw.left.count,
                    };
                    let gain = sw.left.score() + right.score() - total.score();
                    if gain > MIN_SPLIT_GAIN && best[s].is_none_or(|b| gain > b.gain) {
                        let mut threshold = sw.last + (v - sw.last) / 2.0;
                        if threshold <= sw.last {
                            threshold = v;
                        }
                        best[s] = Some(Candidate {
                            gain,
                            feature: f,
                            threshold,
                        });
                    }
                }
                sw.left.grad += grad[row];
                sw.left.hess += hess[row];
                sw.left.count += 1;
                sw.last = v;
            }
        }

        let mut children = vec![(usize::MAX, usize::MAX); frontier.len()];
        for (s, &nid) in frontier.iter().enumerate() {
            if let Some(c) = best[s] {
                let left = nodes.len();
                let right = left + 1;
                nodes.push(Node {
                    cover: 0.0,
                    kind: NodeKind::Leaf { value: 0.0 },
                });
                nodes.push(Node {
                    cover: 0.0,
                    kind: NodeKind::Leaf { value: 0.0 },
                });
                node_stats.push(Stats::default());
                node_stats.push(Stats::default());
                nodes[nid].kind = NodeKind::Split {
                    feature: c.feature,
                    threshold: c.threshold,
                    left,
                    right,
                };
                children[s] = (left, right);
            }
        }
        for i in 0..n {
            let nid = node_of[i];
            if nid == usize::MAX || nid >= slot.len() || slot[nid] == usize::MAX {
                continue;
            }
            if let NodeKind::Split {
                feature,
                threshold,
                left,
                right,
            } = nodes[nid].kind
            {
                let child = if data.columns[feature][i] < threshold {
                    left
                } else {
                    right
                };
                node_of[i] = child;
                let st = &mut node_stats[child];
                st.grad += grad[i];
                st.hess += hess[i];
                st.count += 1;
            }
        }
        let mut next = Vec::new();
        for &(l, r) in &children {
            if l == usize::MAX {
                continue;
            }
            for c in [l, r] {
                let st = node_stats[c];
                nodes[c] = Node {
                    cover: st.count as f64,
                    kind: NodeKind::Leaf {
                        value: st.leaf_value(),
                    },
                };
                if st.count >= 2 * params.min_leaf_count.max(1) {
                    next.push(c);
                }
            }
        }
        frontier = next;
    }
    (Tree { nodes }, node_of)
}
