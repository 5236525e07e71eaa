//! Depth-limited regression tree used as the boosting base learner.
//!
//! Splits greedily maximize the usual sum-of-squares gain on the fitted
//! targets. All tie-breaks are fixed (first feature, lowest threshold), so
//! refits on identical data are bit-identical.

/// Minimum s.s.e. gain for a split to be accepted; guards against splits
/// that only exist through floating-point noise on constant targets.
const MIN_GAIN: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Split { feature: usize, threshold: f64, left: usize, right: usize },
    Leaf { value: f64 },
}

/// A fitted tree. Leaf values are set by the boosting driver after the
/// structure is grown.
#[derive(Debug, Clone, PartialEq)]
pub struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    /// Route one (already preprocessed) row to its leaf value.
    pub fn apply(&self, row: &[f64]) -> f64 {
        let mut at = 0usize;
        loop {
            match &self.nodes[at] {
                Node::Leaf { value } => return *value,
                Node::Split { feature, threshold, left, right } => {
                    at = if row[*feature] <= *threshold { *left } else { *right };
                }
            }
        }
    }

    pub fn set_leaf_value(&mut self, node_id: usize, value: f64) {
        match &mut self.nodes[node_id] {
            Node::Leaf { value: v } => *v = value,
            Node::Split { .. } => panic!("node {node_id} is not a leaf"),
        }
    }

    #[cfg(test)]
    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }
}

/// Per-feature row orderings (ascending value, then row index), computed
/// once per boosting fit and shared by every tree.
pub fn sort_columns(x: &[Vec<f64>], n_features: usize) -> Vec<Vec<u32>> {
    (0..n_features)
        .map(|f| {
            let mut order: Vec<u32> = (0..x.len() as u32).collect();
            order.sort_by(|a, b| {
                x[*a as usize][f]
                    .total_cmp(&x[*b as usize][f])
                    .then(a.cmp(b))
            });
            order
        })
        .collect()
}

/// Grow a tree on `targets`, returning the structure and each row's leaf id.
pub fn fit(
    x: &[Vec<f64>],
    sorted: &[Vec<u32>],
    targets: &[f64],
    max_depth: usize,
    min_leaf: usize,
) -> (Tree, Vec<usize>) {
    let n = x.len();
    let mut nodes = vec![Node::Leaf { value: 0.0 }];
    let mut node_of_row: Vec<usize> = vec![0; n];
    // (node id, depth, row count)
    let mut frontier: std::collections::VecDeque<(usize, usize, usize)> =
        std::collections::VecDeque::new();
    frontier.push_back((0, 0, n));

    while let Some((nid, depth, n_node)) = frontier.pop_front() {
        if depth >= max_depth || n_node < 2 * min_leaf {
            continue;
        }
        let (sum, sum_sq) = {
            let mut s = 0.0;
            let mut s2 = 0.0;
            for (r, t) in targets.iter().enumerate() {
                if node_of_row[r] == nid {
                    s += t;
                    s2 += t * t;
                }
            }
            (s, s2)
        };
        // Constant targets cannot be improved by splitting.
        if sum_sq - sum * sum / n_node as f64 <= MIN_GAIN {
            continue;
        }
        let parent_score = sum * sum / n_node as f64;

        let mut best: Option<(f64, usize, f64)> = None; // (gain, feature, threshold)
        for (f, order) in sorted.iter().enumerate() {
            let mut left_sum = 0.0;
            let mut left_n = 0usize;
            let mut prev_val: Option<f64> = None;
            for &r in order {
                let r = r as usize;
                if node_of_row[r] != nid {
                    continue;
                }
                let val = x[r][f];
                if let Some(pv) = prev_val {
                    if val > pv && left_n >= min_leaf && n_node - left_n >= min_leaf {
                        let right_sum = sum - left_sum;
                        let right_n = n_node - left_n;
                        let gain = left_sum * left_sum / left_n as f64
                            + right_sum * right_sum / right_n as f64
                            - parent_score;
                        let threshold = 0.5 * (pv + val);
                        if gain > MIN_GAIN && best.map_or(true, |(bg, _, _)| gain > bg) {
                            best = Some((gain, f, threshold));
                        }
                    }
                }
                left_sum += targets[r];
                left_n += 1;
                prev_val = Some(val);
            }
        }

        if let Some((_, feature, threshold)) = best {
            let left = nodes.len();
            let right = nodes.len() + 1;
            nodes.push(Node::Leaf { value: 0.0 });
            nodes.push(Node::Leaf { value: 0.0 });
            nodes[nid] = Node::Split { feature, threshold, left, right };
            let mut n_left = 0usize;
            for r in 0..n {
                if node_of_row[r] == nid {
                    if x[r][feature] <= threshold {
                        node_of_row[r] = left;
                        n_left += 1;
                    } else {
                        node_of_row[r] = right;
                    }
                }
            }
            frontier.push_back((left, depth + 1, n_left));
            frontier.push_back((right, depth + 1, n_node - n_left));
        }
    }

    (Tree { nodes }, node_of_row)
}
