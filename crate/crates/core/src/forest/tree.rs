//! CART classification trees grown on Gini impurity.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

/// A node in a flattened tree; children are indices into [`Tree::nodes`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        counts: Vec<u32>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    /// Class-count vector of the leaf reached by `x`.
    pub fn leaf(&self, x: &[f64]) -> &[u32] {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => at = if x[*feature] <= *threshold { *left } else { *right },
                Node::Leaf { counts } => return counts,
            }
        }
    }
}

pub(crate) struct GrowParams {
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
    pub features_per_split: usize,
}

/// Training matrix view: row-major features plus class codes.
pub(crate) struct Matrix<'a> {
    pub x: &'a [Vec<f64>],
    pub y: &'a [usize],
    pub n_classes: usize,
    pub n_features: usize,
}

struct Pending {
    node: usize,
    samples: Vec<usize>,
    depth: usize,
}

struct Best {
    feature: usize,
    threshold: f64,
    score: f64,
    split_at: usize,
}

/// Grow one tree on `samples` (which may repeat rows) and accumulate the
/// impurity decrease of every split into `importances`.
pub(crate) fn grow(
    data: &Matrix,
    samples: Vec<usize>,
    params: &GrowParams,
    rng: &mut impl Rng,
    importances: &mut [f64],
) -> Tree {
    let total = samples.len() as f64;
    let mut nodes = vec![Node::Leaf { counts: vec![] }];
    let mut stack = vec![Pending {
        node: 0,
        samples,
        depth: 0,
    }];
    let mut feature_order: Vec<usize> = (0..data.n_features).collect();
    let mut column: Vec<(f64, usize)> = Vec::new();

    while let Some(Pending {
        node,
        mut samples,
        depth,
    }) = stack.pop()
    {
        let counts = class_counts(data, &samples);
        let n = samples.len();
        let leaf_now = is_pure(&counts)
            || n < 2 * params.min_samples_leaf
            || params.max_depth.is_some_and(|d| depth >= d);
        let best = if leaf_now {
            None
        } else {
            feature_order.shuffle(rng);
            best_split(data, &samples, &counts, params, &feature_order, &mut column)
        };
        let Some(best) = best else {
            nodes[node] = Node::Leaf { counts };
            continue;
        };

        let parent_gini = gini(&counts, n);
        // `score` is sum_c(left_c^2)/n_l + sum_c(right_c^2)/n_r, so the
        // weighted child impurity is 1 - score / n.
        let child_gini = 1.0 - best.score / n as f64;
        importances[best.feature] += (n as f64 / total) * (parent_gini - child_gini);

        // Reorder the node's samples along the chosen feature; the split
        // position then partitions them.
        samples.sort_by(|&a, &b| data.x[a][best.feature].total_cmp(&data.x[b][best.feature]));
        let right_samples = samples.split_off(best.split_at);
        let left = nodes.len();
        let right = left + 1;
        nodes.push(Node::Leaf { counts: vec![] });
        nodes.push(Node::Leaf { counts: vec![] });
        nodes[node] = Node::Split {
            feature: best.feature,
            threshold: best.threshold,
            left,
            right,
        };
        stack.push(Pending {
            node: right,
            samples: right_samples,
            depth: depth + 1,
        });
        stack.push(Pending {
            node: left,
            samples,
            depth: depth + 1,
        });
    }
    Tree { nodes }
}

fn class_counts(data: &Matrix, samples: &[usize]) -> Vec<u32> {
    let mut counts = vec![0u32; data.n_classes];
    for &s in samples {
        counts[data.y[s]] += 1;
    }
    counts
}

fn is_pure(counts: &[u32]) -> bool {
    counts.iter().filter(|&&c| c > 0).count() <= 1
}

pub(crate) fn gini(counts: &[u32], n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let n = n as f64;
    1.0 - counts
        .iter()
        .map(|&c| {
            let p = c as f64 / n;
            p * p
        })
        .sum::<f64>()
}

/// Search features in `order` until `features_per_split` non-constant ones
/// were examined (or all features were tried).
fn best_split(
    data: &Matrix,
    samples: &[usize],
    counts: &[u32],
    params: &GrowParams,
    order: &[usize],
    column: &mut Vec<(f64, usize)>,
) -> Option<Best> {
    let n = samples.len();
    let msl = params.min_samples_leaf;
    let parent_sq: f64 = counts.iter().map(|&c| (c as f64).powi(2)).sum();
    let mut best: Option<Best> = None;
    let mut visited = 0;
    let mut left = vec![0u32; data.n_classes];

    for &feature in order {
        if visited >= params.features_per_split {
            break;
        }
        column.clear();
        column.extend(samples.iter().map(|&s| (data.x[s][feature], data.y[s])));
        column.sort_by(|a, b| a.0.total_cmp(&b.0));
        if column[0].0 == column[n - 1].0 {
            continue;
        }
        visited += 1;

        left.iter_mut().for_each(|c| *c = 0);
        let mut left_sq = 0.0;
        let mut right_sq = parent_sq;
        for i in 0..n - 1 {
            let c = column[i].1;
            let l = left[c] as f64;
            let r = (counts[c] - left[c]) as f64;
            left_sq += 2.0 * l + 1.0;
            right_sq -= 2.0 * r - 1.0;
            left[c] += 1;

            let n_left = i + 1;
            let n_right = n - n_left;
            if column[i].0 == column[i + 1].0 || n_left < msl || n_right < msl {
                continue;
            }
            let score = left_sq / n_left as f64 + right_sq / n_right as f64;
            if best.as_ref().is_none_or(|b| score > b.score + 1e-12) {
                let (lo, hi) = (column[i].0, column[i + 1].0);
                let mut threshold = lo + (hi - lo) / 2.0;
                if threshold >= hi {
                    threshold = lo;
                }
                best = Some(Best {
                    feature,
                    threshold,
                    score,
                    split_at: n_left,
                });
            }
        }
    }
    // Splits that do not reduce impurity are useless.
    best.filter(|b| b.score > parent_sq / n as f64 + 1e-12)
}
