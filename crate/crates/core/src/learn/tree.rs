use rand::Rng;
use serde::{Deserialize, Serialize};

/// Tree node; children are indices into [`DecisionTree::nodes`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Node {
    /// Rows with `x[feature] <= threshold` go left.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    /// Class histogram of the training rows that reached this leaf.
    Leaf { counts: Vec<u32> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub nodes: Vec<Node>,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct TreeParams {
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
    pub max_features: usize,
}

struct BestSplit {
    feature: usize,
    threshold: f64,
    score: f64,
}

impl DecisionTree {
    /// Grows a CART tree with Gini impurity on `samples` (row indices, may
    /// repeat). Each node examines `max_features` randomly chosen features;
    /// if none of them separates the node, the remaining features are tried
    /// in the same random order.
    pub(crate) fn fit(
        rows: &[Vec<f64>],
        labels: &[usize],
        n_classes: usize,
        samples: Vec<usize>,
        params: TreeParams,
        rng: &mut impl Rng,
    ) -> Self {
        let dim = rows.first().map_or(0, |r| r.len());
        let mut nodes = Vec::new();
        // (node slot, samples, depth)
        let mut stack = vec![(0usize, samples, 0usize)];
        nodes.push(Node::Leaf { counts: Vec::new() });
        let mut features: Vec<usize> = (0..dim).collect();
        let mut pairs: Vec<(f64, usize)> = Vec::new();

        while let Some((slot, idx, depth)) = stack.pop() {
            let counts = histogram(labels, &idx, n_classes);
            let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
            let depth_reached = params.max_depth.is_some_and(|d| depth >= d);
            if pure || idx.len() < params.min_samples_split || depth_reached {
                nodes[slot] = Node::Leaf { counts };
                continue;
            }

            // Partial Fisher-Yates: draw features lazily in random order.
            let mut best: Option<BestSplit> = None;
            for k in 0..dim {
                if k >= params.max_features && best.is_some() {
                    break;
                }
                let pick = rng.random_range(k..dim);
                features.swap(k, pick);
                let f = features[k];
                pairs.clear();
                pairs.extend(idx.iter().map(|&i| (rows[i][f], labels[i])));
                if let Some((threshold, score)) = best_threshold(&mut pairs, &counts) {
                    if best.as_ref().is_none_or(|b| score > b.score) {
                        best = Some(BestSplit {
                            feature: f,
                            threshold,
                            score,
                        });
                    }
                }
            }

            let Some(split) = best else {
                nodes[slot] = Node::Leaf { counts };
                continue;
            };
            let (left, right): (Vec<usize>, Vec<usize>) = idx
                .into_iter()
                .partition(|&i| rows[i][split.feature] <= split.threshold);
            let left_slot = nodes.len();
            nodes.push(Node::Leaf { counts: Vec::new() });
            let right_slot = nodes.len();
            nodes.push(Node::Leaf { counts: Vec::new() });
            nodes[slot] = Node::Split {
                feature: split.feature,
                threshold: split.threshold,
                left: left_slot,
                right: right_slot,
            };
            stack.push((right_slot, right, depth + 1));
            stack.push((left_slot, left, depth + 1));
        }
        DecisionTree { nodes }
    }

    pub fn leaf_counts(&self, row: &[f64]) -> &[u32] {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf { counts } => return counts,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if row[*feature] <= *threshold { *left } else { *right },
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn go(nodes: &[Node], i: usize) -> usize {
            match &nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + go(nodes, *left).max(go(nodes, *right)),
            }
        }
        go(&self.nodes, 0)
    }
}

fn histogram(labels: &[usize], idx: &[usize], n_classes: usize) -> Vec<u32> {
    let mut counts = vec![0u32; n_classes];
    for &i in idx {
        counts[labels[i]] += 1;
    }
    counts
}

/// Best threshold for one feature, maximizing `sum_c l_c^2 / n_l + sum_c r_c^2 / n_r`
/// (equivalently minimizing the weighted Gini impurity). `None` when the
/// feature is constant over the node.
fn best_threshold(pairs: &mut [(f64, usize)], total: &[u32]) -> Option<(f64, f64)> {
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let n = pairs.len();
    if n < 2 || pairs[0].0 == pairs[n - 1].0 {
        return None;
    }
    let mut left = vec![0u64; total.len()];
    let mut right: Vec<u64> = total.iter().map(|&c| c as u64).collect();
    let mut sum_l2 = 0u64;
    let mut sum_r2: u64 = right.iter().map(|c| c * c).sum();
    let mut best: Option<(f64, f64)> = None;
    for i in 0..n - 1 {
        let c = pairs[i].1;
        sum_l2 += 2 * left[c] + 1;
        sum_r2 -= 2 * right[c] - 1;
        left[c] += 1;
        right[c] -= 1;
        let (v, next) = (pairs[i].0, pairs[i + 1].0);
        if v == next {
            continue;
        }
        let nl = (i + 1) as f64;
        let nr = (n - i - 1) as f64;
        let score = sum_l2 as f64 / nl + sum_r2 as f64 / nr;
        if best.is_none_or(|(_, s)| score > s) {
            let mid = v + (next - v) / 2.0;
            let threshold = if mid < next { mid } else { v };
            best = Some((threshold, score));
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;

    fn params(max_features: usize) -> TreeParams {
        TreeParams {
            max_depth: None,
            min_samples_split: 2,
            max_features,
        }
    }

    #[test]
    fn threshold_separates_classes() {
        let mut pairs = vec![(0.0, 0), (1.0, 0), (10.0, 1), (11.0, 1)];
        let (t, _) = best_threshold(&mut pairs, &[2, 2]).unwrap();
        assert_eq!(t, 5.5);
        let mut constant = vec![(1.0, 0), (1.0, 1)];
        assert!(best_threshold(&mut constant, &[1, 1]).is_none());
    }

    #[test]
    fn grows_to_purity() {
        let rows: Vec<Vec<f64>> = (0..20).map(|i| vec![(i % 7) as f64, i as f64]).collect();
        let labels: Vec<usize> = (0..20).map(|i| (i * 3 % 5) % 3).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let tree = DecisionTree::fit(&rows, &labels, 3, (0..20).collect(), params(1), &mut rng);
        for (r, &l) in rows.iter().zip(&labels) {
            let counts = tree.leaf_counts(r);
            assert_eq!(counts.iter().filter(|&&c| c > 0).count(), 1);
            assert!(counts[l] > 0);
        }
    }

    #[test]
    fn falls_back_to_unsampled_features() {
        // Feature 0 is constant, only feature 1 separates.
        let rows: Vec<Vec<f64>> = (0..10).map(|i| vec![1.0, i as f64]).collect();
        let labels: Vec<usize> = (0..10).map(|i| usize::from(i >= 5)).collect();
        for seed in 0..10 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let tree = DecisionTree::fit(&rows, &labels, 2, (0..10).collect(), params(1), &mut rng);
            assert_eq!(tree.depth(), 1);
        }
    }

    #[test]
    fn max_depth_limits_growth() {
        let rows: Vec<Vec<f64>> = (0..32).map(|i| vec![i as f64]).collect();
        let labels: Vec<usize> = (0..32).map(|i| i % 2).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let p = TreeParams {
            max_depth: Some(3),
            ..params(1)
        };
        let tree = DecisionTree::fit(&rows, &labels, 2, (0..32).collect(), p, &mut rng);
        assert_eq!(tree.depth(), 3);
    }
}
