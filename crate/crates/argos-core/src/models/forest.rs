//! Isolation forest: an ensemble of randomized binary trees in which
//! anomalous points isolate near the root.
//!
//! Construction protocol (fixed so that an independent implementation
//! with the same seed reproduces the forest bit for bit):
//! one ChaCha8 stream seeded from `seed`; per tree, a without-replacement
//! subsample via partial Fisher–Yates over the data indices; per node,
//! split attributes drawn uniformly and redrawn while the attribute is
//! constant in the node's points (leaf if all attributes are constant);
//! the split value drawn uniformly from the attribute's [min, max);
//! points with value < split go left; left subtree built before right.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{validate_training_data, ModelError};

const EULER_GAMMA: f64 = 0.5772156649;

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Node {
    Leaf {
        size: u32,
    },
    Internal {
        attr: u32,
        split: f64,
        left: Box<Node>,
        right: Box<Node>,
    },
}

impl Node {
    fn depth(&self) -> usize {
        match self {
            Node::Leaf { .. } => 0,
            Node::Internal { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }
}

/// Average unsuccessful-search path length of a binary search tree over
/// `n` points; normalizes raw path lengths into the anomaly score.
pub fn c_factor(n: usize) -> f64 {
    match n {
        0 | 1 => 0.0,
        2 => 1.0,
        _ => {
            let nf = n as f64;
            2.0 * ((nf - 1.0).ln() + EULER_GAMMA) - 2.0 * (nf - 1.0) / nf
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IsolationForest {
    pub(crate) trees: Vec<Node>,
    /// Subsample size actually used (requested size capped by |data|).
    pub(crate) subsample_size: usize,
    pub(crate) dim: usize,
}

impl IsolationForest {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn tree_count(&self) -> usize {
        self.trees.len()
    }

    pub fn subsample_size(&self) -> usize {
        self.subsample_size
    }

    /// Deepest internal path over all trees, for invariant checks.
    pub fn max_depth(&self) -> usize {
        self.trees.iter().map(Node::depth).max().unwrap_or(0)
    }

    /// Anomaly score s(x) = 2^(−E[h(x)]/c(ψ)) ∈ (0, 1).
    pub fn score(&self, x: &[f64]) -> f64 {
        assert_eq!(x.len(), self.dim, "input width mismatch");
        let total: f64 = self.trees.iter().map(|t| path_length(t, x, 0)).sum();
        let expected = total / self.trees.len() as f64;
        2.0f64.powf(-expected / c_factor(self.subsample_size))
    }
}

fn path_length(node: &Node, x: &[f64], depth: usize) -> f64 {
    match node {
        Node::Leaf { size } => depth as f64 + c_factor(*size as usize),
        Node::Internal {
            attr,
            split,
            left,
            right,
        } => {
            if x[*attr as usize] < *split {
                path_length(left, x, depth + 1)
            } else {
                path_length(right, x, depth + 1)
            }
        }
    }
}

fn ceil_log2(n: usize) -> usize {
    debug_assert!(n >= 1);
    if n <= 1 {
        0
    } else {
        (usize::BITS - (n - 1).leading_zeros()) as usize
    }
}

fn build_node(
    points: &[&[f64]],
    depth: usize,
    limit: usize,
    dim: usize,
    rng: &mut ChaCha8Rng,
) -> Node {
    if depth >= limit || points.len() <= 1 {
        return Node::Leaf {
            size: points.len() as u32,
        };
    }
    let splittable = (0..dim).any(|a| {
        let first = points[0][a];
        points.iter().any(|p| p[a] != first)
    });
    if !splittable {
        return Node::Leaf {
            size: points.len() as u32,
        };
    }
    let (attr, lo, hi) = loop {
        let attr = rng.random_range(0..dim);
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for p in points {
            lo = lo.min(p[attr]);
            hi = hi.max(p[attr]);
        }
        if lo < hi {
            break (attr, lo, hi);
        }
    };
    let split = rng.random_range(lo..hi);
    let left_pts: Vec<&[f64]> = points.iter().copied().filter(|p| p[attr] < split).collect();
    let right_pts: Vec<&[f64]> = points.iter().copied().filter(|p| p[attr] >= split).collect();
    let left = Box::new(build_node(&left_pts, depth + 1, limit, dim, rng));
    let right = Box::new(build_node(&right_pts, depth + 1, limit, dim, rng));
    Node::Internal {
        attr: attr as u32,
        split,
        left,
        right,
    }
}

/// Builds `tree_count` isolation trees, each over an independent
/// without-replacement subsample of the data.
pub fn train_iforest(
    data: &[Vec<f64>],
    tree_count: usize,
    subsample_size: usize,
    seed: u64,
) -> Result<IsolationForest, ModelError> {
    let dim = validate_training_data(data)?;
    let n = data.len();
    let psi = subsample_size.min(n).max(1);
    let limit = ceil_log2(psi);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut trees = Vec::with_capacity(tree_count);
    for _ in 0..tree_count {
        let mut idx: Vec<usize> = (0..n).collect();
        for i in 0..psi {
            let j = rng.random_range(i..n);
            idx.swap(i, j);
        }
        let sample: Vec<&[f64]> = idx[..psi].iter().map(|&i| data[i].as_slice()).collect();
        trees.push(build_node(&sample, 0, limit, dim, &mut rng));
    }
    Ok(IsolationForest {
        trees,
        subsample_size: psi,
        dim,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn c_factor_reference_points() {
        assert_eq!(c_factor(0), 0.0);
        assert_eq!(c_factor(1), 0.0);
        assert_eq!(c_factor(2), 1.0);
        assert!((c_factor(256) - 10.244770920116851).abs() < 1e-9);
    }

    #[test]
    fn ceil_log2_reference_points() {
        assert_eq!(ceil_log2(1), 0);
        assert_eq!(ceil_log2(2), 1);
        assert_eq!(ceil_log2(5), 3);
        assert_eq!(ceil_log2(256), 8);
    }

    #[test]
    fn repeated_point_scores_identically() {
        let data: Vec<Vec<f64>> = std::iter::repeat(vec![0.5, 0.5]).take(32).collect();
        let f = train_iforest(&data, 10, 16, 1).unwrap();
        let s0 = f.score(&data[0]);
        for v in &data {
            assert_eq!(f.score(v), s0);
        }
    }

    #[test]
    fn far_outlier_scores_maximal() {
        let mut data: Vec<Vec<f64>> = (0..40)
            .map(|i| {
                let t = i as f64 / 40.0;
                vec![0.01 * (t - 0.5), 0.01 * (0.5 - t)]
            })
            .collect();
        data.push(vec![10.0, -10.0]);
        let f = train_iforest(&data, 50, 32, 7).unwrap();
        let outlier = f.score(&data[40]);
        let max_inlier = data[..40]
            .iter()
            .map(|v| f.score(v))
            .fold(f64::NEG_INFINITY, f64::max);
        assert!(
            outlier > max_inlier,
            "outlier {outlier} vs max inlier {max_inlier}"
        );
    }

    #[test]
    fn scores_in_open_unit_interval() {
        let data: Vec<Vec<f64>> = (0..64)
            .map(|i| vec![(i % 8) as f64 / 8.0, (i / 8) as f64 / 8.0, i as f64 / 64.0])
            .collect();
        let f = train_iforest(&data, 25, 32, 3).unwrap();
        for v in &data {
            let s = f.score(v);
            assert!(s > 0.0 && s < 1.0, "score {s} out of range");
        }
    }

    #[test]
    fn tree_height_bounded_by_log_subsample() {
        let data: Vec<Vec<f64>> = (0..200)
            .map(|i| vec![(i as f64).sin(), (i as f64).cos(), i as f64 / 200.0])
            .collect();
        let f = train_iforest(&data, 20, 64, 9).unwrap();
        assert!(f.max_depth() <= 6, "depth {} > ceil(log2 64)", f.max_depth());
    }

    #[test]
    fn same_seed_reproduces_forest() {
        let data: Vec<Vec<f64>> = (0..100)
            .map(|i| vec![i as f64 * 0.01, (i * i % 17) as f64 / 17.0])
            .collect();
        let a = train_iforest(&data, 15, 32, 42).unwrap();
        let b = train_iforest(&data, 15, 32, 42).unwrap();
        assert_eq!(a, b);
        let sa: Vec<f64> = data.iter().map(|v| a.score(v)).collect();
        let sb: Vec<f64> = data.iter().map(|v| b.score(v)).collect();
        assert_eq!(sa, sb);
    }

    #[test]
    fn subsample_larger_than_data_is_capped() {
        let data: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64]).collect();
        let f = train_iforest(&data, 5, 256, 0).unwrap();
        assert_eq!(f.subsample_size(), 10);
    }
}
