use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::check_matrix;
use crate::error::{Error, Result};

const EULER_GAMMA: f64 = 0.5772156649;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IsolationForestParams {
    pub n_trees: usize,
    /// Capped at the number of points.
    pub subsample: usize,
    /// Defaults to `ceil(log2(subsample))`.
    pub max_depth: Option<usize>,
    pub seed: u64,
}

impl Default for IsolationForestParams {
    fn default() -> Self {
        IsolationForestParams {
            n_trees: 100,
            subsample: 256,
            max_depth: None,
            seed: 0,
        }
    }
}

/// Average path length of an unsuccessful binary-search-tree lookup among
/// `n` points: `2 H(n-1) - 2 (n-1) / n`, with `c(1) = 0` and `c(2) = 1`.
pub fn average_path_length(n: usize) -> f64 {
    match n {
        0 | 1 => 0.0,
        2 => 1.0,
        _ => {
            let m = (n - 1) as f64;
            2.0 * (m.ln() + EULER_GAMMA) - 2.0 * m / n as f64
        }
    }
}

/// `2^(-E[h] / c(psi))`.
pub fn anomaly_score(mean_path_length: f64, psi: usize) -> f64 {
    (-mean_path_length / average_path_length(psi)).exp2()
}

#[derive(Debug, Clone)]
enum Node {
    Leaf { size: usize },
    Split { feature: usize, value: f64, left: Box<Node>, right: Box<Node> },
}

fn grow<P: AsRef<[f64]>>(
    points: &[P],
    ids: &mut [usize],
    depth: usize,
    max_depth: usize,
    rng: &mut ChaCha8Rng,
) -> Node {
    if ids.len() <= 1 || depth >= max_depth {
        return Node::Leaf { size: ids.len() };
    }
    let d = points[ids[0]].as_ref().len();
    let ranges: Vec<(usize, f64, f64)> = (0..d)
        .filter_map(|f| {
            let (lo, hi) = ids.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &i| {
                let v = points[i].as_ref()[f];
                (lo.min(v), hi.max(v))
            });
            (hi > lo).then_some((f, lo, hi))
        })
        .collect();
    if ranges.is_empty() {
        return Node::Leaf { size: ids.len() };
    }
    let (feature, lo, hi) = ranges[rng.random_range(0..ranges.len())];
    let value = rng.random_range(lo..hi);
    // Partition in place: left holds points strictly below the split.
    let mut split = 0;
    for j in 0..ids.len() {
        if points[ids[j]].as_ref()[feature] < value {
            ids.swap(split, j);
            split += 1;
        }
    }
    if split == 0 {
        // `value` can equal `lo` only through rounding; isolate the minimum.
        return Node::Leaf { size: ids.len() };
    }
    let (l, r) = ids.split_at_mut(split);
    Node::Split {
        feature,
        value,
        left: Box::new(grow(points, l, depth + 1, max_depth, rng)),
        right: Box::new(grow(points, r, depth + 1, max_depth, rng)),
    }
}

fn path_length(node: &Node, x: &[f64]) -> f64 {
    let mut node = node;
    let mut depth = 0.0;
    loop {
        match node {
            Node::Leaf { size } => return depth + average_path_length(*size),
            Node::Split { feature, value, left, right } => {
                node = if x[*feature] < *value { left } else { right };
                depth += 1.0;
            }
        }
    }
}

/// A fitted ensemble of isolation trees.
#[derive(Debug, Clone)]
pub struct IsolationForest {
    trees: Vec<Node>,
    psi: usize,
}

impl IsolationForest {
    pub fn fit<P: AsRef<[f64]> + Sync>(points: &[P], params: &IsolationForestParams) -> Result<Self> {
        check_matrix(points)?;
        let n = points.len();
        if n < 2 {
            return Err(Error::TooFewPoints { points: n, required: 2 });
        }
        if params.n_trees == 0 {
            return Err(Error::InvalidParameter("n_trees must be at least 1".into()));
        }
        if params.subsample < 2 {
            return Err(Error::InvalidParameter("subsample must be at least 2".into()));
        }
        let psi = params.subsample.min(n);
        let max_depth = params
            .max_depth
            .unwrap_or_else(|| (psi as f64).log2().ceil() as usize);
        let trees = (0..params.n_trees)
            .into_par_iter()
            .map(|t| {
                let mut rng = ChaCha8Rng::seed_from_u64(params.seed.wrapping_add(t as u64));
                let mut ids = index::sample(&mut rng, n, psi).into_vec();
                ids.sort_unstable();
                grow(points, &mut ids, 0, max_depth, &mut rng)
            })
            .collect();
        Ok(IsolationForest { trees, psi })
    }

    pub fn mean_path_length(&self, x: &[f64]) -> f64 {
        let total: f64 = self.trees.iter().map(|t| path_length(t, x)).sum();
        total / self.trees.len() as f64
    }

    pub fn score(&self, x: &[f64]) -> f64 {
        anomaly_score(self.mean_path_length(x), self.psi)
    }

    pub fn subsample_size(&self) -> usize {
        self.psi
    }
}

/// Anomaly score in (0, 1) for every point; higher is more anomalous.
pub fn isolation_forest_scores<P: AsRef<[f64]> + Sync>(
    points: &[P],
    params: &IsolationForestParams,
) -> Result<Vec<f64>> {
    let forest = IsolationForest::fit(points, params)?;
    Ok(points.par_iter().map(|p| forest.score(p.as_ref())).collect())
}
