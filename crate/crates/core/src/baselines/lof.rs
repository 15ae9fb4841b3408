use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::check_matrix;
use crate::error::{Error, Result};

/// Reachability distances are floored here so duplicates keep a finite density.
const REACH_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LofParams {
    pub k_neighbors: usize,
}

impl Default for LofParams {
    fn default() -> Self {
        LofParams { k_neighbors: 10 }
    }
}

struct Neighborhood {
    k_distance: f64,
    /// All points within `k_distance` (may exceed k on ties), with distances.
    members: Vec<(usize, f64)>,
}

fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Local outlier factor of every point. Values near 1 are inliers; values well
/// above 1 sit in sparser regions than their neighbours.
pub fn lof_scores<P: AsRef<[f64]> + Sync>(points: &[P], params: &LofParams) -> Result<Vec<f64>> {
    check_matrix(points)?;
    let n = points.len();
    let k = params.k_neighbors;
    if k == 0 {
        return Err(Error::InvalidParameter("k_neighbors must be at least 1".into()));
    }
    if n <= k {
        return Err(Error::TooFewPoints { points: n, required: k + 1 });
    }

    let hoods: Vec<Neighborhood> = (0..n)
        .into_par_iter()
        .map(|p| {
            let x = points[p].as_ref();
            let mut others: Vec<(usize, f64)> = (0..n)
                .filter(|&o| o != p)
                .map(|o| (o, euclidean(x, points[o].as_ref())))
                .collect();
            others.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
            let k_distance = others[k - 1].1;
            let cut = others.partition_point(|&(_, d)| d <= k_distance);
            others.truncate(cut);
            Neighborhood {
                k_distance,
                members: others,
            }
        })
        .collect();

    let lrd: Vec<f64> = hoods
        .par_iter()
        .map(|h| {
            let total: f64 = h
                .members
                .iter()
                .map(|&(o, d)| d.max(hoods[o].k_distance))
                .sum();
            1.0 / (total / h.members.len() as f64).max(REACH_FLOOR)
        })
        .collect();

    Ok(hoods
        .par_iter()
        .enumerate()
        .map(|(p, h)| {
            let ratio: f64 = h.members.iter().map(|&(o, _)| lrd[o] / lrd[p]).sum();
            ratio / h.members.len() as f64
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_points_are_one() {
        let pts = vec![vec![1.0, 1.0]; 15];
        let s = lof_scores(&pts, &LofParams { k_neighbors: 5 }).unwrap();
        assert!(s.iter().all(|&v| v == 1.0));
    }

    #[test]
    fn grid_interior_near_one() {
        let pts: Vec<Vec<f64>> = (0..100).map(|i| vec![(i % 10) as f64, (i / 10) as f64]).collect();
        let s = lof_scores(&pts, &LofParams { k_neighbors: 4 }).unwrap();
        for y in 2..8 {
            for x in 2..8 {
                let v = s[y * 10 + x];
                assert!((0.8..=1.2).contains(&v), "({x},{y}) -> {v}");
            }
        }
    }

    #[test]
    fn requires_more_points_than_k() {
        let pts = vec![vec![0.0]; 3];
        assert!(lof_scores(&pts, &LofParams { k_neighbors: 3 }).is_err());
    }
}
