use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{check_matrix, lof_scores, LofParams};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FeatureBaggingParams {
    pub rounds: usize,
    pub lof: LofParams,
    pub seed: u64,
}

impl Default for FeatureBaggingParams {
    fn default() -> Self {
        FeatureBaggingParams {
            rounds: 10,
            lof: LofParams::default(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaggingScores {
    /// Cumulative sum of per-round LOF scores.
    pub scores: Vec<f64>,
    /// Feature indices used in each round, ascending.
    pub subsets: Vec<Vec<usize>>,
}

/// Draws the feature subset of round `round`: size uniform in
/// `[ceil(d/2), d-1]`, sampled without replacement.
pub(crate) fn round_subset(d: usize, seed: u64, round: usize) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(round as u64));
    let lo = d.div_ceil(2);
    let size = rng.random_range(lo..=d - 1);
    let mut picked = index::sample(&mut rng, d, size).into_vec();
    picked.sort_unstable();
    picked
}

pub fn feature_bagging_scores<P: AsRef<[f64]> + Sync>(
    points: &[P],
    params: &FeatureBaggingParams,
) -> Result<BaggingScores> {
    let d = check_matrix(points)?;
    if d < 2 {
        return Err(Error::InvalidParameter("feature bagging needs at least 2 dimensions".into()));
    }
    if params.rounds == 0 {
        return Err(Error::InvalidParameter("rounds must be at least 1".into()));
    }
    let subsets: Vec<Vec<usize>> = (0..params.rounds)
        .map(|r| round_subset(d, params.seed, r))
        .collect();
    let per_round = subsets
        .par_iter()
        .map(|features| {
            let projected: Vec<Vec<f64>> = points
                .iter()
                .map(|p| {
                    let p = p.as_ref();
                    features.iter().map(|&f| p[f]).collect()
                })
                .collect();
            lof_scores(&projected, &params.lof)
        })
        .collect::<Result<Vec<_>>>()?;

    let mut scores = vec![0.0; points.len()];
    for round in per_round {
        for (acc, s) in scores.iter_mut().zip(round) {
            *acc += s;
        }
    }
    Ok(BaggingScores { scores, subsets })
}
