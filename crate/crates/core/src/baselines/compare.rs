use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::{feature_bagging_scores, isolation_forest_scores, FeatureBaggingParams, IsolationForestParams};
use crate::aggregate::GroupKey;
use crate::cluster::{iterative_kmeans, KMeansParams};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Piks,
    IsolationForest,
    FeatureBagging,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Piks, Method::IsolationForest, Method::FeatureBagging];
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Piks => "piks",
            Method::IsolationForest => "isolation_forest",
            Method::FeatureBagging => "feature_bagging",
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DetectorParams {
    pub kmeans: KMeansParams,
    pub isolation_forest: IsolationForestParams,
    pub feature_bagging: FeatureBaggingParams,
    /// Size of each score-based detector's outlier set; defaults to the number
    /// of iterative k-means outliers.
    pub top_m: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DetectorRow {
    pub index: usize,
    pub key: GroupKey,
    pub isolation_forest: f64,
    pub feature_bagging: f64,
    /// Outer iteration in which iterative k-means removed this series.
    pub piks_iteration: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DetectorComparison {
    pub rows: Vec<DetectorRow>,
    pub top_m: usize,
    /// Row indices best-first, one list per method.
    pub rankings: Vec<(Method, Vec<usize>)>,
    /// Outlier set of each method: PIKS outliers, or the top-m by score.
    pub outlier_sets: Vec<(Method, BTreeSet<usize>)>,
    /// `None` when both sets are empty.
    pub jaccard: Vec<(Method, Method, Option<f64>)>,
}

impl DetectorComparison {
    pub fn ranking(&self, method: Method) -> &[usize] {
        &self.rankings.iter().find(|(m, _)| *m == method).expect("all methods ranked").1
    }

    pub fn outliers(&self, method: Method) -> &BTreeSet<usize> {
        &self.outlier_sets.iter().find(|(m, _)| *m == method).expect("all methods present").1
    }
}

/// `|a ∩ b| / |a ∪ b|`, undefined for two empty sets.
pub fn jaccard<T: Ord>(a: &BTreeSet<T>, b: &BTreeSet<T>) -> Option<f64> {
    let union = a.union(b).count();
    (union > 0).then(|| a.intersection(b).count() as f64 / union as f64)
}

/// Indices of `scores` sorted by descending score, ties by index.
pub fn top_m(scores: &[f64], m: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    idx.truncate(m);
    idx
}

/// Runs iterative k-means, isolation forest and feature bagging on the same
/// matrix and lines their verdicts up per key.
pub fn compare_detectors<P: AsRef<[f64]> + Sync>(
    vectors: &[P],
    keys: &[GroupKey],
    params: &DetectorParams,
) -> Result<DetectorComparison> {
    if vectors.len() != keys.len() {
        return Err(Error::KeyMismatch(format!(
            "{} vectors but {} keys",
            vectors.len(),
            keys.len()
        )));
    }
    let piks = iterative_kmeans(vectors, &params.kmeans)?;
    let iforest = isolation_forest_scores(vectors, &params.isolation_forest)?;
    let bagging = feature_bagging_scores(vectors, &params.feature_bagging)?.scores;

    let mut piks_iteration = vec![None; vectors.len()];
    for o in &piks.outliers {
        piks_iteration[o.id] = Some(o.iteration);
    }
    let rows = keys
        .iter()
        .enumerate()
        .map(|(i, key)| DetectorRow {
            index: i,
            key: key.clone(),
            isolation_forest: iforest[i],
            feature_bagging: bagging[i],
            piks_iteration: piks_iteration[i],
        })
        .collect();

    let m = params.top_m.unwrap_or(piks.outliers.len()).min(vectors.len());
    let rankings = vec![
        (Method::Piks, piks.outlier_ids()),
        (Method::IsolationForest, top_m(&iforest, vectors.len())),
        (Method::FeatureBagging, top_m(&bagging, vectors.len())),
    ];
    let outlier_sets: Vec<(Method, BTreeSet<usize>)> = rankings
        .iter()
        .map(|(method, ranked)| {
            let set = match method {
                Method::Piks => ranked.iter().copied().collect(),
                _ => ranked.iter().take(m).copied().collect(),
            };
            (*method, set)
        })
        .collect();
    let mut pairs = Vec::new();
    for i in 0..outlier_sets.len() {
        for j in i + 1..outlier_sets.len() {
            pairs.push((
                outlier_sets[i].0,
                outlier_sets[j].0,
                jaccard(&outlier_sets[i].1, &outlier_sets[j].1),
            ));
        }
    }
    Ok(DetectorComparison {
        rows,
        top_m: m,
        rankings,
        outlier_sets,
        jaccard: pairs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jaccard_edges() {
        let a: BTreeSet<u8> = [1, 2].into();
        let b: BTreeSet<u8> = [3].into();
        assert_eq!(jaccard(&a, &a), Some(1.0));
        assert_eq!(jaccard(&a, &b), Some(0.0));
        assert_eq!(jaccard(&BTreeSet::<u8>::new(), &BTreeSet::new()), None);
    }

    #[test]
    fn top_m_ties_by_index() {
        assert_eq!(top_m(&[0.5, 0.9, 0.5, 0.1], 3), vec![1, 0, 2]);
    }
}
