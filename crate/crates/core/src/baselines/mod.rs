//! Independent outlier detectors used to cross-check the searchlight:
//! isolation forest and feature bagging over local outlier factor.

mod bagging;
mod compare;
mod iforest;
mod lof;

pub use bagging::{feature_bagging_scores, BaggingScores, FeatureBaggingParams};
pub use compare::{
    compare_detectors, jaccard, top_m, DetectorComparison, DetectorParams, DetectorRow, Method,
};
pub use iforest::{
    anomaly_score, average_path_length, isolation_forest_scores, IsolationForest,
    IsolationForestParams,
};
pub use lof::{lof_scores, LofParams};

use crate::error::{Error, Result};

pub(crate) fn check_matrix<P: AsRef<[f64]>>(points: &[P]) -> Result<usize> {
    let Some(first) = points.first() else {
        return Err(Error::EmptyInput);
    };
    let d = first.as_ref().len();
    for (i, p) in points.iter().enumerate() {
        let p = p.as_ref();
        if p.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: p.len(),
                index: i,
            });
        }
        if p.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(i));
        }
    }
    Ok(d)
}
