//! Filter-style feature ranking against a binned target measure.

use std::collections::HashMap;
use std::hash::Hash;

use rayon::prelude::*;
use rust_decimal::Decimal;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::ingest::Dataset;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeatureScore {
    pub feature: String,
    pub chi2: f64,
    /// Plug-in mutual information in nats.
    pub mutual_info: f64,
    pub rank: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TargetBins {
    pub labels: Vec<usize>,
    pub n_bins: usize,
    /// Largest value placed in each bin.
    pub upper_edges: Vec<Decimal>,
    pub warning: Option<String>,
}

/// Equal-frequency bins of `values`; ties in value are split by position.
///
/// When there are fewer distinct values than bins, each distinct value gets
/// its own bin and a warning is attached.
pub fn discretize(values: &[Decimal], n_bins: usize) -> Result<TargetBins> {
    if n_bins < 2 {
        return Err(Error::InvalidParameter(format!("n_bins must be at least 2, got {n_bins}")));
    }
    if values.is_empty() {
        return Err(Error::EmptyInput);
    }
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].cmp(&values[b]).then(a.cmp(&b)));

    let mut distinct: Vec<Decimal> = values.to_vec();
    distinct.sort();
    distinct.dedup();

    if distinct.len() < n_bins {
        let labels = values
            .iter()
            .map(|v| distinct.binary_search(v).expect("value present"))
            .collect();
        let warning = format!(
            "only {} distinct values for {} bins; using one bin per value",
            distinct.len(),
            n_bins
        );
        log::warn!("{warning}");
        return Ok(TargetBins {
            labels,
            n_bins: distinct.len(),
            upper_edges: distinct,
            warning: Some(warning),
        });
    }

    let mut labels = vec![0; n];
    let mut upper_edges = vec![Decimal::MIN; n_bins];
    for (rank, &i) in order.iter().enumerate() {
        let bin = rank * n_bins / n;
        labels[i] = bin;
        upper_edges[bin] = upper_edges[bin].max(values[i]);
    }
    Ok(TargetBins {
        labels,
        n_bins,
        upper_edges,
        warning: None,
    })
}

/// Bins the named measure of every record.
pub fn discretize_target(dataset: &Dataset, measure: &str, n_bins: usize) -> Result<TargetBins> {
    let idx = dataset.measure_index(measure)?;
    let values: Vec<Decimal> = dataset.records.iter().map(|r| r.measures[idx]).collect();
    discretize(&values, n_bins)
}

struct Contingency {
    cells: HashMap<(usize, usize), u64>,
    rows: Vec<u64>,
    cols: Vec<u64>,
    n: u64,
}

fn intern<T: Eq + Hash + Clone>(values: &[T]) -> (Vec<usize>, usize) {
    let mut ids = HashMap::new();
    let codes = values
        .iter()
        .map(|v| {
            let next = ids.len();
            *ids.entry(v.clone()).or_insert(next)
        })
        .collect();
    (codes, ids.len())
}

fn contingency<A, B>(feature: &[A], target: &[B]) -> Result<Contingency>
where
    A: Eq + Hash + Clone,
    B: Eq + Hash + Clone,
{
    if feature.is_empty() || target.is_empty() {
        return Err(Error::EmptyInput);
    }
    if feature.len() != target.len() {
        return Err(Error::InvalidParameter(format!(
            "label sequences differ in length ({} vs {})",
            feature.len(),
            target.len()
        )));
    }
    let (fx, nx) = intern(feature);
    let (ty, ny) = intern(target);
    let mut cells = HashMap::new();
    let mut rows = vec![0u64; nx];
    let mut cols = vec![0u64; ny];
    for (&x, &y) in fx.iter().zip(&ty) {
        *cells.entry((x, y)).or_insert(0) += 1;
        rows[x] += 1;
        cols[y] += 1;
    }
    Ok(Contingency {
        cells,
        rows,
        cols,
        n: feature.len() as u64,
    })
}

/// Pearson chi-squared statistic of the feature × target contingency table.
pub fn chi_squared_score<A, B>(feature: &[A], target: &[B]) -> Result<f64>
where
    A: Eq + Hash + Clone,
    B: Eq + Hash + Clone,
{
    let t = contingency(feature, target)?;
    let n = t.n as f64;
    let mut chi2 = 0.0;
    // Iterate rows/cols in index order so the sum is reproducible.
    for (x, &rx) in t.rows.iter().enumerate() {
        for (y, &cy) in t.cols.iter().enumerate() {
            let expected = rx as f64 * cy as f64 / n;
            if expected > 0.0 {
                let observed = t.cells.get(&(x, y)).copied().unwrap_or(0) as f64;
                chi2 += (observed - expected).powi(2) / expected;
            }
        }
    }
    Ok(chi2)
}

/// Plug-in mutual information (nats) between two label sequences.
pub fn mutual_information_score<A, B>(feature: &[A], target: &[B]) -> Result<f64>
where
    A: Eq + Hash + Clone,
    B: Eq + Hash + Clone,
{
    let t = contingency(feature, target)?;
    let n = t.n as f64;
    let mut cells: Vec<_> = t.cells.iter().collect();
    cells.sort_unstable_by_key(|(k, _)| **k);
    let mi: f64 = cells
        .into_iter()
        .map(|(&(x, y), &c)| {
            let pxy = c as f64 / n;
            let px = t.rows[x] as f64 / n;
            let py = t.cols[y] as f64 / n;
            pxy * (pxy / (px * py)).ln()
        })
        .sum();
    Ok(mi.max(0.0))
}

/// Plug-in entropy (nats).
pub fn entropy<T: Eq + Hash + Clone>(labels: &[T]) -> f64 {
    let (codes, k) = intern(labels);
    let mut counts = vec![0u64; k];
    for c in codes {
        counts[c] += 1;
    }
    let n = labels.len() as f64;
    -counts
        .iter()
        .map(|&c| c as f64 / n)
        .map(|p| p * p.ln())
        .sum::<f64>()
}

/// Scores every candidate and ranks by mutual information, then chi-squared,
/// then name.
pub fn rank_features(
    dataset: &Dataset,
    candidates: &[String],
    measure: &str,
    n_bins: usize,
) -> Result<Vec<FeatureScore>> {
    if candidates.is_empty() {
        return Err(Error::InvalidParameter("no candidate features".into()));
    }
    let bins = discretize_target(dataset, measure, n_bins)?;
    let columns = candidates
        .iter()
        .map(|c| dataset.feature_index(c))
        .collect::<Result<Vec<_>>>()?;

    let mut scores = columns
        .par_iter()
        .zip(candidates)
        .map(|(&col, name)| {
            let labels: Vec<&str> = dataset
                .records
                .iter()
                .map(|r| r.features[col].as_str())
                .collect();
            Ok(FeatureScore {
                feature: name.clone(),
                chi2: chi_squared_score(&labels, &bins.labels)?,
                mutual_info: mutual_information_score(&labels, &bins.labels)?,
                rank: 0,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    scores.sort_by(|a, b| {
        b.mutual_info
            .total_cmp(&a.mutual_info)
            .then(b.chi2.total_cmp(&a.chi2))
            .then_with(|| a.feature.cmp(&b.feature))
    });
    for (i, s) in scores.iter_mut().enumerate() {
        s.rank = i + 1;
    }
    Ok(scores)
}
