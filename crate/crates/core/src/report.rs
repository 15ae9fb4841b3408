//! The outlier report and its flat-file companions (series dumps, plot data,
//! comparison tables).
//!
//! Everything written here is a deterministic function of the configuration
//! and input data. Wall-clock timings go to a separate file.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::Serialize;

use crate::aggregate::{FeatureSubset, GroupKey, Measure, Rejection, SeriesSet};
use crate::baselines::{DetectorComparison, Method};
use crate::cluster::{KMeansParams, Termination};
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::features::FeatureScore;
use crate::ingest::IngestSummary;
use crate::lattice::{LatticeNode, LatticeStats, NodeDetail, NodeStatus, Timings, Traversal};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportMetadata {
    pub tool: String,
    pub version: String,
    pub config_hash: String,
    pub seed: u64,
    pub pruning_enabled: bool,
    pub row_threshold: usize,
    pub measure: Measure,
    pub years: Vec<i32>,
    pub baseline_year: i32,
    pub features: Vec<String>,
    pub kmeans: KMeansParams,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OutlierSeries {
    pub key: GroupKey,
    pub label: String,
    pub pct: Vec<f64>,
    pub support: u64,
    pub removed_at_iteration: usize,
    /// Cluster label in each outer iteration up to removal.
    pub cluster_history: Vec<usize>,
    /// Proper sub-nodes whose outliers include the projection of this key.
    pub also_flagged_at: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RejectionCount {
    pub reason: Rejection,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NodeReport {
    #[serde(flatten)]
    pub node: LatticeNode,
    pub subset: String,
    pub rejected: Vec<RejectionCount>,
    pub iterations_run: Option<usize>,
    pub terminated_by: Option<Termination>,
    pub outlier_series: Vec<OutlierSeries>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OutlierReport {
    pub metadata: ReportMetadata,
    pub ingest: IngestSummary,
    pub stats: LatticeStats,
    pub nodes: Vec<NodeReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub feature_ranking: Option<Vec<FeatureScore>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub comparison: Option<ComparisonSummary>,
}

impl OutlierReport {
    pub fn node(&self, members: &[&str]) -> Option<&NodeReport> {
        self.nodes.iter().find(|n| n.node.members == members)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

fn project(key: &GroupKey, from: FeatureSubset, onto: FeatureSubset) -> GroupKey {
    from.indices()
        .zip(key)
        .filter(|(i, _)| onto.num() & (1 << i) != 0)
        .map(|(_, v)| v.clone())
        .collect()
}

pub fn build_report(
    config: &RunConfig,
    ingest: IngestSummary,
    traversal: &Traversal<NodeDetail>,
) -> OutlierReport {
    let piks = config.piks_config();
    let n = piks.n_features();
    let flagged: BTreeMap<u32, BTreeSet<&GroupKey>> = traversal
        .nodes
        .iter()
        .map(|node| (node.num, node.outliers.iter().collect()))
        .collect();

    let nodes = traversal
        .nodes
        .iter()
        .map(|node| {
            let subset = node.subset(n);
            let detail = traversal.details.get(&node.num);
            let mut rejected: BTreeMap<String, (Rejection, usize)> = BTreeMap::new();
            if let Some(d) = detail {
                for r in &d.series.rejected {
                    rejected.entry(r.reason.to_string()).or_insert((r.reason, 0)).1 += 1;
                }
            }
            let clustering = detail.and_then(|d| d.clustering.as_ref());
            let outlier_series = match (detail, clustering) {
                (Some(d), Some(c)) => c
                    .outliers
                    .iter()
                    .map(|o| {
                        let s = &d.series.series[o.id];
                        let also_flagged_at = flagged
                            .iter()
                            .filter(|(&num, keys)| {
                                num != node.num && num & node.num == num && {
                                    let sub = FeatureSubset::new(num, n).expect("valid");
                                    keys.contains(&project(&s.key, subset, sub))
                                }
                            })
                            .map(|(&num, _)| num)
                            .collect();
                        OutlierSeries {
                            key: s.key.clone(),
                            label: s.label(),
                            pct: s.pct.clone(),
                            support: s.support,
                            removed_at_iteration: o.iteration,
                            cluster_history: c.label_history(o.id),
                            also_flagged_at,
                        }
                    })
                    .collect(),
                _ => Vec::new(),
            };
            NodeReport {
                node: node.clone(),
                subset: subset.to_string(),
                rejected: rejected
                    .into_values()
                    .map(|(reason, count)| RejectionCount { reason, count })
                    .collect(),
                iterations_run: clustering.map(|c| c.iterations_run),
                terminated_by: clustering.map(|c| c.terminated_by),
                outlier_series,
            }
        })
        .collect();

    OutlierReport {
        metadata: ReportMetadata {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            config_hash: config.config_hash(),
            seed: piks.kmeans.seed,
            pruning_enabled: piks.pruning_enabled,
            row_threshold: piks.row_threshold,
            measure: piks.measure.clone(),
            years: piks.years.clone(),
            baseline_year: piks.baseline_year,
            features: piks.features.clone(),
            kmeans: piks.kmeans.clone(),
        },
        ingest,
        stats: traversal.stats,
        nodes,
        feature_ranking: None,
        comparison: None,
    }
}

fn writer(path: &Path, delimiter: char) -> Result<csv::Writer<std::fs::File>> {
    csv::WriterBuilder::new()
        .delimiter(delimiter as u8)
        .from_path(path)
        .map_err(|e| csv_error(path, e))
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Internal(format!("{}: {other:?}", path.display())),
    }
}

fn finish(path: &Path, mut w: csv::Writer<std::fs::File>) -> Result<()> {
    w.flush().map_err(|e| Error::io(path, e))
}

/// Columns: one per key member, then `year`, `raw`, `pct`.
pub fn write_series_dump(path: &Path, members: &[String], series: &SeriesSet, delimiter: char) -> Result<()> {
    let mut w = writer(path, delimiter)?;
    let mut header: Vec<&str> = members.iter().map(String::as_str).collect();
    header.extend(["year", "raw", "pct"]);
    w.write_record(&header).map_err(|e| csv_error(path, e))?;
    for s in &series.series {
        for (t, &year) in series.years.iter().enumerate() {
            let mut row = s.key.clone();
            row.push(year.to_string());
            row.push(s.raw.get(&year).map(|v| v.to_string()).unwrap_or_default());
            row.push(s.pct[t].to_string());
            w.write_record(&row).map_err(|e| csv_error(path, e))?;
        }
    }
    finish(path, w)
}

/// Columns: `key`, `year`, `pct`, `cluster`, `is_outlier`. Outliers carry the
/// cluster they were removed from.
pub fn write_plot_data(path: &Path, detail: &NodeDetail, delimiter: char) -> Result<()> {
    let mut w = writer(path, delimiter)?;
    w.write_record(["key", "year", "pct", "cluster", "is_outlier"])
        .map_err(|e| csv_error(path, e))?;
    let Some(c) = &detail.clustering else {
        return finish(path, w);
    };
    let outliers: BTreeSet<usize> = c.outlier_ids().into_iter().collect();
    for (id, s) in detail.series.series.iter().enumerate() {
        let cluster = c.cluster_of(id).map(|l| l.to_string()).unwrap_or_default();
        let is_outlier = outliers.contains(&id);
        for (&year, pct) in detail.series.years.iter().zip(&s.pct) {
            w.write_record([
                s.label(),
                year.to_string(),
                pct.to_string(),
                cluster.clone(),
                is_outlier.to_string(),
            ])
            .map_err(|e| csv_error(path, e))?;
        }
    }
    finish(path, w)
}

pub fn write_feature_ranking(path: &Path, scores: &[FeatureScore], delimiter: char) -> Result<()> {
    let mut w = writer(path, delimiter)?;
    w.write_record(["rank", "feature", "mutual_info", "chi2"])
        .map_err(|e| csv_error(path, e))?;
    for s in scores {
        w.write_record([
            s.rank.to_string(),
            s.feature.clone(),
            s.mutual_info.to_string(),
            s.chi2.to_string(),
        ])
        .map_err(|e| csv_error(path, e))?;
    }
    finish(path, w)
}

pub fn write_timings(path: &Path, traversal_nodes: &[LatticeNode], timings: &Timings, n: usize) -> Result<()> {
    let mut w = writer(path, ',')?;
    w.write_record(["num", "subset", "status", "millis"])
        .map_err(|e| csv_error(path, e))?;
    for node in traversal_nodes {
        let status = match node.status {
            NodeStatus::Executed => "executed",
            NodeStatus::Unqualified => "unqualified",
            NodeStatus::Pruned => "pruned",
        };
        let millis = timings
            .per_node
            .get(&node.num)
            .map(|d| format!("{:.3}", d.as_secs_f64() * 1e3))
            .unwrap_or_default();
        w.write_record([node.num.to_string(), node.subset(n).to_string(), status.to_string(), millis])
            .map_err(|e| csv_error(path, e))?;
    }
    w.write_record([
        "total".to_string(),
        String::new(),
        String::new(),
        format!("{:.3}", timings.total.as_secs_f64() * 1e3),
    ])
    .map_err(|e| csv_error(path, e))?;
    finish(path, w)
}

/// Table-8 style score listing: `method`, `rank`, `score`, `data_index`, `key`.
pub fn write_baseline_scores(path: &Path, cmp: &DetectorComparison, delimiter: char) -> Result<()> {
    let mut w = writer(path, delimiter)?;
    w.write_record(["method", "rank", "score", "data_index", "key"])
        .map_err(|e| csv_error(path, e))?;
    for method in [Method::IsolationForest, Method::FeatureBagging] {
        for (rank, &i) in cmp.ranking(method).iter().enumerate() {
            let row = &cmp.rows[i];
            let score = match method {
                Method::IsolationForest => row.isolation_forest,
                _ => row.feature_bagging,
            };
            w.write_record([
                method.to_string(),
                (rank + 1).to_string(),
                score.to_string(),
                i.to_string(),
                row.key.join(" | "),
            ])
            .map_err(|e| csv_error(path, e))?;
        }
    }
    finish(path, w)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MethodOutliers {
    pub method: Method,
    /// Alphabetical.
    pub labels: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonSummary {
    pub node: Vec<String>,
    pub top_m: usize,
    pub methods: Vec<MethodOutliers>,
    pub jaccard: Vec<(Method, Method, Option<f64>)>,
}

/// Lines up the searchlight's outliers at one node with the baseline
/// detectors' top-m sets. `universe` is the node's series keys.
pub fn emit_comparison(
    node: &[String],
    universe: &[GroupKey],
    piks_outliers: &[GroupKey],
    cmp: &DetectorComparison,
) -> Result<ComparisonSummary> {
    let ours: BTreeSet<&GroupKey> = universe.iter().collect();
    let theirs: BTreeSet<&GroupKey> = cmp.rows.iter().map(|r| &r.key).collect();
    if ours != theirs {
        return Err(Error::KeyMismatch(format!(
            "searchlight node has {} series, baseline input has {}",
            ours.len(),
            theirs.len()
        )));
    }
    if let Some(k) = piks_outliers.iter().find(|k| !ours.contains(k)) {
        return Err(Error::KeyMismatch(format!("outlier `{}` is not a series of the node", k.join(" | "))));
    }
    let index: BTreeMap<&GroupKey, usize> = cmp.rows.iter().map(|r| (&r.key, r.index)).collect();
    let piks_set: BTreeSet<usize> = piks_outliers.iter().map(|k| index[k]).collect();

    let sets: Vec<(Method, BTreeSet<usize>)> = Method::ALL
        .iter()
        .map(|&m| match m {
            Method::Piks => (m, piks_set.clone()),
            _ => (m, cmp.outliers(m).clone()),
        })
        .collect();
    let methods = sets
        .iter()
        .map(|(m, set)| {
            let mut labels: Vec<String> = set.iter().map(|&i| cmp.rows[i].key.join(" | ")).collect();
            labels.sort();
            MethodOutliers { method: *m, labels }
        })
        .collect();
    let mut jaccard = Vec::new();
    for i in 0..sets.len() {
        for j in i + 1..sets.len() {
            jaccard.push((sets[i].0, sets[j].0, crate::baselines::jaccard(&sets[i].1, &sets[j].1)));
        }
    }
    Ok(ComparisonSummary {
        node: node.to_vec(),
        top_m: cmp.top_m,
        methods,
        jaccard,
    })
}

/// Side-by-side alphabetical outlier labels, one column per method.
pub fn write_comparison(path: &Path, summary: &ComparisonSummary, delimiter: char) -> Result<()> {
    let mut w = writer(path, delimiter)?;
    let mut header = vec!["row".to_string()];
    header.extend(summary.methods.iter().map(|m| m.method.to_string()));
    w.write_record(&header).map_err(|e| csv_error(path, e))?;
    let rows = summary.methods.iter().map(|m| m.labels.len()).max().unwrap_or(0);
    for r in 0..rows {
        let mut row = vec![(r + 1).to_string()];
        row.extend(summary.methods.iter().map(|m| m.labels.get(r).cloned().unwrap_or_default()));
        w.write_record(&row).map_err(|e| csv_error(path, e))?;
    }
    finish(path, w)
}

/// `method_a`, `method_b`, `jaccard` (`undefined` when both sets are empty).
pub fn write_overlap(path: &Path, summary: &ComparisonSummary, delimiter: char) -> Result<()> {
    let mut w = writer(path, delimiter)?;
    w.write_record(["method_a", "method_b", "jaccard"])
        .map_err(|e| csv_error(path, e))?;
    for (a, b, j) in &summary.jaccard {
        w.write_record([
            a.to_string(),
            b.to_string(),
            j.map(|v| v.to_string()).unwrap_or_else(|| "undefined".into()),
        ])
        .map_err(|e| csv_error(path, e))?;
    }
    finish(path, w)
}
