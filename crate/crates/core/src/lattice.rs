//! Breadth-first searchlight over the feature-subset lattice with pruning of
//! the supersets of zero-outlier nodes.
//!
//! The traversal in [`traverse`] is generic over a [`NodeExecutor`], so the
//! lattice bookkeeping can be exercised without clustering. [`run_piks`] wires
//! it to the aggregation and iterative k-means stages.

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::aggregate::{build_series, FeatureSubset, GroupKey, Measure, SeriesSet, MAX_FEATURES};
use crate::cluster::{iterative_kmeans, IterativeKMeansResult, KMeansParams};
use crate::error::{Error, Result};
use crate::ingest::Dataset;

fn default_threshold() -> usize {
    50
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiksConfig {
    /// Lattice features; bit `i` of a node mask selects `features[i]`.
    pub features: Vec<String>,
    /// Nodes with fewer series than this are not clustered.
    #[serde(default = "default_threshold")]
    pub row_threshold: usize,
    #[serde(default)]
    pub measure: Measure,
    pub years: Vec<i32>,
    pub baseline_year: i32,
    #[serde(default)]
    pub kmeans: KMeansParams,
    #[serde(default = "default_true")]
    pub pruning_enabled: bool,
}

impl PiksConfig {
    pub fn new(features: Vec<String>, years: Vec<i32>, baseline_year: i32) -> Self {
        PiksConfig {
            features,
            row_threshold: default_threshold(),
            measure: Measure::Count,
            years,
            baseline_year,
            kmeans: KMeansParams::default(),
            pruning_enabled: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.features.is_empty() || self.features.len() > MAX_FEATURES {
            return Err(Error::InvalidParameter(format!(
                "between 1 and {MAX_FEATURES} lattice features required, got {}",
                self.features.len()
            )));
        }
        for (i, f) in self.features.iter().enumerate() {
            if self.features[..i].contains(f) {
                return Err(Error::InvalidParameter(format!("duplicate lattice feature `{f}`")));
            }
        }
        if self.row_threshold == 0 {
            return Err(Error::InvalidParameter("row_threshold must be at least 1".into()));
        }
        if self.years.is_empty() {
            return Err(Error::InvalidParameter("no years configured".into()));
        }
        if !self.years.contains(&self.baseline_year) {
            return Err(Error::InvalidParameter(format!(
                "baseline year {} not among the configured years",
                self.baseline_year
            )));
        }
        self.kmeans.validate()
    }

    pub fn n_features(&self) -> usize {
        self.features.len()
    }
}

/// Every subset with `level` members, ascending by mask.
pub fn enumerate_level(n_features: usize, level: usize) -> Result<Vec<FeatureSubset>> {
    if n_features == 0 || n_features > MAX_FEATURES || level == 0 || level > n_features {
        return Err(Error::InvalidParameter(format!(
            "level {level} out of range for {n_features} features"
        )));
    }
    (1u32..1 << n_features)
        .filter(|m| m.count_ones() as usize == level)
        .map(|m| FeatureSubset::new(m, n_features))
        .collect()
}

/// Strict supersets of `num` within `n_features` bits, ascending.
pub fn descendants(num: u32, n_features: usize) -> Vec<u32> {
    let full = (1u32 << n_features) - 1;
    let free = full & !num;
    // Enumerate the non-empty submasks of the free bits.
    let mut out = Vec::with_capacity((1usize << free.count_ones()).saturating_sub(1));
    let mut sub = free;
    while sub != 0 {
        out.push(num | sub);
        sub = (sub - 1) & free;
    }
    out.sort_unstable();
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeStatus {
    Executed,
    Unqualified,
    Pruned,
}

/// Outcome of evaluating a single node.
#[derive(Debug, Clone)]
pub struct Execution<T> {
    pub series_count: usize,
    pub qualified: bool,
    /// Keys of the detected outliers; empty for unqualified nodes.
    pub outliers: Vec<GroupKey>,
    pub detail: T,
}

pub trait NodeExecutor: Sync {
    type Detail: Send;
    fn execute(&self, subset: FeatureSubset) -> Result<Execution<Self::Detail>>;
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LatticeNode {
    pub num: u32,
    pub level: usize,
    pub members: Vec<String>,
    pub done: bool,
    pub status: NodeStatus,
    /// Unknown for pruned nodes.
    pub qualified: Option<bool>,
    pub series_count: Option<usize>,
    pub outlier_count: Option<usize>,
    pub outliers: Vec<GroupKey>,
    pub pruned_by: Option<u32>,
}

impl LatticeNode {
    pub fn subset(&self, n_features: usize) -> FeatureSubset {
        FeatureSubset::new(self.num, n_features).expect("lattice node mask is valid")
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct LatticeStats {
    pub total: usize,
    pub executed: usize,
    pub pruned: usize,
    pub unqualified: usize,
}

/// Wall-clock measurements. Kept apart from the deterministic results.
#[derive(Debug, Clone, Default)]
pub struct Timings {
    pub total: Duration,
    pub per_node: BTreeMap<u32, Duration>,
}

#[derive(Debug)]
pub struct Traversal<T> {
    /// Indexed by `num - 1`.
    pub nodes: Vec<LatticeNode>,
    pub details: BTreeMap<u32, T>,
    pub stats: LatticeStats,
    pub timings: Timings,
}

impl<T> Traversal<T> {
    pub fn node(&self, num: u32) -> Option<&LatticeNode> {
        self.nodes.get(num.checked_sub(1)? as usize)
    }

    pub fn executed(&self) -> impl Iterator<Item = &LatticeNode> {
        self.nodes.iter().filter(|n| n.status == NodeStatus::Executed)
    }
}

/// Visits the lattice level by level. Nodes of one level run in parallel on
/// the current rayon pool; pruning marks are applied between levels, in
/// ascending mask order, so the result equals a sequential traversal.
pub fn traverse<E: NodeExecutor>(
    names: &[String],
    pruning_enabled: bool,
    executor: &E,
) -> Result<Traversal<E::Detail>> {
    let n = names.len();
    if n == 0 || n > MAX_FEATURES {
        return Err(Error::InvalidParameter(format!(
            "between 1 and {MAX_FEATURES} lattice features required, got {n}"
        )));
    }
    let started = Instant::now();
    let total = (1usize << n) - 1;
    let mut nodes: Vec<LatticeNode> = (1..=total as u32)
        .map(|num| {
            let subset = FeatureSubset::new(num, n).expect("valid mask");
            LatticeNode {
                num,
                level: subset.level(),
                members: subset.members(names).into_iter().map(str::to_string).collect(),
                done: false,
                status: NodeStatus::Pruned,
                qualified: None,
                series_count: None,
                outlier_count: None,
                outliers: Vec::new(),
                pruned_by: None,
            }
        })
        .collect();
    let mut details = BTreeMap::new();
    let mut timings = Timings::default();

    for level in 1..=n {
        let pending: Vec<FeatureSubset> = enumerate_level(n, level)?
            .into_iter()
            .filter(|s| !nodes[s.num() as usize - 1].done)
            .collect();

        #[allow(clippy::type_complexity)]
        let results: Vec<(FeatureSubset, Result<Execution<E::Detail>>, Duration)> = pending
            .into_par_iter()
            .map(|s| {
                let t = Instant::now();
                let r = executor.execute(s);
                (s, r, t.elapsed())
            })
            .collect();

        // Barrier: apply results and pruning in mask order.
        for (subset, result, elapsed) in results {
            let exec = result?;
            let num = subset.num();
            timings.per_node.insert(num, elapsed);
            let node = &mut nodes[num as usize - 1];
            debug_assert!(!node.done, "node {num} visited twice");
            node.done = true;
            node.series_count = Some(exec.series_count);
            node.qualified = Some(exec.qualified);
            if exec.qualified {
                node.status = NodeStatus::Executed;
                node.outlier_count = Some(exec.outliers.len());
                node.outliers = exec.outliers;
            } else {
                node.status = NodeStatus::Unqualified;
            }
            let prune = pruning_enabled && exec.qualified && node.outliers.is_empty();
            details.insert(num, exec.detail);
            if prune {
                for d in descendants(num, n) {
                    let child = &mut nodes[d as usize - 1];
                    if !child.done {
                        child.done = true;
                        child.pruned_by = Some(num);
                    }
                }
            }
        }
    }

    let mut stats = LatticeStats {
        total,
        ..Default::default()
    };
    for node in &nodes {
        match node.status {
            NodeStatus::Executed => stats.executed += 1,
            NodeStatus::Unqualified => stats.unqualified += 1,
            NodeStatus::Pruned => stats.pruned += 1,
        }
    }
    timings.total = started.elapsed();
    Ok(Traversal {
        nodes,
        details,
        stats,
        timings,
    })
}

/// Per-node artifacts of a k-means evaluation.
#[derive(Debug, Clone)]
pub struct NodeDetail {
    pub series: SeriesSet,
    /// `None` for unqualified nodes.
    pub clustering: Option<IterativeKMeansResult>,
}

/// Aggregates the node's series and runs iterative k-means on them.
pub struct KMeansExecutor<'a> {
    dataset: &'a Dataset,
    config: &'a PiksConfig,
    columns: Vec<usize>,
}

impl<'a> KMeansExecutor<'a> {
    pub fn new(dataset: &'a Dataset, config: &'a PiksConfig) -> Result<Self> {
        config.validate()?;
        let columns = config
            .features
            .iter()
            .map(|f| dataset.feature_index(f))
            .collect::<Result<Vec<_>>>()?;
        Ok(KMeansExecutor {
            dataset,
            config,
            columns,
        })
    }

    /// Seed used for a node: the configured seed XOR the node mask.
    pub fn node_seed(&self, subset: FeatureSubset) -> u64 {
        self.config.kmeans.seed ^ subset.num() as u64
    }

    pub fn series(&self, subset: FeatureSubset) -> Result<SeriesSet> {
        let cols: Vec<usize> = subset.indices().map(|i| self.columns[i]).collect();
        build_series(
            self.dataset,
            &cols,
            &self.config.measure,
            &self.config.years,
            self.config.baseline_year,
        )
    }
}

impl NodeExecutor for KMeansExecutor<'_> {
    type Detail = NodeDetail;

    fn execute(&self, subset: FeatureSubset) -> Result<Execution<NodeDetail>> {
        let series = self.series(subset)?;
        let series_count = series.group_count();
        if series_count < self.config.row_threshold {
            return Ok(Execution {
                series_count,
                qualified: false,
                outliers: Vec::new(),
                detail: NodeDetail {
                    series,
                    clustering: None,
                },
            });
        }
        let params = self.config.kmeans.clone().with_seed(self.node_seed(subset));
        let vectors = series.vectors();
        let clustering = if vectors.is_empty() {
            None
        } else {
            Some(iterative_kmeans(&vectors, &params)?)
        };
        let outliers = clustering
            .as_ref()
            .map(|c| c.outliers.iter().map(|o| series.series[o.id].key.clone()).collect())
            .unwrap_or_default();
        Ok(Execution {
            series_count,
            qualified: true,
            outliers,
            detail: NodeDetail { series, clustering },
        })
    }
}

/// Runs the pruned searchlight over `dataset`.
pub fn run_piks(dataset: &Dataset, config: &PiksConfig) -> Result<Traversal<NodeDetail>> {
    let executor = KMeansExecutor::new(dataset, config)?;
    traverse(&config.features, config.pruning_enabled, &executor)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashMap;

    #[test]
    fn level_sizes() {
        assert_eq!(enumerate_level(5, 1).unwrap().len(), 5);
        assert_eq!(enumerate_level(5, 3).unwrap().len(), 10);
        let total: usize = (1..=4).map(|l| enumerate_level(4, l).unwrap().len()).sum();
        assert_eq!(total, 15);
        assert!(enumerate_level(4, 0).is_err());
        assert!(enumerate_level(4, 5).is_err());
        let l2 = enumerate_level(4, 2).unwrap();
        assert!(l2.windows(2).all(|w| w[0].num() < w[1].num()));
    }

    #[test]
    fn descendant_sets() {
        // abc in {a..e}
        assert_eq!(descendants(0b00111, 5), vec![0b01111, 0b10111, 0b11111]);
        assert!(descendants(0b1111, 4).is_empty());
        assert_eq!(descendants(0b0001, 4).len(), 7);
    }

    struct Scripted {
        counts: HashMap<u32, (usize, usize)>,
    }

    impl NodeExecutor for Scripted {
        type Detail = ();
        fn execute(&self, s: FeatureSubset) -> Result<Execution<()>> {
            let (series, outliers, qualified) = match self.counts.get(&s.num()) {
                Some(&(series, outliers)) => (series, outliers, true),
                None => (1, 0, false),
            };
            Ok(Execution {
                series_count: series,
                qualified,
                outliers: (0..outliers).map(|i| vec![i.to_string()]).collect(),
                detail: (),
            })
        }
    }

    #[test]
    fn unqualified_nodes_do_not_prune() {
        let names: Vec<String> = ["a", "b"].map(String::from).into();
        // a unqualified, b qualified with outliers, ab qualified with none.
        let ex = Scripted {
            counts: [(0b10, (60, 1)), (0b11, (100, 0))].into(),
        };
        let t = traverse(&names, true, &ex).unwrap();
        assert_eq!(t.node(1).unwrap().status, NodeStatus::Unqualified);
        assert_eq!(t.node(3).unwrap().status, NodeStatus::Executed);
        assert_eq!(t.stats.pruned, 0);
    }

    #[test]
    fn pruned_by_first_zero_ancestor() {
        let names: Vec<String> = ["a", "b", "c"].map(String::from).into();
        let counts = (1..8u32)
            .map(|m| (m, (100, if m == 0b001 || m == 0b010 { 0 } else { 1 })))
            .collect();
        let t = traverse(&names, true, &Scripted { counts }).unwrap();
        assert_eq!(t.node(0b011).unwrap().pruned_by, Some(0b001));
        assert_eq!(t.node(0b110).unwrap().pruned_by, Some(0b010));
        assert_eq!(t.node(0b111).unwrap().pruned_by, Some(0b001));
        assert_eq!(t.node(0b100).unwrap().status, NodeStatus::Executed);
        assert_eq!(t.stats.executed + t.stats.pruned + t.stats.unqualified, 7);
        assert!(t.nodes.iter().all(|n| n.done));
    }
}
