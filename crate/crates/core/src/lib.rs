//! Trend outlier discovery over the feature-subset lattice of categorical,
//! yearly tabular data.
//!
//! Records are grouped by every non-empty subset of the selected features,
//! aggregated per year, and expressed as percent change against a baseline
//! year. Each subset's series are clustered with iterative k-means; clusters
//! of at most a couple of members are reported as outliers. The lattice is
//! walked breadth-first, and the supersets of any subset that yields no
//! outliers are skipped.
//!
//! Modules, in pipeline order:
//!
//! - [`ingest`]: load, clean and normalize delimited tables
//! - [`features`]: chi-squared / mutual-information feature ranking
//! - [`aggregate`]: split-apply-combine and percent-change series
//! - [`cluster`]: k-means and the iterative outlier remover
//! - [`lattice`]: the pruned breadth-first searchlight
//! - [`baselines`]: isolation forest, LOF and feature bagging
//! - [`config`], [`report`], [`pipeline`]: run configuration and emitted files

pub mod aggregate;
pub mod baselines;
pub mod cluster;
pub mod config;
pub mod error;
pub mod features;
pub mod ingest;
pub mod lattice;
pub mod pipeline;
pub mod report;
pub mod synth;

pub use aggregate::{FeatureSubset, Measure, SeriesSet, SeriesVector};
pub use cluster::{iterative_kmeans, kmeans, ClusterAssignment, IterativeKMeansResult, KMeansParams};
pub use error::{Error, Result};
pub use ingest::{CleanRecord, Dataset, DatasetSchema};
pub use lattice::{run_piks, LatticeNode, PiksConfig};
