//! End-to-end orchestration: ingest, optional feature ranking, the pruned
//! searchlight, optional baseline cross-check, and file emission.
//!
//! Outputs are staged in a temporary directory inside the output directory
//! and moved into place only after every stage succeeded.

use std::path::{Path, PathBuf};

use crate::aggregate::{FeatureSubset, SeriesSet};
use crate::baselines::{compare_detectors, DetectorComparison, DetectorParams};
use crate::config::RunConfig;
use crate::error::{Error, Result, Stage};
use crate::features::{rank_features, FeatureScore};
use crate::ingest::{self, Cleaned, Dataset, IngestSummary};
use crate::lattice::{run_piks, KMeansExecutor, NodeDetail, NodeExecutor, Timings, Traversal};
use crate::report::{self, build_report, emit_comparison, ComparisonSummary, OutlierReport};

/// Command-line overrides applied on top of a loaded configuration.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub seed: Option<u64>,
    pub no_prune: bool,
    pub out_dir: Option<PathBuf>,
}

impl RunOptions {
    pub fn apply(&self, config: &mut RunConfig) {
        if let Some(seed) = self.seed {
            config.piks.kmeans.seed = seed;
            if let Some(b) = &mut config.baselines {
                b.isolation_forest.seed = seed;
                b.feature_bagging.seed = seed;
            }
        }
        if self.no_prune {
            config.piks.pruning_enabled = false;
        }
        if let Some(dir) = &self.out_dir {
            config.output_dir = dir.clone();
        }
    }
}

pub struct Ingested {
    pub dataset: Dataset,
    pub cleaned: Cleaned,
    pub summary: IngestSummary,
}

pub fn ingest(config: &RunConfig) -> Result<Ingested> {
    let crosswalk = config.load_crosswalk()?;
    let (dataset, cleaned, summary) =
        ingest::ingest(&config.dataset.paths, &config.schema, crosswalk.as_ref())?;
    Ok(Ingested {
        dataset,
        cleaned,
        summary,
    })
}

pub fn rank(config: &RunConfig, dataset: &Dataset) -> Result<Option<Vec<FeatureScore>>> {
    config
        .feature_ranking
        .as_ref()
        .map(|r| rank_features(dataset, &r.candidates, &r.measure, r.n_bins))
        .transpose()
}

/// Baseline cross-check at one lattice node.
pub struct BaselineRun {
    pub subset: FeatureSubset,
    pub members: Vec<String>,
    pub series: SeriesSet,
    pub comparison: DetectorComparison,
    pub summary: ComparisonSummary,
}

pub fn baselines(config: &RunConfig, dataset: &Dataset) -> Result<Option<BaselineRun>> {
    let Some(b) = &config.baselines else {
        return Ok(None);
    };
    let piks = config.piks_config();
    let mut num = 0u32;
    for f in &b.node {
        let i = piks
            .features
            .iter()
            .position(|x| x == f)
            .ok_or_else(|| Error::config("baselines.node", format!("`{f}` is not a lattice feature")))?;
        num |= 1 << i;
    }
    let subset = FeatureSubset::new(num, piks.n_features())?;
    let executor = KMeansExecutor::new(dataset, &piks)?;
    let series = executor.series(subset)?;
    let params = DetectorParams {
        kmeans: piks.kmeans.clone().with_seed(executor.node_seed(subset)),
        isolation_forest: b.isolation_forest.clone(),
        feature_bagging: b.feature_bagging.clone(),
        top_m: b.top_m,
    };
    let comparison = compare_detectors(&series.vectors(), &series.keys().into_iter().cloned().collect::<Vec<_>>(), &params)?;
    let universe: Vec<_> = series.series.iter().map(|s| s.key.clone()).collect();
    let piks_outliers: Vec<_> = comparison
        .ranking(crate::baselines::Method::Piks)
        .iter()
        .map(|&i| comparison.rows[i].key.clone())
        .collect();
    let members: Vec<String> = subset.members(&piks.features).into_iter().map(str::to_string).collect();
    let summary = emit_comparison(&members, &universe, &piks_outliers, &comparison)?;
    Ok(Some(BaselineRun {
        subset,
        members,
        series,
        comparison,
        summary,
    }))
}

pub struct RunOutput {
    pub report: OutlierReport,
    pub traversal: Traversal<NodeDetail>,
    pub baselines: Option<BaselineRun>,
    pub output_dir: PathBuf,
}

impl RunOutput {
    pub fn timings(&self) -> &Timings {
        &self.traversal.timings
    }
}

/// Runs every configured stage and writes the outputs to `config.output_dir`.
pub fn run(config: &RunConfig) -> Result<RunOutput> {
    let ing = ingest(config).map_err(|e| e.staged(Stage::Ingest))?;
    let ranking = rank(config, &ing.dataset).map_err(|e| e.staged(Stage::FeatureRanking))?;
    let piks = config.piks_config();
    let traversal = run_piks(&ing.dataset, &piks).map_err(|e| e.staged(Stage::Searchlight))?;
    let baseline = baselines(config, &ing.dataset).map_err(|e| e.staged(Stage::Baselines))?;

    let mut report = build_report(config, ing.summary.clone(), &traversal);
    report.feature_ranking = ranking;
    report.comparison = baseline.as_ref().map(|b| b.summary.clone());

    emit(config, &ing, &report, &traversal, baseline.as_ref()).map_err(|e| e.staged(Stage::Emit))?;
    Ok(RunOutput {
        report,
        traversal,
        baselines: baseline,
        output_dir: config.output_dir.clone(),
    })
}

/// Writes files produced by `write` into `out_dir` atomically per file set:
/// nothing is left behind if `write` fails.
pub fn with_staging(out_dir: &Path, write: impl FnOnce(&Path) -> Result<()>) -> Result<()> {
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let staging = tempfile::Builder::new()
        .prefix(".piks-staging-")
        .tempdir_in(out_dir)
        .map_err(|e| Error::io(out_dir, e))?;
    write(staging.path())?;
    let entries = std::fs::read_dir(staging.path()).map_err(|e| Error::io(staging.path(), e))?;
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(staging.path(), e))?;
        let target = out_dir.join(entry.file_name());
        if target.is_dir() {
            std::fs::remove_dir_all(&target).map_err(|e| Error::io(&target, e))?;
        }
        std::fs::rename(entry.path(), &target).map_err(|e| Error::io(&target, e))?;
    }
    Ok(())
}

fn emit(
    config: &RunConfig,
    ing: &Ingested,
    report: &OutlierReport,
    traversal: &Traversal<NodeDetail>,
    baseline: Option<&BaselineRun>,
) -> Result<()> {
    let delim = config.schema.delimiter;
    let n = config.piks.features.len();
    with_staging(&config.output_dir, |dir| {
        let write = |name: &str, text: &str| {
            let p = dir.join(name);
            std::fs::write(&p, text).map_err(|e| Error::io(&p, e))
        };
        write("report.json", &report.to_json())?;
        write("drops.log", &ing.cleaned.drop_log())?;
        report::write_timings(&dir.join("timings.csv"), &traversal.nodes, &traversal.timings, n)?;

        let series_dir = dir.join("series");
        let plot_dir = dir.join("plots");
        for d in [&series_dir, &plot_dir] {
            std::fs::create_dir_all(d).map_err(|e| Error::io(d, e))?;
        }
        for node in &traversal.nodes {
            let Some(detail) = traversal.details.get(&node.num) else {
                continue;
            };
            let stem = format!("node_{:05}_{}.csv", node.num, node.subset(n));
            report::write_series_dump(&series_dir.join(&stem), &node.members, &detail.series, delim)?;
            if detail.clustering.is_some() {
                report::write_plot_data(&plot_dir.join(&stem), detail, delim)?;
            }
        }
        if let Some(scores) = &report.feature_ranking {
            report::write_feature_ranking(&dir.join("features.csv"), scores, delim)?;
        }
        if let Some(b) = baseline {
            report::write_baseline_scores(&dir.join("baseline_scores.csv"), &b.comparison, delim)?;
            report::write_comparison(&dir.join("comparison.csv"), &b.summary, delim)?;
            report::write_overlap(&dir.join("comparison_overlap.csv"), &b.summary, delim)?;
        }
        Ok(())
    })
}

/// Name of the plot-data file written for a node.
pub fn plot_file_name(num: u32, n_features: usize) -> Result<String> {
    let s = FeatureSubset::new(num, n_features)?;
    Ok(format!("node_{num:05}_{s}.csv"))
}

/// Runs one node in isolation, outside the lattice traversal.
pub fn execute_node(config: &RunConfig, dataset: &Dataset, subset: FeatureSubset) -> Result<NodeDetail> {
    let piks = config.piks_config();
    let executor = KMeansExecutor::new(dataset, &piks)?;
    Ok(executor.execute(subset)?.detail)
}
