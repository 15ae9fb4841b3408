use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use piks::config::{load_config, RunConfig};
use piks::error::{Error, Result, Stage};
use piks::pipeline::{self, with_staging, RunOptions};
use piks::report;

#[derive(Parser)]
#[command(name = "piks", version, about = "Pruned iterative k-means searchlight for trend outliers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Run configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Override the k-means and baseline seeds.
    #[arg(long)]
    seed: Option<u64>,
    /// Visit every lattice node, ignoring zero-outlier pruning.
    #[arg(long)]
    no_prune: bool,
    /// Override the configured output directory.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Worker threads (defaults to all cores).
    #[arg(long, env = "PIKS_THREADS")]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Load and clean the dataset, report drops and cardinalities.
    IngestCheck(Common),
    /// Rank candidate features by mutual information and chi-squared.
    RankFeatures(Common),
    /// Run the full pipeline and write the report and data files.
    Run(Common),
    /// Score the configured baseline node with isolation forest and feature bagging.
    Baseline(Common),
    /// Compare searchlight outliers with the baseline detectors at one node.
    Compare(Common),
}

fn load(common: &Common) -> Result<RunConfig> {
    let mut cfg = load_config(&common.config).map_err(|e| e.staged(Stage::Config))?;
    RunOptions {
        seed: common.seed,
        no_prune: common.no_prune,
        out_dir: common.out_dir.clone(),
    }
    .apply(&mut cfg);
    Ok(cfg)
}

fn ingest_check(cfg: &RunConfig) -> Result<()> {
    let ing = pipeline::ingest(cfg).map_err(|e| e.staged(Stage::Ingest))?;
    let s = &ing.summary;
    println!("rows read     {}", s.rows_read);
    println!("rows kept     {}", s.rows_kept);
    println!("rows dropped  {}", s.rows_dropped);
    if cfg.crosswalk.is_some() {
        println!("codes mapped  {}", s.codes_mapped);
        println!("codes dropped {}", s.codes_dropped);
    }
    println!("years         {:?}", ing.dataset.years());
    for (name, n) in ing.dataset.cardinalities() {
        println!("  {name}: {n} values");
    }
    with_staging(&cfg.output_dir, |dir| {
        let p = dir.join("drops.log");
        std::fs::write(&p, ing.cleaned.drop_log()).map_err(|e| Error::io(&p, e))
    })
    .map_err(|e| e.staged(Stage::Emit))
}

fn rank_features(cfg: &RunConfig) -> Result<()> {
    if cfg.feature_ranking.is_none() {
        return Err(Error::config("feature_ranking", "section required for rank-features").staged(Stage::Config));
    }
    let ing = pipeline::ingest(cfg).map_err(|e| e.staged(Stage::Ingest))?;
    let scores = pipeline::rank(cfg, &ing.dataset)
        .map_err(|e| e.staged(Stage::FeatureRanking))?
        .unwrap_or_default();
    println!("{:>4}  {:<40} {:>12} {:>14}", "rank", "feature", "mutual_info", "chi2");
    for s in &scores {
        println!("{:>4}  {:<40} {:>12.6} {:>14.3}", s.rank, s.feature, s.mutual_info, s.chi2);
    }
    with_staging(&cfg.output_dir, |dir| {
        report::write_feature_ranking(&dir.join("features.csv"), &scores, cfg.schema.delimiter)
    })
    .map_err(|e| e.staged(Stage::Emit))
}

fn run(cfg: &RunConfig) -> Result<()> {
    let out = pipeline::run(cfg)?;
    let st = out.report.stats;
    println!(
        "nodes: {} total, {} executed, {} unqualified, {} pruned ({:.1} ms)",
        st.total,
        st.executed,
        st.unqualified,
        st.pruned,
        out.timings().total.as_secs_f64() * 1e3
    );
    for node in out.report.nodes.iter().filter(|n| !n.outlier_series.is_empty()) {
        let labels: Vec<&str> = node.outlier_series.iter().map(|o| o.label.as_str()).collect();
        println!("  {}: {}", node.node.members.join(" + "), labels.join("; "));
    }
    println!("wrote {}", out.output_dir.display());
    Ok(())
}

fn baseline(cfg: &RunConfig, compare: bool) -> Result<()> {
    if cfg.baselines.is_none() {
        return Err(Error::config("baselines", "section required").staged(Stage::Config));
    }
    let ing = pipeline::ingest(cfg).map_err(|e| e.staged(Stage::Ingest))?;
    let b = pipeline::baselines(cfg, &ing.dataset)
        .map_err(|e| e.staged(Stage::Baselines))?
        .expect("baselines configured");
    let delim = cfg.schema.delimiter;
    if compare {
        for m in &b.summary.methods {
            println!("{}: {}", m.method, m.labels.join("; "));
        }
        for (a, c, j) in &b.summary.jaccard {
            let j = j.map(|v| format!("{v:.3}")).unwrap_or_else(|| "undefined".into());
            println!("jaccard({a}, {c}) = {j}");
        }
    } else {
        for method in [piks::baselines::Method::IsolationForest, piks::baselines::Method::FeatureBagging] {
            println!("{method}:");
            for &i in b.comparison.ranking(method).iter().take(10) {
                let r = &b.comparison.rows[i];
                let score = match method {
                    piks::baselines::Method::IsolationForest => r.isolation_forest,
                    _ => r.feature_bagging,
                };
                println!("  {score:>10.5} {i:>5} {}", r.key.join(" | "));
            }
        }
    }
    with_staging(&cfg.output_dir, |dir| {
        if compare {
            report::write_comparison(&dir.join("comparison.csv"), &b.summary, delim)?;
            report::write_overlap(&dir.join("comparison_overlap.csv"), &b.summary, delim)
        } else {
            report::write_baseline_scores(&dir.join("baseline_scores.csv"), &b.comparison, delim)
        }
    })
    .map_err(|e| e.staged(Stage::Emit))
}

fn dispatch(command: Command) -> Result<()> {
    let common = match &command {
        Command::IngestCheck(c)
        | Command::RankFeatures(c)
        | Command::Run(c)
        | Command::Baseline(c)
        | Command::Compare(c) => c.clone(),
    };
    let cfg = load(&common)?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(t) = common.threads {
        pool = pool.num_threads(t);
    }
    let pool = pool.build().map_err(|e| Error::Internal(e.to_string()))?;
    pool.install(|| match command {
        Command::IngestCheck(_) => ingest_check(&cfg),
        Command::RankFeatures(_) => rank_features(&cfg),
        Command::Run(_) => run(&cfg),
        Command::Baseline(_) => baseline(&cfg, false),
        Command::Compare(_) => baseline(&cfg, true),
    })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
