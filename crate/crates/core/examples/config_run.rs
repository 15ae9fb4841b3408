//! Drive the full pipeline from a TOML configuration, as the `piks run`
//! subcommand does, and list the files it writes.
//!
//! ```text
//! cargo run --example config_run
//! ```

use piks::config::load_config;
use piks::pipeline;
use piks::synth::{generate_table, write_csv, Plant, SyntheticFeature, TableSpec};

const CONFIG: &str = r#"
output_dir = "out"

[dataset]
paths = ["discharges.csv"]

[schema]
feature_columns = ["Diagnosis", "Ethnicity", "Age Group"]
year_column = "Discharge Year"
baseline_year = 2009
measure_columns = [{ name = "Total Costs", kind = "currency" }]

[piks]
years = [2009, 2010, 2011, 2012, 2013]
row_threshold = 50

[piks.kmeans]
k = 8
seed = 5

[feature_ranking]
measure = "Total Costs"

[baselines]
node = ["Diagnosis"]
"#;

fn main() -> piks::Result<()> {
    let dir = tempfile::tempdir().map_err(|e| piks::Error::io(std::env::temp_dir(), e))?;
    let spec = TableSpec {
        base_count: 4.0,
        noise: 0.1,
        plants: vec![Plant {
            feature: 0,
            value: 9,
            rate: 1.0,
        }],
        seed: 1,
        ..TableSpec::new(
            vec![
                SyntheticFeature::numbered("Diagnosis", "DX", 80),
                SyntheticFeature::new("Ethnicity", ["Spanish/Hispanic", "Not Span/Hispanic", "Unknown"]),
                SyntheticFeature::new("Age Group", ["0 to 17", "18 to 29", "30 to 49", "50 to 69", "70 or Older"]),
            ],
            (2009..=2013).collect(),
        )
    };
    write_csv(&generate_table(&spec)?, &dir.path().join("discharges.csv"))?;
    let path = dir.path().join("run.toml");
    std::fs::write(&path, CONFIG).map_err(|e| piks::Error::io(&path, e))?;

    let config = load_config(&path)?;
    println!("config hash {}", config.config_hash());
    let out = pipeline::run(&config)?;
    let st = out.report.stats;
    println!("{} executed, {} unqualified, {} pruned", st.executed, st.unqualified, st.pruned);
    if let Some(c) = &out.report.comparison {
        for m in &c.methods {
            println!("  {}: {}", m.method, m.labels.join("; "));
        }
    }

    let mut files = Vec::new();
    let mut stack = vec![out.output_dir.clone()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).map_err(|e| piks::Error::io(&d, e))? {
            let p = e.map_err(|e| piks::Error::io(&d, e))?.path();
            if p.is_dir() {
                stack.push(p);
            } else {
                files.push(p.strip_prefix(&out.output_dir).unwrap().display().to_string());
            }
        }
    }
    files.sort();
    println!("{} files written, e.g.", files.len());
    for f in files.iter().take(8) {
        println!("  {f}");
    }
    Ok(())
}
