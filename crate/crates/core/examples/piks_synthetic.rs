//! The whole searchlight on a synthetic discharge table with two planted
//! trends.
//!
//! ```text
//! cargo run --release --example piks_synthetic
//! ```

use piks::lattice::NodeStatus;
use piks::synth::{generate_table, Plant, SyntheticFeature, TableSpec};
use piks::{run_piks, PiksConfig};

fn main() -> piks::Result<()> {
    let spec = TableSpec {
        base_count: 3.0,
        noise: 0.1,
        plants: vec![
            Plant {
                feature: 0,
                value: 17,
                rate: 0.8,
            },
            Plant {
                feature: 0,
                value: 42,
                rate: -0.15,
            },
        ],
        seed: 2,
        ..TableSpec::new(
            vec![
                SyntheticFeature::numbered("CCS Diagnosis Description", "DX", 120),
                SyntheticFeature::new("Race", ["White", "Black/African American", "Other Race"]),
                SyntheticFeature::new("Age Group", ["0 to 17", "18 to 29", "30 to 49", "50 to 69", "70 or Older"]),
            ],
            (2009..=2014).collect(),
        )
    };
    let dataset = generate_table(&spec)?;
    println!("{} records", dataset.records.len());

    let features = spec.features.iter().map(|f| f.name.clone()).collect();
    let config = PiksConfig::new(features, spec.years.clone(), 2009);
    let t = run_piks(&dataset, &config)?;

    println!("{:<55} {:>7} {:>10} {:>8}", "node", "series", "status", "outliers");
    for node in &t.nodes {
        let status = match node.status {
            NodeStatus::Executed => "executed",
            NodeStatus::Unqualified => "too few",
            NodeStatus::Pruned => "pruned",
        };
        let series = node.series_count.map(|c| c.to_string()).unwrap_or_default();
        let outliers = node.outlier_count.map(|c| c.to_string()).unwrap_or_default();
        println!("{:<55} {series:>7} {status:>10} {outliers:>8}", node.members.join(" + "));
    }
    if let Some(dx) = t.node(1) {
        let labels: Vec<String> = dx.outliers.iter().map(|k| k.join(" | ")).collect();
        println!("first-level outliers: {}", labels.join("; "));
    }
    Ok(())
}
