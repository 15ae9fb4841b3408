//! Group records by a feature subset and turn each group's yearly counts
//! into percent change against the baseline year.
//!
//! ```text
//! cargo run --example percent_change_series
//! ```

use piks::aggregate::{build_series, Measure};
use piks::synth::{generate_table, Plant, SyntheticFeature, TableSpec};

fn main() -> piks::Result<()> {
    let spec = TableSpec {
        base_count: 20.0,
        trend: 0.05,
        plants: vec![Plant {
            feature: 0,
            value: 2,
            rate: 0.5,
        }],
        ..TableSpec::new(
            vec![
                SyntheticFeature::new("Diagnosis", ["Asthma", "Influenza", "Suicide", "Sepsis"]),
                SyntheticFeature::new("Race", ["White", "Black", "Other"]),
            ],
            (2009..=2014).collect(),
        )
    };
    let dataset = generate_table(&spec)?;
    let dx = dataset.feature_index("Diagnosis")?;

    let counts = build_series(&dataset, &[dx], &Measure::Count, &spec.years, 2009)?;
    println!("count by diagnosis, % change vs 2009");
    for s in &counts.series {
        let pct: Vec<String> = s.pct.iter().map(|p| format!("{p:7.1}")).collect();
        println!("  {:<10} {}", s.label(), pct.join(" "));
    }

    let cost = Measure::Mean {
        field: "Total Costs".into(),
    };
    let means = build_series(&dataset, &[dx], &cost, &spec.years, 2009)?;
    println!("mean cost by diagnosis, % change vs 2009");
    for s in &means.series {
        let pct: Vec<String> = s.pct.iter().map(|p| format!("{p:7.1}")).collect();
        println!("  {:<10} {}", s.label(), pct.join(" "));
    }
    Ok(())
}
