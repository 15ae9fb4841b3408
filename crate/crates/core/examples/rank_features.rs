//! Rank candidate features by how much they say about cost quartiles.
//!
//! ```text
//! cargo run --example rank_features
//! ```

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rust_decimal::Decimal;

use piks::features::rank_features;
use piks::ingest::MeasureKind;
use piks::{CleanRecord, Dataset, DatasetSchema};

fn main() -> piks::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let severity = ["Minor", "Moderate", "Major", "Extreme"];
    let records = (0..4000)
        .map(|i| {
            let s = rng.random_range(0..4);
            // cost grows with severity; race and sex are noise
            let cents = (s as i64 + 1) * 400_000 + rng.random_range(0..600_000);
            CleanRecord {
                line: i + 2,
                features: vec![
                    severity[s].to_string(),
                    ["White", "Black", "Other"][rng.random_range(0..3)].to_string(),
                    ["F", "M"][rng.random_range(0..2)].to_string(),
                ],
                year: 2009,
                measures: vec![Decimal::new(cents, 2)],
            }
        })
        .collect();
    let schema = DatasetSchema::new(
        vec!["APR Severity of Illness".into(), "Race".into(), "Gender".into()],
        "Discharge Year",
        2009,
    )
    .with_measure("Total Costs", MeasureKind::Currency);
    let dataset = Dataset::new(schema.clone(), records)?;

    let scores = rank_features(&dataset, &schema.feature_columns, "Total Costs", 4)?;
    println!("{:>4}  {:<24} {:>10} {:>12}", "rank", "feature", "MI (nats)", "chi2");
    for s in scores {
        println!("{:>4}  {:<24} {:>10.4} {:>12.1}", s.rank, s.feature, s.mutual_info, s.chi2);
    }
    Ok(())
}
