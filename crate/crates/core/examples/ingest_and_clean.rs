//! Load a discharge extract, drop unusable rows and map legacy codes.
//!
//! ```text
//! cargo run --example ingest_and_clean
//! ```

use piks::ingest::{clean, normalize_codes, parse_currency, read_table, CodeCrosswalk, MeasureKind, UnmappedPolicy};
use piks::DatasetSchema;

const EXTRACT: &str = "\
Facility Name,CCS Diagnosis Code,Race,Discharge Year,Total Costs
Albany Medical,003.0,White,2009,\"$22,731.10\"
Albany Medical,003.0,,2009,$1.00
Bellevue,V30.00,Black/African American,2010,\"$4,120.00\"
Bellevue,486,Other Race,20l0,$900.00
Mount Sinai,486,Unknown,2011,$12.50
";

fn main() -> piks::Result<()> {
    let schema = DatasetSchema::new(
        vec!["Facility Name".into(), "CCS Diagnosis Code".into(), "Race".into()],
        "Discharge Year",
        2009,
    )
    .with_measure("Total Costs", MeasureKind::Currency)
    .with_code_column("CCS Diagnosis Code");

    let table = read_table(EXTRACT.as_bytes(), std::path::Path::new("extract.csv"), &schema)?;
    let cleaned = clean(&table, &schema)?;
    println!("{} rows read, {} kept", table.rows.len(), cleaned.records.len());
    print!("{}", cleaned.drop_log());

    let crosswalk = CodeCrosswalk::new(
        [("003.0", "A02.0"), ("486", "J18.9")].map(|(a, b)| (a.to_string(), b.to_string())),
        UnmappedPolicy::KeepVerbatim,
    )?;
    let code = schema.feature_index("CCS Diagnosis Code").unwrap();
    let normalized = normalize_codes(cleaned.records, &crosswalk, code);
    println!("{} codes mapped, {} dropped", normalized.mapped, normalized.dropped);
    for r in &normalized.records {
        println!("  line {}: {:?} {} {}", r.line, r.features, r.year, r.measures[0]);
    }

    println!("parse_currency(\"$1,234,567.89\") = {}", parse_currency("$1,234,567.89")?);
    Ok(())
}
