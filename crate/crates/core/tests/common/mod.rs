#![allow(dead_code)]

use std::path::{Path, PathBuf};

use piks::synth::{generate_table, write_csv, Plant, SyntheticFeature, TableSpec};

/// Noise-free table: `DX 3` grows 100% a year, everything else is flat.
/// `Region` carries no signal, so its node finds no outliers.
pub fn planted_spec() -> TableSpec {
    TableSpec {
        base_count: 1.0,
        plants: vec![Plant {
            feature: 0,
            value: 3,
            rate: 1.0,
        }],
        ..TableSpec::new(
            vec![
                SyntheticFeature::numbered("Diagnosis", "DX", 60),
                SyntheticFeature::numbered("Race", "R", 3),
                SyntheticFeature::numbered("Region", "REG", 55),
            ],
            (2009..=2014).collect(),
        )
    }
}

pub const PLANTED_CONFIG: &str = r#"
output_dir = "out"

[dataset]
paths = ["data.csv"]

[schema]
feature_columns = ["Diagnosis", "Race", "Region"]
year_column = "Discharge Year"
baseline_year = 2009
measure_columns = [{ name = "Total Costs", kind = "currency" }]

[piks]
years = [2009, 2010, 2011, 2012, 2013, 2014]

[feature_ranking]
measure = "Total Costs"

[baselines]
node = ["Diagnosis"]
top_m = 1
"#;

/// Writes `data.csv` from `spec` and `run.toml` from `config` into `dir`.
pub fn write_fixture(dir: &Path, spec: &TableSpec, config: &str) -> PathBuf {
    let dataset = generate_table(spec).unwrap();
    write_csv(&dataset, &dir.join("data.csv")).unwrap();
    let path = dir.join("run.toml");
    std::fs::write(&path, config).unwrap();
    path
}
