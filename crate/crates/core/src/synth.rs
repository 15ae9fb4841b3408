//! Seeded synthetic data: discharge-style categorical tables with planted
//! trend anomalies, and Gaussian point clouds with planted outliers.
//!
//! Used by the test suites and examples; every generator is a pure function
//! of its spec and seed.

use std::io::Write;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rust_decimal::Decimal;

use crate::error::{Error, Result};
use crate::ingest::{format_currency, CleanRecord, Dataset, DatasetSchema, MeasureKind};

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticFeature {
    pub name: String,
    pub categories: Vec<String>,
}

impl SyntheticFeature {
    pub fn new(name: impl Into<String>, categories: impl IntoIterator<Item = impl Into<String>>) -> Self {
        SyntheticFeature {
            name: name.into(),
            categories: categories.into_iter().map(Into::into).collect(),
        }
    }

    /// Categories named `<prefix> 0`, `<prefix> 1`, ...
    pub fn numbered(name: impl Into<String>, prefix: &str, n: usize) -> Self {
        let name = name.into();
        SyntheticFeature {
            categories: (0..n).map(|i| format!("{prefix} {i}")).collect(),
            name,
        }
    }
}

/// Cells matching `value` of `feature` grow by `rate` per year relative to
/// the baseline, on top of the common trend.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Plant {
    pub feature: usize,
    pub value: usize,
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TableSpec {
    pub features: Vec<SyntheticFeature>,
    pub years: Vec<i32>,
    /// Mean records per cell in the baseline (first) year.
    pub base_count: f64,
    /// Common per-year growth rate.
    pub trend: f64,
    /// Relative uniform jitter applied to each cell-year count.
    pub noise: f64,
    pub plants: Vec<Plant>,
    pub seed: u64,
}

impl TableSpec {
    pub fn new(features: Vec<SyntheticFeature>, years: Vec<i32>) -> Self {
        TableSpec {
            features,
            years,
            base_count: 4.0,
            trend: 0.0,
            noise: 0.0,
            plants: Vec::new(),
            seed: 0,
        }
    }

    pub fn schema(&self) -> DatasetSchema {
        DatasetSchema::new(
            self.features.iter().map(|f| f.name.clone()).collect(),
            "Discharge Year",
            self.years[0],
        )
        .with_measure("Total Costs", MeasureKind::Currency)
    }

    pub fn cell_count(&self) -> usize {
        self.features.iter().map(|f| f.categories.len()).product()
    }
}

/// One record per (cell, year, occurrence); every cell appears in every year.
pub fn generate_table(spec: &TableSpec) -> Result<Dataset> {
    if spec.features.is_empty() || spec.years.is_empty() {
        return Err(Error::InvalidParameter("synthetic table needs features and years".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let dims: Vec<usize> = spec.features.iter().map(|f| f.categories.len()).collect();
    let mut idx = vec![0usize; dims.len()];
    let mut records = Vec::new();
    let mut line = 2u64;
    'cells: loop {
        let rate: f64 = spec.trend
            + spec
                .plants
                .iter()
                .filter(|p| idx[p.feature] == p.value)
                .map(|p| p.rate)
                .sum::<f64>();
        let features: Vec<String> = idx
            .iter()
            .zip(&spec.features)
            .map(|(&i, f)| f.categories[i].clone())
            .collect();
        for (t, &year) in spec.years.iter().enumerate() {
            let jitter = if spec.noise > 0.0 {
                1.0 + spec.noise * rng.random_range(-1.0..=1.0)
            } else {
                1.0
            };
            let mean = spec.base_count * (1.0 + rate * t as f64).max(0.0) * jitter;
            let n = mean.round().max(if t == 0 { 1.0 } else { 0.0 }) as usize;
            for _ in 0..n {
                let cents = rng.random_range(10_000..5_000_000);
                records.push(CleanRecord {
                    line,
                    features: features.clone(),
                    year,
                    measures: vec![Decimal::new(cents, 2)],
                });
                line += 1;
            }
        }
        // odometer over the category indices
        for d in (0..dims.len()).rev() {
            idx[d] += 1;
            if idx[d] < dims[d] {
                continue 'cells;
            }
            idx[d] = 0;
        }
        break;
    }
    Dataset::new(spec.schema(), records)
}

/// Writes a dataset as comma-delimited text with a header row.
pub fn write_csv(dataset: &Dataset, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(std::io::BufWriter::new(file));
    let schema = &dataset.schema;
    let io = |e: csv::Error| Error::Internal(e.to_string());
    let mut header = schema.feature_columns.clone();
    header.push(schema.year_column.clone());
    header.extend(schema.measure_columns.iter().map(|m| m.name.clone()));
    w.write_record(&header).map_err(io)?;
    for r in &dataset.records {
        let mut row = r.features.clone();
        row.push(r.year.to_string());
        for (m, col) in r.measures.iter().zip(&schema.measure_columns) {
            row.push(match col.kind {
                MeasureKind::Currency => format_currency(*m),
                _ => m.to_string(),
            });
        }
        w.write_record(&row).map_err(io)?;
    }
    w.into_inner()
        .map_err(|e| Error::Internal(e.to_string()))?
        .flush()
        .map_err(|e| Error::io(path, e))
}

/// `per_blob` isotropic Gaussian points around each center.
pub fn gaussian_blobs(centers: &[Vec<f64>], per_blob: usize, sigma: f64, rng: &mut impl Rng) -> Vec<Vec<f64>> {
    let normal = Normal::new(0.0, sigma).expect("sigma is finite and non-negative");
    centers
        .iter()
        .flat_map(|c| {
            (0..per_blob)
                .map(|_| c.iter().map(|&x| x + normal.sample(rng)).collect::<Vec<_>>())
                .collect::<Vec<_>>()
        })
        .collect()
}
