//! Group-by aggregation of records into per-year series and baseline-relative
//! percent-change vectors.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use rust_decimal::prelude::ToPrimitive;
use rust_decimal::Decimal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::Dataset;

/// Maximum number of lattice features.
pub const MAX_FEATURES: usize = 16;

/// Non-empty subset of the lattice features, as a bitmask. Bit `i` selects
/// the `i`-th lattice feature.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct FeatureSubset {
    num: u32,
    n_features: u8,
}

impl FeatureSubset {
    pub fn new(num: u32, n_features: usize) -> Result<Self> {
        if n_features == 0 || n_features > MAX_FEATURES {
            return Err(Error::InvalidParameter(format!(
                "lattice supports 1..={MAX_FEATURES} features, got {n_features}"
            )));
        }
        if num == 0 || num >= 1 << n_features {
            return Err(Error::InvalidParameter(format!(
                "subset mask {num} outside [1, {}]",
                (1u32 << n_features) - 1
            )));
        }
        Ok(FeatureSubset {
            num,
            n_features: n_features as u8,
        })
    }

    pub fn num(self) -> u32 {
        self.num
    }

    pub fn n_features(self) -> usize {
        self.n_features as usize
    }

    pub fn level(self) -> usize {
        self.num.count_ones() as usize
    }

    /// Positions of the selected features, ascending.
    pub fn indices(self) -> impl Iterator<Item = usize> {
        (0..self.n_features as usize).filter(move |i| self.num & (1 << i) != 0)
    }

    pub fn members(self, names: &[String]) -> Vec<&str> {
        self.indices().map(|i| names[i].as_str()).collect()
    }

    pub fn is_subset_of(self, other: FeatureSubset) -> bool {
        self.num & other.num == self.num
    }
}

impl fmt::Display for FeatureSubset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        // a, b, c, ... for bit 0, 1, 2, ...
        for i in self.indices() {
            write!(f, "{}", (b'a' + i as u8) as char)?;
        }
        Ok(())
    }
}

/// What is aggregated per (key, year) cell.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Measure {
    #[default]
    Count,
    Mean { field: String },
}

impl fmt::Display for Measure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Measure::Count => f.write_str("count"),
            Measure::Mean { field } => write!(f, "mean({field})"),
        }
    }
}

pub type GroupKey = Vec<String>;

/// Aggregated values of one group.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroupAggregate {
    /// Only years with data for mean measures; every configured year for counts.
    pub raw: BTreeMap<i32, Decimal>,
    pub support: u64,
}

#[derive(Default)]
struct Cell {
    count: u64,
    sum: Decimal,
}

/// Groups records by the values in `key_columns` and aggregates per year.
///
/// Records whose year is not in `years` are ignored.
pub fn split_apply_combine(
    dataset: &Dataset,
    key_columns: &[usize],
    measure: &Measure,
    years: &[i32],
) -> Result<BTreeMap<GroupKey, GroupAggregate>> {
    if years.is_empty() {
        return Err(Error::InvalidParameter("empty year list".into()));
    }
    let n_features = dataset.schema.feature_columns.len();
    if let Some(&bad) = key_columns.iter().find(|&&c| c >= n_features) {
        return Err(Error::InvalidParameter(format!("feature column index {bad} out of range")));
    }
    let measure_idx = match measure {
        Measure::Count => None,
        Measure::Mean { field } => Some(dataset.measure_index(field)?),
    };
    let year_slot: HashMap<i32, usize> = years.iter().enumerate().map(|(i, &y)| (y, i)).collect();

    let mut groups: HashMap<Vec<&str>, Vec<Cell>> = HashMap::new();
    for rec in &dataset.records {
        let Some(&slot) = year_slot.get(&rec.year) else {
            continue;
        };
        let key: Vec<&str> = key_columns.iter().map(|&c| rec.features[c].as_str()).collect();
        let cells = groups
            .entry(key)
            .or_insert_with(|| years.iter().map(|_| Cell::default()).collect());
        let cell = &mut cells[slot];
        cell.count += 1;
        if let Some(m) = measure_idx {
            cell.sum += rec.measures[m];
        }
    }

    Ok(groups
        .into_iter()
        .map(|(key, cells)| {
            let support = cells.iter().map(|c| c.count).sum();
            let raw = years
                .iter()
                .zip(&cells)
                .filter_map(|(&y, c)| match measure_idx {
                    None => Some((y, Decimal::from(c.count))),
                    Some(_) if c.count > 0 => Some((y, c.sum / Decimal::from(c.count))),
                    Some(_) => None,
                })
                .collect();
            (
                key.into_iter().map(str::to_string).collect(),
                GroupAggregate { raw, support },
            )
        })
        .collect())
}

/// Why a group was excluded from clustering.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Rejection {
    ZeroBaseline,
    NegativeBaseline,
    MissingBaseline,
    IncompleteSeries,
}

impl fmt::Display for Rejection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Rejection::ZeroBaseline => "zero-baseline",
            Rejection::NegativeBaseline => "negative-baseline",
            Rejection::MissingBaseline => "missing-baseline",
            Rejection::IncompleteSeries => "incomplete-series",
        })
    }
}

/// `100 * (raw(y) - raw(b)) / raw(b)` for every year in `years`.
pub fn to_percent_change(
    raw: &BTreeMap<i32, Decimal>,
    baseline_year: i32,
    years: &[i32],
) -> std::result::Result<Vec<f64>, Rejection> {
    let base = *raw.get(&baseline_year).ok_or(Rejection::MissingBaseline)?;
    if base.is_zero() {
        return Err(Rejection::ZeroBaseline);
    }
    if base.is_sign_negative() {
        return Err(Rejection::NegativeBaseline);
    }
    let b = base.to_f64().expect("decimal converts to f64");
    years
        .iter()
        .map(|y| {
            let v = raw.get(y).ok_or(Rejection::IncompleteSeries)?;
            if *y == baseline_year {
                return Ok(0.0);
            }
            let v = v.to_f64().expect("decimal converts to f64");
            Ok(100.0 * (v - b) / b)
        })
        .collect()
}

/// One group's trend, the unit clustered by k-means.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeriesVector {
    pub key: GroupKey,
    #[serde(skip)]
    pub raw: BTreeMap<i32, Decimal>,
    pub pct: Vec<f64>,
    pub support: u64,
}

impl SeriesVector {
    /// Key values joined for display, e.g. `INFLUENZA | White`.
    pub fn label(&self) -> String {
        self.key.join(" | ")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RejectedGroup {
    pub key: GroupKey,
    pub reason: Rejection,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct SeriesSet {
    /// Sorted by key.
    pub series: Vec<SeriesVector>,
    pub rejected: Vec<RejectedGroup>,
    pub years: Vec<i32>,
}

impl SeriesSet {
    /// Number of distinct groups before rejection filtering.
    pub fn group_count(&self) -> usize {
        self.series.len() + self.rejected.len()
    }

    pub fn vectors(&self) -> Vec<&[f64]> {
        self.series.iter().map(|s| s.pct.as_slice()).collect()
    }

    pub fn keys(&self) -> Vec<&GroupKey> {
        self.series.iter().map(|s| &s.key).collect()
    }
}

/// Aggregates and converts every group to percent change versus `baseline_year`.
pub fn build_series(
    dataset: &Dataset,
    key_columns: &[usize],
    measure: &Measure,
    years: &[i32],
    baseline_year: i32,
) -> Result<SeriesSet> {
    if !years.contains(&baseline_year) {
        return Err(Error::InvalidParameter(format!(
            "baseline year {baseline_year} not in the configured years"
        )));
    }
    let groups = split_apply_combine(dataset, key_columns, measure, years)?;
    let mut out = SeriesSet {
        years: years.to_vec(),
        ..Default::default()
    };
    for (key, agg) in groups {
        match to_percent_change(&agg.raw, baseline_year, years) {
            Ok(pct) => out.series.push(SeriesVector {
                key,
                raw: agg.raw,
                pct,
                support: agg.support,
            }),
            Err(reason) => out.rejected.push(RejectedGroup { key, reason }),
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{CleanRecord, DatasetSchema, MeasureKind};
    use proptest::prelude::*;

    fn dataset(rows: &[(&str, &str, i32, i64)]) -> Dataset {
        let schema = DatasetSchema::new(vec!["Race".into(), "Dx".into()], "Year", 2009)
            .with_measure("Cost", MeasureKind::Currency);
        let records = rows
            .iter()
            .enumerate()
            .map(|(i, &(race, dx, year, cost))| CleanRecord {
                line: i as u64 + 2,
                features: vec![race.into(), dx.into()],
                year,
                measures: vec![Decimal::from(cost)],
            })
            .collect();
        Dataset::new(schema, records).unwrap()
    }

    #[test]
    fn subset_basics() {
        let s = FeatureSubset::new(0b101, 3).unwrap();
        assert_eq!(s.level(), 2);
        assert_eq!(s.indices().collect::<Vec<_>>(), vec![0, 2]);
        assert_eq!(s.to_string(), "ac");
        assert!(FeatureSubset::new(0, 3).is_err());
        assert!(FeatureSubset::new(8, 3).is_err());
        assert!(FeatureSubset::new(1, 17).is_err());
    }

    #[test]
    fn counts_by_race() {
        let d = dataset(&[
            ("White", "x", 2009, 1),
            ("White", "x", 2009, 1),
            ("Other", "y", 2009, 1),
            ("White", "y", 2010, 1),
            ("Other", "x", 2010, 1),
            ("White", "z", 2010, 1),
        ]);
        let g = split_apply_combine(&d, &[0], &Measure::Count, &[2009, 2010]).unwrap();
        assert_eq!(g[&vec!["White".to_string()]].support, 4);
        assert_eq!(g[&vec!["Other".to_string()]].support, 2);
        assert_eq!(g[&vec!["Other".to_string()]].raw[&2010], Decimal::ONE);
    }

    #[test]
    fn mean_of_costs() {
        let d = dataset(&[
            ("White", "x", 2009, 10),
            ("White", "x", 2009, 20),
            ("White", "x", 2009, 30),
        ]);
        let m = Measure::Mean { field: "Cost".into() };
        let g = split_apply_combine(&d, &[0], &m, &[2009, 2010]).unwrap();
        let agg = &g[&vec!["White".to_string()]];
        assert_eq!(agg.raw[&2009], Decimal::from(20));
        assert!(!agg.raw.contains_key(&2010));
        let s = build_series(&d, &[0], &m, &[2009, 2010], 2009).unwrap();
        assert_eq!(s.rejected[0].reason, Rejection::IncompleteSeries);

        let bad = Measure::Mean { field: "Nope".into() };
        assert!(matches!(
            split_apply_combine(&d, &[0], &bad, &[2009]),
            Err(Error::UnknownMeasure(_))
        ));
    }

    #[test]
    fn percent_change_examples() {
        let raw: BTreeMap<i32, Decimal> =
            [(2009, 100), (2010, 150), (2011, 50)].map(|(y, v)| (y, Decimal::from(v))).into();
        assert_eq!(
            to_percent_change(&raw, 2009, &[2009, 2010, 2011]).unwrap(),
            vec![0.0, 50.0, -50.0]
        );
        let zero: BTreeMap<i32, Decimal> = [(2009, Decimal::ZERO), (2010, Decimal::ONE)].into();
        assert_eq!(to_percent_change(&zero, 2009, &[2009, 2010]), Err(Rejection::ZeroBaseline));
        assert_eq!(Rejection::ZeroBaseline.to_string(), "zero-baseline");
    }

    #[test]
    fn identical_profiles_identical_vectors() {
        let mut rows = Vec::new();
        for race in ["A", "B", "C"] {
            for (year, n) in [(2009, 2), (2010, 3), (2011, 1)] {
                for _ in 0..n {
                    rows.push((race, "x", year, 1));
                }
            }
        }
        let d = dataset(&rows);
        let s = build_series(&d, &[0], &Measure::Count, &[2009, 2010, 2011], 2009).unwrap();
        assert_eq!(s.series.len(), 3);
        assert!(s.series.windows(2).all(|w| w[0].pct == w[1].pct));
        assert_eq!(s.series[0].pct, vec![0.0, 50.0, -50.0]);
    }

    #[test]
    fn closed_form_growth() {
        // group g grows by (g+1)*10 percent per year over the baseline count of 20
        let mut rows = Vec::new();
        let groups = ["g0", "g1", "g2"];
        for (g, name) in groups.iter().enumerate() {
            for t in 0..4 {
                let n = 20 + 2 * (g as i64 + 1) * t;
                for _ in 0..n {
                    rows.push((*name, "x", 2009 + t as i32, 1));
                }
            }
        }
        let d = dataset(&rows);
        let years = [2009, 2010, 2011, 2012];
        let s = build_series(&d, &[0], &Measure::Count, &years, 2009).unwrap();
        for (g, series) in s.series.iter().enumerate() {
            for (t, pct) in series.pct.iter().enumerate() {
                let expected = 10.0 * (g as f64 + 1.0) * t as f64;
                assert!((pct - expected).abs() < 1e-9);
            }
        }
    }

    fn random_rows() -> impl Strategy<Value = Vec<(u8, u8, i32)>> {
        proptest::collection::vec((0u8..4, 0u8..3, 2009i32..2013), 1..80)
    }

    fn build(rows: &[(u8, u8, i32)]) -> Option<Dataset> {
        let schema = DatasetSchema::new(vec!["a".into(), "b".into()], "Year", 2009);
        let records: Vec<_> = rows
            .iter()
            .map(|&(a, b, y)| CleanRecord {
                line: 0,
                features: vec![a.to_string(), b.to_string()],
                year: y,
                measures: vec![],
            })
            .collect();
        Dataset::new(schema, records).ok()
    }

    proptest! {
        #[test]
        fn count_mass_is_conserved(rows in random_rows()) {
            let Some(d) = build(&rows) else { return Ok(()) };
            let years = [2009, 2010, 2011, 2012];
            let g = split_apply_combine(&d, &[0, 1], &Measure::Count, &years).unwrap();
            for y in years {
                let total: Decimal = g.values().map(|a| a.raw[&y]).sum();
                let expected = rows.iter().filter(|r| r.2 == y).count();
                prop_assert_eq!(total, Decimal::from(expected));
            }
        }

        #[test]
        fn keys_project_and_order_is_irrelevant(rows in random_rows(), seed in any::<u64>()) {
            use rand::{seq::SliceRandom, SeedableRng};
            let Some(d) = build(&rows) else { return Ok(()) };
            let years = [2009, 2010, 2011, 2012];
            let fine = split_apply_combine(&d, &[0, 1], &Measure::Count, &years).unwrap();
            let coarse = split_apply_combine(&d, &[0], &Measure::Count, &years).unwrap();
            let projected: std::collections::BTreeSet<_> =
                fine.keys().map(|k| vec![k[0].clone()]).collect();
            prop_assert_eq!(projected, coarse.keys().cloned().collect());

            let mut shuffled = d.clone();
            shuffled.records.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            let a = build_series(&d, &[0, 1], &Measure::Count, &years, 2009).unwrap();
            let b = build_series(&shuffled, &[0, 1], &Measure::Count, &years, 2009).unwrap();
            prop_assert_eq!(a, b);
        }

        #[test]
        fn pct_is_scale_invariant(vals in proptest::collection::vec(1i64..10_000, 4), scale in 1i64..50) {
            let years = [2009, 2010, 2011, 2012];
            let raw: BTreeMap<i32, Decimal> =
                years.iter().zip(&vals).map(|(&y, &v)| (y, Decimal::from(v))).collect();
            let scaled: BTreeMap<i32, Decimal> =
                raw.iter().map(|(&y, &v)| (y, v * Decimal::from(scale))).collect();
            let a = to_percent_change(&raw, 2009, &years).unwrap();
            let b = to_percent_change(&scaled, 2009, &years).unwrap();
            for (x, y) in a.iter().zip(&b) {
                prop_assert!((x - y).abs() < 1e-9 * (1.0 + x.abs()));
            }
            prop_assert_eq!(a[0], 0.0);
        }
    }
}
