//! Loading, cleaning and code normalization of delimited discharge tables.
//!
//! A table is read verbatim by [`load_table`], turned into typed
//! [`CleanRecord`]s by [`clean`] (rows with missing or unparseable values are
//! dropped and logged, never fatal), and optionally passed through a
//! [`CodeCrosswalk`] to bring diagnosis codes from different coding systems
//! onto one vocabulary.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rust_decimal::Decimal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const MIN_YEAR: i32 = 1900;
const MAX_YEAR: i32 = 2100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeasureKind {
    Currency,
    Decimal,
    Integer,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MeasureColumn {
    pub name: String,
    pub kind: MeasureKind,
}

fn default_delimiter() -> char {
    ','
}

fn default_missing() -> Vec<String> {
    vec![String::new(), "NA".to_string()]
}

/// Column layout of a dataset.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetSchema {
    /// Categorical columns, in the order used for keys.
    pub feature_columns: Vec<String>,
    pub year_column: String,
    #[serde(default)]
    pub measure_columns: Vec<MeasureColumn>,
    pub baseline_year: i32,
    /// Feature column rewritten through a crosswalk, if any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub code_column: Option<String>,
    #[serde(default = "default_delimiter")]
    pub delimiter: char,
    /// Cell values treated as missing. `Unknown` is deliberately absent: it is
    /// a real category in discharge data.
    #[serde(default = "default_missing")]
    pub missing_values: Vec<String>,
}

impl DatasetSchema {
    pub fn new(
        feature_columns: Vec<String>,
        year_column: impl Into<String>,
        baseline_year: i32,
    ) -> Self {
        DatasetSchema {
            feature_columns,
            year_column: year_column.into(),
            measure_columns: Vec::new(),
            baseline_year,
            code_column: None,
            delimiter: default_delimiter(),
            missing_values: default_missing(),
        }
    }

    pub fn with_measure(mut self, name: impl Into<String>, kind: MeasureKind) -> Self {
        self.measure_columns.push(MeasureColumn {
            name: name.into(),
            kind,
        });
        self
    }

    pub fn with_code_column(mut self, name: impl Into<String>) -> Self {
        self.code_column = Some(name.into());
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.feature_columns.is_empty() {
            return Err(Error::Schema("feature_columns is empty".into()));
        }
        let mut seen = HashSet::new();
        for name in &self.feature_columns {
            if name.is_empty() {
                return Err(Error::Schema("empty feature column name".into()));
            }
            if !seen.insert(name.as_str()) {
                return Err(Error::Schema(format!("duplicate feature column `{name}`")));
            }
        }
        if seen.contains(self.year_column.as_str()) {
            return Err(Error::Schema(format!(
                "year column `{}` is also a feature column",
                self.year_column
            )));
        }
        let mut measures = HashSet::new();
        for m in &self.measure_columns {
            if !measures.insert(m.name.as_str()) {
                return Err(Error::Schema(format!("duplicate measure column `{}`", m.name)));
            }
        }
        if let Some(code) = &self.code_column {
            if !seen.contains(code.as_str()) {
                return Err(Error::Schema(format!(
                    "code column `{code}` is not a feature column"
                )));
            }
        }
        if !self.delimiter.is_ascii() {
            return Err(Error::Schema("delimiter must be a single ASCII character".into()));
        }
        Ok(())
    }

    pub fn feature_index(&self, name: &str) -> Option<usize> {
        self.feature_columns.iter().position(|c| c == name)
    }

    pub fn measure_index(&self, name: &str) -> Option<usize> {
        self.measure_columns.iter().position(|c| c.name == name)
    }

    fn required_columns(&self) -> impl Iterator<Item = &str> {
        self.feature_columns
            .iter()
            .map(String::as_str)
            .chain(std::iter::once(self.year_column.as_str()))
            .chain(self.measure_columns.iter().map(|m| m.name.as_str()))
    }
}

/// One verbatim data line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawRow {
    /// 1-based line number in the source file (header is line 1).
    pub line: u64,
    pub fields: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawTable {
    pub source: PathBuf,
    pub headers: Vec<String>,
    pub rows: Vec<RawRow>,
}

impl RawTable {
    pub fn column(&self, name: &str) -> Option<usize> {
        self.headers.iter().position(|h| h == name)
    }

    /// Value of `column` in `row`, if the column exists.
    pub fn get<'a>(&self, row: &'a RawRow, column: &str) -> Option<&'a str> {
        self.column(column)
            .and_then(|i| row.fields.get(i))
            .map(String::as_str)
    }

    /// Appends the rows of `other`, which must carry the same header.
    pub fn extend(&mut self, other: RawTable) -> Result<()> {
        if other.headers != self.headers {
            return Err(Error::Malformed {
                path: other.source,
                line: 1,
                message: "header differs from the first dataset file".into(),
            });
        }
        self.rows.extend(other.rows);
        Ok(())
    }
}

/// Reads a delimited file with a header row. Values are kept verbatim.
pub fn load_table(path: &Path, schema: &DatasetSchema) -> Result<RawTable> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_table(file, path, schema)
}

pub fn read_table<R: std::io::Read>(
    reader: R,
    source: &Path,
    schema: &DatasetSchema,
) -> Result<RawTable> {
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(schema.delimiter as u8)
        .has_headers(true)
        .flexible(false)
        .from_reader(reader);

    let malformed = |e: csv::Error| {
        let line = e.position().map(|p| p.line()).unwrap_or(0);
        match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(source, io),
            kind => Error::Malformed {
                path: source.to_path_buf(),
                line,
                message: describe_csv_error(&kind),
            },
        }
    };

    let headers: Vec<String> = rdr
        .headers()
        .map_err(malformed)?
        .iter()
        .map(|h| h.trim_start_matches('\u{feff}').to_string())
        .collect();
    for column in schema.required_columns() {
        if !headers.iter().any(|h| h == column) {
            return Err(Error::MissingColumn {
                path: source.to_path_buf(),
                column: column.to_string(),
            });
        }
    }

    let mut rows = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(malformed)?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        rows.push(RawRow {
            line,
            fields: record.iter().map(str::to_string).collect(),
        });
    }
    Ok(RawTable {
        source: source.to_path_buf(),
        headers,
        rows,
    })
}

fn describe_csv_error(kind: &csv::ErrorKind) -> String {
    match kind {
        csv::ErrorKind::UnequalLengths {
            expected_len, len, ..
        } => format!("expected {expected_len} fields, found {len}"),
        csv::ErrorKind::Utf8 { err, .. } => format!("invalid UTF-8: {err}"),
        other => format!("{other:?}"),
    }
}

/// A row that survived cleaning. Feature values and measures are stored in
/// schema order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CleanRecord {
    pub line: u64,
    pub features: Vec<String>,
    pub year: i32,
    pub measures: Vec<Decimal>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DropReason {
    MissingFeature(String),
    MissingYear,
    BadYear(String),
    MissingMeasure(String),
    BadMeasure { column: String, text: String },
}

impl fmt::Display for DropReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DropReason::MissingFeature(c) => write!(f, "missing value in `{c}`"),
            DropReason::MissingYear => write!(f, "missing year"),
            DropReason::BadYear(t) => write!(f, "unparseable year `{t}`"),
            DropReason::MissingMeasure(c) => write!(f, "missing value in `{c}`"),
            DropReason::BadMeasure { column, text } => {
                write!(f, "unparseable `{column}` value `{text}`")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DroppedRow {
    pub line: u64,
    pub reason: DropReason,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Cleaned {
    pub records: Vec<CleanRecord>,
    pub dropped: Vec<DroppedRow>,
}

impl Cleaned {
    pub fn drop_count(&self) -> usize {
        self.dropped.len()
    }

    /// Sidecar drop diagnostics, one line per dropped row.
    pub fn drop_log(&self) -> String {
        self.dropped
            .iter()
            .map(|d| format!("line {}: {}\n", d.line, d.reason))
            .collect()
    }
}

/// Drops rows with missing features, years or measures; parses the rest.
pub fn clean(table: &RawTable, schema: &DatasetSchema) -> Result<Cleaned> {
    let col = |name: &str| {
        table.column(name).ok_or_else(|| Error::MissingColumn {
            path: table.source.clone(),
            column: name.to_string(),
        })
    };
    let feature_cols = schema
        .feature_columns
        .iter()
        .map(|c| col(c))
        .collect::<Result<Vec<_>>>()?;
    let year_col = col(&schema.year_column)?;
    let measure_cols = schema
        .measure_columns
        .iter()
        .map(|m| col(&m.name).map(|i| (i, m)))
        .collect::<Result<Vec<_>>>()?;

    let missing: HashSet<&str> = schema.missing_values.iter().map(String::as_str).collect();
    let is_missing = |v: &str| missing.contains(v.trim());

    let mut out = Cleaned::default();
    'rows: for row in &table.rows {
        let field = |i: usize| row.fields.get(i).map(String::as_str).unwrap_or("");
        let mut drop = |reason| out.dropped.push(DroppedRow { line: row.line, reason });

        let mut features = Vec::with_capacity(feature_cols.len());
        for (&i, name) in feature_cols.iter().zip(&schema.feature_columns) {
            let v = field(i);
            if is_missing(v) {
                drop(DropReason::MissingFeature(name.clone()));
                continue 'rows;
            }
            features.push(v.to_string());
        }

        let year_text = field(year_col);
        if is_missing(year_text) {
            drop(DropReason::MissingYear);
            continue;
        }
        let Some(year) = parse_year(year_text) else {
            drop(DropReason::BadYear(year_text.to_string()));
            continue;
        };

        let mut measures = Vec::with_capacity(measure_cols.len());
        for &(i, m) in &measure_cols {
            let v = field(i);
            if is_missing(v) {
                drop(DropReason::MissingMeasure(m.name.clone()));
                continue 'rows;
            }
            match parse_measure(v, m.kind) {
                Ok(d) => measures.push(d),
                Err(_) => {
                    drop(DropReason::BadMeasure {
                        column: m.name.clone(),
                        text: v.to_string(),
                    });
                    continue 'rows;
                }
            }
        }

        out.records.push(CleanRecord {
            line: row.line,
            features,
            year,
            measures,
        });
    }
    Ok(out)
}

fn parse_year(text: &str) -> Option<i32> {
    let t = text.trim();
    if t.len() != 4 || !t.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    let y: i32 = t.parse().ok()?;
    (MIN_YEAR..=MAX_YEAR).contains(&y).then_some(y)
}

fn parse_measure(text: &str, kind: MeasureKind) -> Result<Decimal> {
    let t = text.trim();
    match kind {
        MeasureKind::Currency => parse_currency(t),
        MeasureKind::Decimal => Decimal::from_str(&t.replace(',', "")).map_err(|_| Error::Parse {
            text: t.to_string(),
            what: "decimal",
        }),
        MeasureKind::Integer => t
            .replace(',', "")
            .parse::<i64>()
            .map(Decimal::from)
            .map_err(|_| Error::Parse {
                text: t.to_string(),
                what: "integer",
            }),
    }
}

const CURRENCY_SYMBOLS: &[char] = &['$', '€', '£', '¥'];

/// Parses amounts such as `$22,731.10` into an exact decimal with at least
/// two fractional digits. Negative amounts are rejected.
pub fn parse_currency(text: &str) -> Result<Decimal> {
    let err = || Error::Parse {
        text: text.to_string(),
        what: "currency amount",
    };
    let t = text.trim();
    let t = t.strip_prefix(CURRENCY_SYMBOLS).unwrap_or(t);
    let digits: String = t.chars().filter(|&c| c != ',').collect();

    let (int_part, frac_part) = match digits.split_once('.') {
        Some((i, f)) => (i, Some(f)),
        None => (digits.as_str(), None),
    };
    let all_digits = |s: &str| s.bytes().all(|b| b.is_ascii_digit());
    if int_part.is_empty() || !all_digits(int_part) {
        return Err(err());
    }
    if let Some(f) = frac_part {
        if f.is_empty() || !all_digits(f) {
            return Err(err());
        }
    }
    let mut value = Decimal::from_str(&digits).map_err(|_| err())?;
    if value.scale() < 2 {
        value.rescale(2);
    }
    Ok(value)
}

/// Inverse of [`parse_currency`] for two-digit amounts: `$1,234,567.89`.
pub fn format_currency(value: Decimal) -> String {
    let mut v = value;
    v.rescale(2);
    let text = v.abs().to_string();
    let (int_part, frac_part) = text.split_once('.').unwrap_or((text.as_str(), "00"));
    let mut grouped = String::with_capacity(int_part.len() + int_part.len() / 3);
    for (i, c) in int_part.chars().enumerate() {
        if i > 0 && (int_part.len() - i) % 3 == 0 {
            grouped.push(',');
        }
        grouped.push(c);
    }
    let sign = if v.is_sign_negative() && !v.is_zero() { "-" } else { "" };
    format!("{sign}${grouped}.{frac_part}")
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UnmappedPolicy {
    Drop,
    #[default]
    KeepVerbatim,
}

/// Source-code to target-code mapping (e.g. one coding system to another).
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CodeCrosswalk {
    entries: BTreeMap<String, String>,
    pub unmapped_policy: UnmappedPolicy,
}

impl CodeCrosswalk {
    pub fn new(
        pairs: impl IntoIterator<Item = (String, String)>,
        unmapped_policy: UnmappedPolicy,
    ) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (src, dst) in pairs {
            let (src, dst) = (src.trim().to_string(), dst.trim().to_string());
            if src.is_empty() || dst.is_empty() {
                return Err(Error::Crosswalk(format!(
                    "empty code in mapping `{src}` -> `{dst}`"
                )));
            }
            match entries.get(&src) {
                Some(prev) if prev != &dst => {
                    return Err(Error::Crosswalk(format!(
                        "`{src}` maps to both `{prev}` and `{dst}`"
                    )))
                }
                _ => {
                    entries.insert(src, dst);
                }
            }
        }
        Ok(CodeCrosswalk {
            entries,
            unmapped_policy,
        })
    }

    /// Reads a two-column delimited file (source, target) with a header row.
    pub fn load(path: &Path, delimiter: char, unmapped_policy: UnmappedPolicy) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut rdr = csv::ReaderBuilder::new()
            .delimiter(delimiter as u8)
            .has_headers(true)
            .from_reader(file);
        let mut pairs = Vec::new();
        for record in rdr.records() {
            let record = record.map_err(|e| Error::Malformed {
                path: path.to_path_buf(),
                line: e.position().map(|p| p.line()).unwrap_or(0),
                message: e.to_string(),
            })?;
            if record.len() != 2 {
                return Err(Error::Malformed {
                    path: path.to_path_buf(),
                    line: record.position().map(|p| p.line()).unwrap_or(0),
                    message: format!("expected 2 columns, found {}", record.len()),
                });
            }
            pairs.push((record[0].to_string(), record[1].to_string()));
        }
        Self::new(pairs, unmapped_policy)
    }

    pub fn get(&self, code: &str) -> Option<&str> {
        self.entries.get(code).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Normalized {
    pub records: Vec<CleanRecord>,
    pub mapped: usize,
    pub dropped: usize,
}

/// Rewrites the feature at `code_index` through `crosswalk`.
pub fn normalize_codes(
    records: Vec<CleanRecord>,
    crosswalk: &CodeCrosswalk,
    code_index: usize,
) -> Normalized {
    let mut out = Normalized {
        records: Vec::with_capacity(records.len()),
        ..Default::default()
    };
    for mut rec in records {
        match crosswalk.get(&rec.features[code_index]) {
            Some(target) => {
                rec.features[code_index] = target.to_string();
                out.mapped += 1;
                out.records.push(rec);
            }
            None if crosswalk.unmapped_policy == UnmappedPolicy::KeepVerbatim => {
                out.records.push(rec)
            }
            None => out.dropped += 1,
        }
    }
    out
}

/// Cleaned records together with their schema.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub schema: DatasetSchema,
    pub records: Vec<CleanRecord>,
}

impl Dataset {
    /// Fails if no records are present or the baseline year never occurs.
    pub fn new(schema: DatasetSchema, records: Vec<CleanRecord>) -> Result<Self> {
        if records.is_empty() {
            return Err(Error::NoData);
        }
        if !records.iter().any(|r| r.year == schema.baseline_year) {
            return Err(Error::BaselineMissing(schema.baseline_year));
        }
        Ok(Dataset { schema, records })
    }

    pub fn feature_index(&self, name: &str) -> Result<usize> {
        self.schema
            .feature_index(name)
            .ok_or_else(|| Error::UnknownFeature(name.to_string()))
    }

    pub fn measure_index(&self, name: &str) -> Result<usize> {
        self.schema
            .measure_index(name)
            .ok_or_else(|| Error::UnknownMeasure(name.to_string()))
    }

    pub fn years(&self) -> Vec<i32> {
        let mut y: Vec<i32> = self.records.iter().map(|r| r.year).collect();
        y.sort_unstable();
        y.dedup();
        y
    }

    /// Distinct values per feature column, in schema order.
    pub fn cardinalities(&self) -> Vec<(String, usize)> {
        self.schema
            .feature_columns
            .iter()
            .enumerate()
            .map(|(i, name)| {
                let distinct: HashSet<&str> =
                    self.records.iter().map(|r| r.features[i].as_str()).collect();
                (name.clone(), distinct.len())
            })
            .collect()
    }
}

/// Summary of an ingest pass.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct IngestSummary {
    pub rows_read: usize,
    pub rows_kept: usize,
    pub rows_dropped: usize,
    pub codes_mapped: usize,
    pub codes_dropped: usize,
}

/// Load, clean and normalize every file in `paths` (concatenated in order).
pub fn ingest(
    paths: &[PathBuf],
    schema: &DatasetSchema,
    crosswalk: Option<&CodeCrosswalk>,
) -> Result<(Dataset, Cleaned, IngestSummary)> {
    schema.validate()?;
    let mut table: Option<RawTable> = None;
    for path in paths {
        let t = load_table(path, schema)?;
        match table.as_mut() {
            Some(acc) => acc.extend(t)?,
            None => table = Some(t),
        }
    }
    let table = table.ok_or(Error::NoData)?;
    let mut cleaned = clean(&table, schema)?;
    let mut summary = IngestSummary {
        rows_read: table.rows.len(),
        rows_dropped: cleaned.drop_count(),
        ..Default::default()
    };
    let mut records = std::mem::take(&mut cleaned.records);
    if let (Some(cw), Some(code)) = (crosswalk, schema.code_column.as_deref()) {
        let idx = schema
            .feature_index(code)
            .ok_or_else(|| Error::UnknownFeature(code.to_string()))?;
        let n = normalize_codes(records, cw, idx);
        summary.codes_mapped = n.mapped;
        summary.codes_dropped = n.dropped;
        records = n.records;
    }
    summary.rows_kept = records.len();
    let dataset = Dataset::new(schema.clone(), records)?;
    Ok((dataset, cleaned, summary))
}

/// Column-name keyed view of a record, mainly for display.
pub fn record_map<'a>(schema: &'a DatasetSchema, rec: &'a CleanRecord) -> HashMap<&'a str, &'a str> {
    schema
        .feature_columns
        .iter()
        .map(String::as_str)
        .zip(rec.features.iter().map(String::as_str))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn schema() -> DatasetSchema {
        DatasetSchema::new(
            vec!["Facility Name".into(), "Race".into()],
            "Discharge Year",
            2009,
        )
        .with_measure("Total Costs", MeasureKind::Currency)
    }

    fn read(text: &str, schema: &DatasetSchema) -> Result<RawTable> {
        read_table(text.as_bytes(), Path::new("mem.csv"), schema)
    }

    #[test]
    fn loads_two_rows() {
        let s = DatasetSchema::new(vec!["Facility Name".into()], "Discharge Year", 2009)
            .with_measure("Total Costs", MeasureKind::Currency);
        let t = read(
            "Facility Name,Discharge Year,Total Costs\nA,2009,\"$1,000.00\"\nB,2010,5\n",
            &s,
        )
        .unwrap();
        assert_eq!(t.rows.len(), 2);
        assert_eq!(t.rows[0].line, 2);
        assert_eq!(t.get(&t.rows[1], "Facility Name"), Some("B"));
    }

    #[test]
    fn missing_header_column_is_named() {
        let s = schema();
        let err = read("Facility Name,Race,Total Costs\nA,White,1\n", &s).unwrap_err();
        match err {
            Error::MissingColumn { column, .. } => assert_eq!(column, "Discharge Year"),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn ragged_line_reports_line_number() {
        let s = schema();
        let err = read(
            "Facility Name,Race,Discharge Year,Total Costs\nA,White,2009,1\nB,White,2009\n",
            &s,
        )
        .unwrap_err();
        match err {
            Error::Malformed { line, .. } => assert_eq!(line, 3),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn quoted_delimiter_survives() {
        let s = schema();
        let mut text = String::from("Facility Name,Race,Discharge Year,Total Costs\n");
        let mut expected = Vec::new();
        for i in 0..10 {
            let name = if i == 4 {
                "Mount Sinai, Queens".to_string()
            } else {
                format!("Hospital {i}")
            };
            let quoted = if name.contains(',') { format!("\"{name}\"") } else { name.clone() };
            text.push_str(&format!("{quoted},White,2009,\"$1,0{i}0.00\"\n"));
            expected.push(vec![
                name,
                "White".to_string(),
                "2009".to_string(),
                format!("$1,0{i}0.00"),
            ]);
        }
        let t = read(&text, &s).unwrap();
        let got: Vec<Vec<String>> = t.rows.iter().map(|r| r.fields.clone()).collect();
        assert_eq!(got, expected);
    }

    #[test]
    fn currency_examples() {
        assert_eq!(parse_currency("$22,731.10").unwrap(), Decimal::new(2273110, 2));
        let zero = parse_currency("0").unwrap();
        assert_eq!(zero, Decimal::ZERO);
        assert_eq!(zero.to_string(), "0.00");
        assert_eq!(
            parse_currency("$1,234,567.89").unwrap(),
            Decimal::from_str("1234567.89").unwrap()
        );
        for bad in ["", "$", "abc", "$12x", "1.2.3", "-5", "$$5", "1."] {
            assert!(parse_currency(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn clean_drops_missing_race_and_parses_costs() {
        let s = schema();
        let t = read(
            "Facility Name,Race,Discharge Year,Total Costs\n\
             A,,2009,$5.00\n\
             A,White,2009,\"$22,731.10\"\n\
             A,Unknown,2009,$1.00\n\
             A,White,20x9,$1.00\n\
             A,White,1850,$1.00\n\
             A,NA,2010,$1.00\n",
            &s,
        )
        .unwrap();
        let c = clean(&t, &s).unwrap();
        assert_eq!(c.drop_count(), 4);
        assert_eq!(c.records.len(), 2);
        assert_eq!(c.records[0].measures[0], Decimal::new(2273110, 2));
        assert_eq!(c.records[1].features[1], "Unknown");
        assert_eq!(c.dropped[0].reason, DropReason::MissingFeature("Race".into()));
        assert!(c.drop_log().starts_with("line 2: missing value in `Race`\n"));
    }

    #[test]
    fn clean_counts_injected_corruptions() {
        use rand::{Rng, SeedableRng};
        let s = schema();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let mut text = String::from("Facility Name,Race,Discharge Year,Total Costs\n");
        let corrupt: HashSet<usize> = rand::seq::index::sample(&mut rng, 100, 7).into_iter().collect();
        for i in 0..100 {
            let mut fields = [
                format!("H{}", i % 5),
                "White".to_string(),
                format!("{}", 2009 + i % 4),
                format!("${}.{:02}", rng.random_range(1..5000), i % 100),
            ];
            if corrupt.contains(&i) {
                let which = rng.random_range(0..4);
                fields[which] = match which {
                    2 => "year".into(),
                    3 => "$1.2.3".into(),
                    _ => String::new(),
                };
            }
            text.push_str(&fields.join(","));
            text.push('\n');
        }
        let c = clean(&read(&text, &s).unwrap(), &s).unwrap();
        assert_eq!(c.records.len(), 93);
        assert_eq!(c.drop_count(), 7);
        let dropped: HashSet<usize> = c.dropped.iter().map(|d| d.line as usize - 2).collect();
        assert_eq!(dropped, corrupt);
    }

    fn rerender(schema: &DatasetSchema, records: &[CleanRecord]) -> RawTable {
        let mut headers = schema.feature_columns.clone();
        headers.push(schema.year_column.clone());
        headers.extend(schema.measure_columns.iter().map(|m| m.name.clone()));
        RawTable {
            source: PathBuf::from("rerender"),
            headers,
            rows: records
                .iter()
                .map(|r| {
                    let mut f = r.features.clone();
                    f.push(r.year.to_string());
                    f.extend(r.measures.iter().map(|m| format_currency(*m)));
                    RawRow { line: r.line, fields: f }
                })
                .collect(),
        }
    }

    #[test]
    fn clean_is_idempotent() {
        let s = schema();
        let t = read(
            "Facility Name,Race,Discharge Year,Total Costs\nA,,2009,1\nB,White,2010,\"$3,000\"\nC,Black,2011,7.5\n",
            &s,
        )
        .unwrap();
        let first = clean(&t, &s).unwrap();
        let second = clean(&rerender(&s, &first.records), &s).unwrap();
        assert_eq!(second.drop_count(), 0);
        assert_eq!(second.records, first.records);
    }

    #[test]
    fn crosswalk_maps_and_drops() {
        let rec = |code: &str| CleanRecord {
            line: 0,
            features: vec![code.to_string()],
            year: 2009,
            measures: vec![],
        };
        let cw = CodeCrosswalk::new(
            [("003.0".to_string(), "A02.0".to_string())],
            UnmappedPolicy::KeepVerbatim,
        )
        .unwrap();
        let out = normalize_codes(vec![rec("003.0"), rec("999")], &cw, 0);
        assert_eq!(out.records[0].features[0], "A02.0");
        assert_eq!(out.records[1].features[0], "999");

        let empty = CodeCrosswalk::default();
        let input = vec![rec("1"), rec("2")];
        assert_eq!(normalize_codes(input.clone(), &empty, 0).records, input);

        // 20 of 50 records carry a mappable code.
        let cw = CodeCrosswalk::new(
            (0..5).map(|i| (format!("9{i}"), format!("X{i}"))),
            UnmappedPolicy::Drop,
        )
        .unwrap();
        let mut expected_mapped = 0;
        let records: Vec<_> = (0..50)
            .map(|i| {
                if i % 5 < 2 {
                    expected_mapped += 1;
                    rec(&format!("9{}", i % 5))
                } else {
                    rec(&format!("1{i}"))
                }
            })
            .collect();
        let out = normalize_codes(records, &cw, 0);
        assert_eq!(expected_mapped, 20);
        assert_eq!(out.mapped, 20);
        assert_eq!(out.records.len(), 20);
        assert_eq!(out.dropped, 30);
        assert!(out.records.iter().all(|r| r.features[0].starts_with('X')));
    }

    #[test]
    fn crosswalk_rejects_non_function() {
        let err = CodeCrosswalk::new(
            [("a".into(), "x".into()), ("a".into(), "y".into())],
            UnmappedPolicy::Drop,
        );
        assert!(err.is_err());
        assert!(CodeCrosswalk::new([("".into(), "x".into())], UnmappedPolicy::Drop).is_err());
    }

    #[test]
    fn schema_validation() {
        let mut s = schema();
        assert!(s.validate().is_ok());
        s.feature_columns.push("Discharge Year".into());
        assert!(s.validate().is_err());
        let s = DatasetSchema::new(vec![], "Y", 2009);
        assert!(s.validate().is_err());
        let s = DatasetSchema::new(vec!["a".into(), "a".into()], "Y", 2009);
        assert!(s.validate().is_err());
    }

    #[test]
    fn dataset_requires_baseline_year() {
        let rec = CleanRecord {
            line: 2,
            features: vec!["A".into(), "White".into()],
            year: 2010,
            measures: vec![Decimal::ONE],
        };
        assert!(matches!(
            Dataset::new(schema(), vec![rec]),
            Err(Error::BaselineMissing(2009))
        ));
        assert!(matches!(Dataset::new(schema(), vec![]), Err(Error::NoData)));
    }

    proptest! {
        #[test]
        fn currency_round_trip(cents in 0i64..1_000_000_000_000) {
            let d = Decimal::new(cents, 2);
            let text = format_currency(d);
            let parsed = parse_currency(&text).unwrap();
            prop_assert_eq!(parsed, d);
            prop_assert_eq!(format_currency(parsed), text);
        }

        #[test]
        fn keep_verbatim_preserves_count(codes in proptest::collection::vec(0u8..10, 0..40)) {
            let cw = CodeCrosswalk::new(
                [("1".to_string(), "one".to_string())],
                UnmappedPolicy::KeepVerbatim,
            ).unwrap();
            let recs: Vec<_> = codes.iter().map(|c| CleanRecord {
                line: 0, features: vec![c.to_string()], year: 2009, measures: vec![],
            }).collect();
            let n = recs.len();
            prop_assert_eq!(normalize_codes(recs.clone(), &cw, 0).records.len(), n);
            let cw = CodeCrosswalk { unmapped_policy: UnmappedPolicy::Drop, ..cw };
            let out = normalize_codes(recs, &cw, 0);
            prop_assert_eq!(out.records.len() + out.dropped, n);
        }
    }
}
