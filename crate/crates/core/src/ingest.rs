//! Tabular data: loading, measure-type inference, and composite-key search.

use std::collections::{BTreeMap, HashMap, HashSet};

use schemars::JsonSchema;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::MeasureType;
use crate::predicate::{Predicate, PredicateError};
use crate::value::{as_year, parse_iso, Value};

/// Largest composite key the search will consider.
pub const MAX_KEY_SIZE: usize = 4;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("parse error at line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error("ragged rows: line {line} has {found} cells, expected {expected}")]
    Ragged { line: u64, expected: usize, found: usize },
    #[error("unknown column `{0}`")]
    UnknownColumn(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "kebab-case")]
pub enum DataFormat {
    Csv,
    JsonRecords,
}

impl DataFormat {
    /// Guesses the format from a file name.
    pub fn from_path(path: &str) -> DataFormat {
        if path.to_ascii_lowercase().ends_with(".json") {
            DataFormat::JsonRecords
        } else {
            DataFormat::Csv
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct Column {
    pub name: String,
    /// `None` until types are inferred or assigned.
    #[serde(rename = "type", default, skip_serializing_if = "Option::is_none")]
    pub measure_type: Option<MeasureType>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct Dataset {
    pub columns: Vec<Column>,
    pub rows: Vec<Vec<Value>>,
    #[serde(default)]
    pub key: Vec<String>,
}

impl Dataset {
    /// Loads and assigns inferred measure types in one step.
    pub fn load_typed(bytes: &[u8], format: DataFormat) -> Result<Dataset, IngestError> {
        let mut ds = load_dataset(bytes, format)?;
        let types = infer_types(&ds);
        ds.assign_types(&types);
        Ok(ds)
    }

    pub fn assign_types(&mut self, types: &BTreeMap<String, MeasureType>) {
        for c in &mut self.columns {
            if let Some(t) = types.get(&c.name) {
                c.measure_type = Some(*t);
            }
        }
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    pub fn column_names(&self) -> Vec<&str> {
        self.columns.iter().map(|c| c.name.as_str()).collect()
    }

    /// Assigned measure type, nominal when none has been assigned.
    pub fn measure_type(&self, name: &str) -> MeasureType {
        self.column_index(name)
            .and_then(|i| self.columns[i].measure_type)
            .unwrap_or(MeasureType::Nominal)
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn value(&self, row: usize, column: usize) -> &Value {
        &self.rows[row][column]
    }

    /// Indices of rows matching `predicate`.
    pub fn matching_rows(&self, predicate: &Predicate) -> Result<Vec<usize>, PredicateError> {
        let compiled = predicate.compile(self)?;
        Ok((0..self.rows.len()).filter(|&i| compiled.test(&self.rows[i])).collect())
    }

    /// Distinct non-null values of a column in first-appearance order.
    pub fn distinct_values(&self, column: usize, rows: impl IntoIterator<Item = usize>) -> Vec<Value> {
        let mut seen = HashSet::new();
        let mut out = Vec::new();
        for r in rows {
            let v = &self.rows[r][column];
            if !v.is_null() && seen.insert(v.canonical()) {
                out.push(v.clone());
            }
        }
        out
    }

    /// Distinct values in domain order: ascending for continuous types,
    /// first appearance in the dataset for nominal and ordinal.
    pub fn domain(&self, column: usize) -> Vec<Value> {
        let mut values = self.distinct_values(column, 0..self.len());
        let measure = self.columns[column].measure_type.unwrap_or(MeasureType::Nominal);
        if measure.is_continuous() {
            values.sort_by(|a, b| a.compare_as(b, measure));
        }
        values
    }

    /// Min and max of a continuous column over the given rows.
    pub fn extent(&self, column: usize, rows: impl IntoIterator<Item = usize>) -> Option<(f64, f64)> {
        let measure = self.columns[column].measure_type.unwrap_or(MeasureType::Nominal);
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for r in rows {
            if let Some(x) = self.rows[r][column].ordinal(measure) {
                lo = lo.min(x);
                hi = hi.max(x);
            }
        }
        (lo <= hi).then_some((lo, hi))
    }

    /// Numeric values of a column over the given rows, nulls skipped.
    pub fn numbers(&self, column: usize, rows: &[usize]) -> Vec<f64> {
        rows.iter().filter_map(|&r| self.rows[r][column].as_f64()).collect()
    }

    /// Keeps only the named columns, in dataset order.
    pub fn project(&self, names: &[String]) -> Dataset {
        let keep: Vec<usize> = (0..self.columns.len())
            .filter(|&i| names.contains(&self.columns[i].name))
            .collect();
        Dataset {
            columns: keep.iter().map(|&i| self.columns[i].clone()).collect(),
            rows: self
                .rows
                .iter()
                .map(|r| keep.iter().map(|&i| r[i].clone()).collect())
                .collect(),
            key: self.key.iter().filter(|k| names.contains(k)).cloned().collect(),
        }
    }
}

fn cell_from_text(text: &str) -> Value {
    let t = text.trim();
    if t.is_empty() {
        return Value::Null;
    }
    match t.parse::<f64>() {
        Ok(n) if n.is_finite() => Value::Number(n),
        _ => Value::Text(text.to_string()),
    }
}

fn cell_from_json(v: &serde_json::Value) -> Value {
    match v {
        serde_json::Value::Null => Value::Null,
        serde_json::Value::Bool(b) => Value::Text(b.to_string()),
        serde_json::Value::Number(n) => n.as_f64().map(Value::Number).unwrap_or(Value::Null),
        serde_json::Value::String(s) => Value::Text(s.clone()),
        other => Value::Text(other.to_string()),
    }
}

/// Parses CSV (RFC 4180, header row required) or a JSON array of flat
/// records. Column types are left unassigned.
pub fn load_dataset(bytes: &[u8], format: DataFormat) -> Result<Dataset, IngestError> {
    match format {
        DataFormat::Csv => load_csv(bytes),
        DataFormat::JsonRecords => load_json(bytes),
    }
}

fn load_csv(bytes: &[u8]) -> Result<Dataset, IngestError> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).flexible(true).from_reader(bytes);
    let csv_error = |e: csv::Error| {
        let line = e.position().map(|p| p.line()).unwrap_or(0);
        IngestError::Parse {
            line,
            message: e.to_string(),
        }
    };
    let headers = reader.headers().map_err(csv_error)?.clone();
    let columns: Vec<Column> = headers
        .iter()
        .map(|h| Column {
            name: h.trim().to_string(),
            measure_type: None,
        })
        .collect();
    if columns.is_empty() || columns.iter().all(|c| c.name.is_empty()) {
        return Err(IngestError::Parse {
            line: 1,
            message: "missing header row".into(),
        });
    }
    let mut seen = HashSet::new();
    for c in &columns {
        if !seen.insert(c.name.as_str()) {
            return Err(IngestError::Parse {
                line: 1,
                message: format!("duplicate column `{}`", c.name),
            });
        }
    }
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(csv_error)?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        if record.len() != columns.len() {
            return Err(IngestError::Ragged {
                line,
                expected: columns.len(),
                found: record.len(),
            });
        }
        rows.push(record.iter().map(cell_from_text).collect());
    }
    Ok(Dataset {
        columns,
        rows,
        key: Vec::new(),
    })
}

fn load_json(bytes: &[u8]) -> Result<Dataset, IngestError> {
    let parsed: serde_json::Value = serde_json::from_slice(bytes).map_err(|e| IngestError::Parse {
        line: e.line() as u64,
        message: e.to_string(),
    })?;
    let serde_json::Value::Array(records) = parsed else {
        return Err(IngestError::Parse {
            line: 1,
            message: "expected an array of records".into(),
        });
    };
    let mut names: Vec<String> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    for (i, rec) in records.iter().enumerate() {
        let serde_json::Value::Object(map) = rec else {
            return Err(IngestError::Parse {
                line: 1,
                message: format!("record {i} is not an object"),
            });
        };
        for k in map.keys() {
            if !index.contains_key(k) {
                index.insert(k.clone(), names.len());
                names.push(k.clone());
            }
        }
    }
    let rows = records
        .iter()
        .map(|rec| {
            let map = rec.as_object().expect("checked above");
            names
                .iter()
                .map(|n| map.get(n).map(cell_from_json).unwrap_or(Value::Null))
                .collect()
        })
        .collect();
    Ok(Dataset {
        columns: names
            .into_iter()
            .map(|name| Column {
                name,
                measure_type: None,
            })
            .collect(),
        rows,
        key: Vec::new(),
    })
}

/// Classifies one column's non-null values.
///
/// Bare years count as temporal before the numeric check runs, so a column
/// of years is never read as a measure.
pub fn infer_column_type<'a>(values: impl IntoIterator<Item = &'a Value>) -> MeasureType {
    let mut any = false;
    let (mut all_years, mut all_numbers, mut all_dates) = (true, true, true);
    for v in values {
        if v.is_null() {
            continue;
        }
        any = true;
        let year = as_year(v).is_some();
        all_years &= year;
        all_numbers &= v.as_f64().is_some();
        all_dates &= year || matches!(v, Value::Text(s) if parse_iso(s).is_some());
        if !all_years && !all_numbers && !all_dates {
            break;
        }
    }
    if !any {
        MeasureType::Nominal
    } else if all_years {
        MeasureType::Temporal
    } else if all_numbers {
        MeasureType::Quantitative
    } else if all_dates {
        MeasureType::Temporal
    } else {
        MeasureType::Nominal
    }
}

pub fn infer_types(dataset: &Dataset) -> BTreeMap<String, MeasureType> {
    dataset
        .columns
        .iter()
        .enumerate()
        .map(|(i, c)| (c.name.clone(), infer_column_type(dataset.rows.iter().map(|r| &r[i]))))
        .collect()
}

/// A unique column subset and its tie-break score (product of distinct
/// counts; smaller is better).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KeyCandidate {
    pub fields: Vec<String>,
    pub score: u128,
}

fn is_unique(dataset: &Dataset, columns: &[usize]) -> bool {
    let mut seen = HashSet::with_capacity(dataset.len());
    for row in &dataset.rows {
        let mut tuple = String::new();
        for &c in columns {
            let v = &row[c];
            if v.is_null() {
                return false;
            }
            tuple.push_str(&v.canonical());
            tuple.push('\u{1f}');
        }
        if !seen.insert(tuple) {
            return false;
        }
    }
    true
}

fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            if n - i < k - cur.len() {
                break;
            }
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, k, &mut Vec::new(), &mut out);
    out
}

/// All minimum-cardinality unique subsets of the selected temporal and
/// nominal columns, best first.
pub fn key_candidates(dataset: &Dataset, selected: &[String]) -> Vec<KeyCandidate> {
    let candidates: Vec<usize> = (0..dataset.columns.len())
        .filter(|&i| {
            let c = &dataset.columns[i];
            selected.contains(&c.name) && !matches!(c.measure_type, Some(MeasureType::Quantitative))
        })
        .collect();
    if dataset.is_empty() || candidates.is_empty() {
        return Vec::new();
    }
    let distinct: HashMap<usize, u128> = candidates
        .iter()
        .map(|&c| (c, dataset.distinct_values(c, 0..dataset.len()).len() as u128))
        .collect();
    for size in 1..=MAX_KEY_SIZE.min(candidates.len()) {
        let mut found: Vec<(Vec<usize>, u128)> = combinations(candidates.len(), size)
            .into_iter()
            .map(|combo| combo.into_iter().map(|i| candidates[i]).collect::<Vec<_>>())
            .filter(|cols| is_unique(dataset, cols))
            .map(|cols| {
                let score = cols.iter().map(|c| distinct[c]).product();
                (cols, score)
            })
            .collect();
        if !found.is_empty() {
            found.sort_by(|a, b| a.1.cmp(&b.1).then_with(|| a.0.cmp(&b.0)));
            return found
                .into_iter()
                .map(|(cols, score)| KeyCandidate {
                    fields: cols.iter().map(|&c| dataset.columns[c].name.clone()).collect(),
                    score,
                })
                .collect();
        }
    }
    Vec::new()
}

/// The best minimal composite key among the selected temporal and nominal
/// columns, in column order; empty when none of size at most
/// [`MAX_KEY_SIZE`] exists.
pub fn infer_key(dataset: &Dataset, selected: &[String]) -> Vec<String> {
    key_candidates(dataset, selected)
        .into_iter()
        .next()
        .map(|c| c.fields)
        .unwrap_or_default()
}
