//! Row-selection predicates: the currency every modality uses to tell the
//! others what is selected.
//!
//! The JSON encoding is `{"field": f, "equal": v}`, `{"field": f, "range":
//! [lo, hi]}` (half-open, with `"inclusive": true` closing the top end),
//! `{"field": f, "oneOf": [...]}`, `{"and": [...]}`, and the literal `true`.

use std::fmt;

use schemars::JsonSchema;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::ingest::Dataset;
use crate::model::MeasureType;
use crate::value::{format_value, Value};

#[derive(Debug, Error, PartialEq)]
pub enum PredicateError {
    #[error("unknown field `{0}`")]
    UnknownField(String),
    #[error("empty range on `{0}`: lower bound must be below upper bound")]
    EmptyRange(String),
}

#[derive(Clone, Debug, PartialEq, Default)]
pub enum Predicate {
    #[default]
    True,
    Equal {
        field: String,
        value: Value,
    },
    /// `lo <= v < hi`, or `lo <= v <= hi` when `inclusive` is set.
    Range {
        field: String,
        lo: Value,
        hi: Value,
        inclusive: bool,
    },
    OneOf {
        field: String,
        values: Vec<Value>,
    },
    And(Vec<Predicate>),
}

impl Predicate {
    pub fn equal(field: impl Into<String>, value: impl Into<Value>) -> Self {
        Predicate::Equal {
            field: field.into(),
            value: value.into(),
        }
    }

    pub fn range(field: impl Into<String>, lo: impl Into<Value>, hi: impl Into<Value>) -> Self {
        Predicate::Range {
            field: field.into(),
            lo: lo.into(),
            hi: hi.into(),
            inclusive: false,
        }
    }

    pub fn range_inclusive(field: impl Into<String>, lo: impl Into<Value>, hi: impl Into<Value>) -> Self {
        Predicate::Range {
            field: field.into(),
            lo: lo.into(),
            hi: hi.into(),
            inclusive: true,
        }
    }

    pub fn one_of(field: impl Into<String>, values: Vec<Value>) -> Self {
        Predicate::OneOf {
            field: field.into(),
            values,
        }
    }

    pub fn is_true(&self) -> bool {
        match self {
            Predicate::True => true,
            Predicate::And(parts) => parts.iter().all(Predicate::is_true),
            _ => false,
        }
    }

    /// Conjunction with nested `And`s flattened and `True`s dropped.
    pub fn and(self, other: Predicate) -> Predicate {
        let mut parts = Vec::new();
        for p in [self, other] {
            match p {
                Predicate::True => {}
                Predicate::And(inner) => parts.extend(inner.into_iter().filter(|p| !p.is_true())),
                p => parts.push(p),
            }
        }
        let mut unique: Vec<Predicate> = Vec::with_capacity(parts.len());
        for p in parts {
            if !unique.contains(&p) {
                unique.push(p);
            }
        }
        match unique.len() {
            0 => Predicate::True,
            1 => unique.pop().expect("one element"),
            _ => Predicate::And(unique),
        }
    }

    pub fn all(parts: impl IntoIterator<Item = Predicate>) -> Predicate {
        parts.into_iter().fold(Predicate::True, Predicate::and)
    }

    /// Flattened list of the atomic constraints.
    pub fn atoms(&self) -> Vec<&Predicate> {
        match self {
            Predicate::True => Vec::new(),
            Predicate::And(parts) => parts.iter().flat_map(|p| p.atoms()).collect(),
            p => vec![p],
        }
    }

    pub fn field(&self) -> Option<&str> {
        match self {
            Predicate::Equal { field, .. } | Predicate::Range { field, .. } | Predicate::OneOf { field, .. } => {
                Some(field)
            }
            _ => None,
        }
    }

    /// Every field the predicate mentions.
    pub fn fields(&self) -> Vec<&str> {
        self.atoms().into_iter().filter_map(|p| p.field()).collect()
    }

    /// Checks field references and range bounds against a dataset.
    pub fn check(&self, dataset: &Dataset) -> Result<(), PredicateError> {
        for atom in self.atoms() {
            let field = atom.field().expect("atoms carry a field");
            let Some(ci) = dataset.column_index(field) else {
                return Err(PredicateError::UnknownField(field.to_string()));
            };
            if let Predicate::Range { lo, hi, inclusive, .. } = atom {
                let measure = dataset.columns[ci].measure_type.unwrap_or(MeasureType::Nominal);
                let ord = lo.compare_as(hi, measure);
                let empty = if *inclusive { ord.is_gt() } else { !ord.is_lt() };
                if empty {
                    return Err(PredicateError::EmptyRange(field.to_string()));
                }
            }
        }
        Ok(())
    }

    /// Evaluates against one row of `dataset`'s schema.
    pub fn evaluate(&self, row: &[Value], dataset: &Dataset) -> Result<bool, PredicateError> {
        let lookup = |field: &str| -> Result<(&Value, MeasureType), PredicateError> {
            let ci = dataset
                .column_index(field)
                .ok_or_else(|| PredicateError::UnknownField(field.to_string()))?;
            Ok((&row[ci], dataset.columns[ci].measure_type.unwrap_or(MeasureType::Nominal)))
        };
        Ok(match self {
            Predicate::True => true,
            Predicate::Equal { field, value } => {
                let (v, m) = lookup(field)?;
                v.equals_as(value, m)
            }
            Predicate::Range {
                field,
                lo,
                hi,
                inclusive,
            } => {
                let (v, m) = lookup(field)?;
                if v.is_null() {
                    false
                } else {
                    let above = !v.compare_as(lo, m).is_lt();
                    let below = match v.compare_as(hi, m) {
                        std::cmp::Ordering::Less => true,
                        std::cmp::Ordering::Equal => *inclusive,
                        std::cmp::Ordering::Greater => false,
                    };
                    above && below
                }
            }
            Predicate::OneOf { field, values } => {
                let (v, m) = lookup(field)?;
                values.iter().any(|x| v.equals_as(x, m))
            }
            Predicate::And(parts) => {
                for p in parts {
                    if !p.evaluate(row, dataset)? {
                        return Ok(false);
                    }
                }
                true
            }
        })
    }

    /// Resolves fields and operands once for repeated evaluation.
    pub fn compile(&self, dataset: &Dataset) -> Result<CompiledPredicate, PredicateError> {
        let column = |field: &str| -> Result<(usize, MeasureType), PredicateError> {
            let ci = dataset
                .column_index(field)
                .ok_or_else(|| PredicateError::UnknownField(field.to_string()))?;
            Ok((ci, dataset.columns[ci].measure_type.unwrap_or(MeasureType::Nominal)))
        };
        let operand = |v: &Value, m: MeasureType| Operand {
            ord: v.ordinal(m),
            value: v.clone(),
        };
        Ok(match self {
            Predicate::True => CompiledPredicate::True,
            Predicate::Equal { field, value } => {
                let (ci, m) = column(field)?;
                CompiledPredicate::OneOf(ci, m, vec![operand(value, m)])
            }
            Predicate::OneOf { field, values } => {
                let (ci, m) = column(field)?;
                CompiledPredicate::OneOf(ci, m, values.iter().map(|v| operand(v, m)).collect())
            }
            Predicate::Range {
                field,
                lo,
                hi,
                inclusive,
            } => {
                let (ci, m) = column(field)?;
                CompiledPredicate::Range(ci, m, operand(lo, m), operand(hi, m), *inclusive)
            }
            Predicate::And(parts) => {
                CompiledPredicate::And(parts.iter().map(|p| p.compile(dataset)).collect::<Result<_, _>>()?)
            }
        })
    }

    /// Short human-readable rendering, e.g. `symbol = AAPL and price in [0, 50)`.
    pub fn describe(&self, dataset: &Dataset) -> String {
        match self {
            Predicate::True => "everything".to_string(),
            Predicate::Equal { field, value } => {
                format!("{field} = {}", format_value(value, dataset.measure_type(field)))
            }
            Predicate::Range {
                field,
                lo,
                hi,
                inclusive,
            } => {
                let m = dataset.measure_type(field);
                let close = if *inclusive { ']' } else { ')' };
                format!("{field} in [{}, {}{close}", format_value(lo, m), format_value(hi, m))
            }
            Predicate::OneOf { field, values } => {
                let m = dataset.measure_type(field);
                let vs: Vec<String> = values.iter().map(|v| format_value(v, m)).collect();
                format!("{field} in {{{}}}", vs.join(", "))
            }
            Predicate::And(parts) => parts.iter().map(|p| p.describe(dataset)).collect::<Vec<_>>().join(" and "),
        }
    }
}

impl fmt::Display for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&serde_json::to_string(self).map_err(|_| fmt::Error)?)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum Wire {
    True(bool),
    Equal {
        field: String,
        equal: Value,
    },
    Range {
        field: String,
        range: (Value, Value),
        #[serde(default, skip_serializing_if = "std::ops::Not::not")]
        inclusive: bool,
    },
    OneOf {
        field: String,
        #[serde(rename = "oneOf")]
        one_of: Vec<Value>,
    },
    And {
        and: Vec<Predicate>,
    },
}

impl Serialize for Predicate {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let wire = match self.clone() {
            Predicate::True => Wire::True(true),
            Predicate::Equal { field, value } => Wire::Equal { field, equal: value },
            Predicate::Range {
                field,
                lo,
                hi,
                inclusive,
            } => Wire::Range {
                field,
                range: (lo, hi),
                inclusive,
            },
            Predicate::OneOf { field, values } => Wire::OneOf { field, one_of: values },
            Predicate::And(and) => Wire::And { and },
        };
        wire.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Predicate {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        Ok(match Wire::deserialize(deserializer)? {
            Wire::True(true) => Predicate::True,
            Wire::True(false) => return Err(serde::de::Error::custom("`false` is not a selection")),
            Wire::Equal { field, equal } => Predicate::Equal { field, value: equal },
            Wire::Range {
                field,
                range: (lo, hi),
                inclusive,
            } => Predicate::Range {
                field,
                lo,
                hi,
                inclusive,
            },
            Wire::OneOf { field, one_of } => Predicate::OneOf { field, values: one_of },
            Wire::And { and } => Predicate::And(and),
        })
    }
}

impl JsonSchema for Predicate {
    fn schema_name() -> String {
        "Predicate".to_string()
    }

    fn json_schema(gen: &mut schemars::gen::SchemaGenerator) -> schemars::schema::Schema {
        #[allow(dead_code)]
        #[derive(JsonSchema)]
        #[serde(deny_unknown_fields)]
        struct Equal {
            field: String,
            equal: Value,
        }
        #[allow(dead_code)]
        #[derive(JsonSchema)]
        #[serde(deny_unknown_fields)]
        struct Range {
            field: String,
            range: (Value, Value),
            #[serde(default)]
            inclusive: bool,
        }
        #[allow(dead_code)]
        #[derive(JsonSchema)]
        #[serde(deny_unknown_fields)]
        struct OneOf {
            field: String,
            #[serde(rename = "oneOf")]
            one_of: Vec<Value>,
        }
        #[allow(dead_code)]
        #[derive(JsonSchema)]
        #[serde(deny_unknown_fields)]
        struct And {
            and: Vec<Predicate>,
        }
        let mut schema = schemars::schema::SchemaObject::default();
        schema.subschemas().any_of = Some(vec![
            schemars::schema::SchemaObject {
                const_value: Some(serde_json::Value::Bool(true)),
                ..Default::default()
            }
            .into(),
            gen.subschema_for::<Equal>(),
            gen.subschema_for::<Range>(),
            gen.subschema_for::<OneOf>(),
            gen.subschema_for::<And>(),
        ]);
        schema.into()
    }
}

/// Which representation an interaction came from or is aimed at.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "lowercase")]
pub enum Modality {
    Visual,
    Text,
    Audio,
}

impl Modality {
    pub const ALL: [Modality; 3] = [Modality::Visual, Modality::Text, Modality::Audio];

    pub fn as_str(self) -> &'static str {
        match self {
            Modality::Visual => "visual",
            Modality::Text => "text",
            Modality::Audio => "audio",
        }
    }
}

impl fmt::Display for Modality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A selection emitted by one modality for the others to reify.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct SyncMessage {
    pub source: Modality,
    pub predicate: Predicate,
}


#[derive(Clone, Debug)]
pub struct Operand {
    value: Value,
    ord: Option<f64>,
}

/// A predicate bound to a dataset's columns; agrees with
/// [`Predicate::evaluate`].
#[derive(Clone, Debug)]
pub enum CompiledPredicate {
    True,
    #[doc(hidden)]
    OneOf(usize, MeasureType, Vec<Operand>),
    #[doc(hidden)]
    Range(usize, MeasureType, Operand, Operand, bool),
    And(Vec<CompiledPredicate>),
}

fn same_text(a: &Value, b: &Value) -> bool {
    match (a, b) {
        (Value::Text(x), Value::Text(y)) => x == y,
        _ => a.to_string() == b.to_string(),
    }
}

fn order_text(a: &Value, b: &Value) -> std::cmp::Ordering {
    match (a, b) {
        (Value::Text(x), Value::Text(y)) => x.cmp(y),
        _ => a.to_string().cmp(&b.to_string()),
    }
}

impl CompiledPredicate {
    pub fn test(&self, row: &[Value]) -> bool {
        match self {
            CompiledPredicate::True => true,
            CompiledPredicate::OneOf(ci, m, ops) => {
                let v = &row[*ci];
                if v.is_null() {
                    return ops.iter().any(|o| o.value.is_null());
                }
                let ord = if m.is_continuous() { v.ordinal(*m) } else { None };
                ops.iter().any(|o| {
                    if o.value.is_null() {
                        return false;
                    }
                    match (ord, o.ord) {
                        (Some(a), Some(b)) => a == b,
                        _ => same_text(v, &o.value),
                    }
                })
            }
            CompiledPredicate::Range(ci, m, lo, hi, inclusive) => {
                let v = &row[*ci];
                if v.is_null() {
                    return false;
                }
                let ord = v.ordinal(*m);
                let cmp = |o: &Operand| {
                    if o.value.is_null() {
                        return std::cmp::Ordering::Less;
                    }
                    match (ord, o.ord) {
                        (Some(a), Some(b)) => a.total_cmp(&b),
                        _ => order_text(v, &o.value),
                    }
                };
                let above = !cmp(lo).is_lt();
                let below = match cmp(hi) {
                    std::cmp::Ordering::Less => true,
                    std::cmp::Ordering::Equal => *inclusive,
                    std::cmp::Ordering::Greater => false,
                };
                above && below
            }
            CompiledPredicate::And(parts) => parts.iter().all(|p| p.test(row)),
        }
    }
}
