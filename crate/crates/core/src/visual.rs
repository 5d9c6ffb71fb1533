//! Compiles visual units to a Vega-Lite document and reifies predicates as
//! conditional opacity.

use chrono::{Datelike, NaiveDate, NaiveDateTime, Timelike};
use serde_json::{json, Map, Value as Json};
use thiserror::Error;

use crate::ingest::Dataset;
use crate::model::{
    validate, Aggregate, Channel, CompositionOp, MeasureType, MultimodalSpec, ValidationReport, VisualUnitSpec,
};
use crate::predicate::Predicate;
use crate::scale::{nice, ticks, time_nice, time_ticks, TimeInterval};
use crate::value::{format_number, instant_from_millis, parse_instant, Value};

pub const SCHEMA_URL: &str = "https://vega.github.io/schema/vega-lite/v5.23.0.json";
pub const FACET_COLUMNS: u32 = 4;
pub const EMPHASIZED_OPACITY: f64 = 1.0;
pub const MUTED_OPACITY: f64 = 0.3;
/// Default continuous axis length in pixels; Vega-Lite aims for one tick
/// per 40 pixels.
const AXIS_LENGTH: f64 = 200.0;

#[derive(Debug, Error)]
pub enum VisualError {
    #[error("spec has no visual units")]
    NoVisualUnits,
    #[error("invalid spec:\n{0}")]
    InvalidSpec(ValidationReport),
}

fn cell_json(value: &Value, measure: MeasureType) -> Json {
    match value {
        Value::Null => Json::Null,
        // Bare years go out as text so the renderer parses them as dates,
        // not as millisecond timestamps.
        Value::Number(n) if measure == MeasureType::Temporal => Json::String(format_number(*n)),
        Value::Number(n) => json!(n),
        Value::Text(s) => Json::String(s.clone()),
    }
}

fn data_values(spec: &MultimodalSpec, dataset: &Dataset) -> Json {
    let cols: Vec<(usize, &str, MeasureType)> = spec
        .fields
        .iter()
        .filter_map(|f| dataset.column_index(&f.name).map(|ci| (ci, f.name.as_str(), f.measure_type)))
        .collect();
    let rows: Vec<Json> = dataset
        .rows
        .iter()
        .map(|row| {
            let mut obj = Map::new();
            for (ci, name, m) in &cols {
                obj.insert(name.to_string(), cell_json(&row[*ci], *m));
            }
            Json::Object(obj)
        })
        .collect();
    json!({ "values": rows })
}

fn aggregate_name(a: Aggregate) -> &'static str {
    a.as_str()
}

fn encoding_json(spec: &MultimodalSpec, unit: &VisualUnitSpec) -> Json {
    let mut enc = Map::new();
    for (channel, e) in &unit.encoding {
        if *channel == Channel::Facet {
            continue;
        }
        let measure = spec.measure_type(&e.field).unwrap_or(MeasureType::Nominal);
        let mut def = Map::new();
        def.insert("field".into(), json!(e.field));
        def.insert("type".into(), json!(measure.as_str()));
        let t = spec.effective_transform(e);
        if let Some(a) = t.aggregate {
            def.insert("aggregate".into(), json!(aggregate_name(a)));
        }
        if let Some(b) = t.bin {
            if measure.is_continuous() {
                def.insert(
                    "bin".into(),
                    match b.count {
                        Some(n) => json!({ "maxbins": n }),
                        None => json!(true),
                    },
                );
            }
        }
        enc.insert(channel.as_str().to_string(), Json::Object(def));
    }
    Json::Object(enc)
}

fn brush_param(name: &str) -> Json {
    json!({
        "name": name,
        "select": { "type": "interval", "encodings": ["x", "y"] }
    })
}

fn unit_json(spec: &MultimodalSpec, unit: &VisualUnitSpec, brush: Option<&str>) -> Json {
    let mut obj = Map::new();
    obj.insert("mark".into(), json!({ "type": unit.mark.as_str(), "tooltip": true }));
    obj.insert("encoding".into(), encoding_json(spec, unit));
    if let Some(name) = brush {
        obj.insert("params".into(), json!([brush_param(name)]));
    }
    Json::Object(obj)
}

fn facet_def(spec: &MultimodalSpec, unit: &VisualUnitSpec) -> Option<Json> {
    let e = unit.encoding.get(&Channel::Facet)?;
    let measure = spec.measure_type(&e.field).unwrap_or(MeasureType::Nominal);
    Some(json!({ "field": e.field, "type": measure.as_str() }))
}

fn wrap_facet(facet: Json, inner: Json) -> Json {
    json!({ "facet": facet, "columns": FACET_COLUMNS, "spec": inner })
}

/// Compiles the visual units of `spec`. A facet channel becomes a facet
/// operator wrapping the unit, and every view carries an interval brush.
pub fn compile_visual(spec: &MultimodalSpec, dataset: &Dataset) -> Result<Json, VisualError> {
    let report = validate(spec);
    if !report.is_valid() {
        return Err(VisualError::InvalidSpec(report));
    }
    if spec.visual.is_empty() {
        return Err(VisualError::NoVisualUnits);
    }
    let mut top = Map::new();
    top.insert("$schema".into(), json!(SCHEMA_URL));
    top.insert("data".into(), data_values(spec, dataset));

    let body = match (spec.visual.as_slice(), spec.composition.visual) {
        ([unit], _) => {
            let u = unit_json(spec, unit, Some("brush"));
            match facet_def(spec, unit) {
                Some(f) => wrap_facet(f, u),
                None => u,
            }
        }
        (units, CompositionOp::Layer) => {
            // One brush per view: only the first layer declares it.
            let layer: Vec<Json> = units
                .iter()
                .enumerate()
                .map(|(i, u)| unit_json(spec, u, (i == 0).then_some("brush")))
                .collect();
            let inner = json!({ "layer": layer });
            match units.iter().find_map(|u| facet_def(spec, u)) {
                Some(f) => wrap_facet(f, inner),
                None => inner,
            }
        }
        (units, CompositionOp::Concat) => {
            let views: Vec<Json> = units
                .iter()
                .enumerate()
                .map(|(i, u)| {
                    let name = format!("brush_{i}");
                    let v = unit_json(spec, u, Some(&name));
                    match facet_def(spec, u) {
                        Some(f) => wrap_facet(f, v),
                        None => v,
                    }
                })
                .collect();
            json!({ "vconcat": views })
        }
    };
    if let Json::Object(m) = body {
        top.extend(m);
    }
    Ok(Json::Object(top))
}

fn datetime_json(ms: f64) -> Json {
    match instant_from_millis(ms) {
        Some(dt) => {
            let mut o = Map::new();
            o.insert("year".into(), json!(dt.year()));
            o.insert("month".into(), json!(dt.month()));
            o.insert("date".into(), json!(dt.day()));
            if dt.hour() != 0 || dt.minute() != 0 || dt.second() != 0 || dt.nanosecond() != 0 {
                o.insert("hours".into(), json!(dt.hour()));
                o.insert("minutes".into(), json!(dt.minute()));
                o.insert("seconds".into(), json!(dt.second()));
                o.insert("milliseconds".into(), json!(dt.nanosecond() / 1_000_000));
            }
            o.insert("utc".into(), json!(true));
            Json::Object(o)
        }
        None => json!(ms),
    }
}

fn operand(value: &Value, measure: MeasureType) -> Json {
    if measure == MeasureType::Temporal {
        if let Some(ms) = value.as_instant() {
            return datetime_json(ms);
        }
    }
    match value {
        Value::Null => Json::Null,
        Value::Number(n) => json!(n),
        Value::Text(s) => match measure {
            MeasureType::Quantitative => s.parse::<f64>().map(|n| json!(n)).unwrap_or(json!(s)),
            _ => json!(s),
        },
    }
}

/// The predicate as a Vega-Lite test.
pub fn predicate_test(predicate: &Predicate, dataset: &Dataset) -> Json {
    match predicate {
        Predicate::True => json!("true"),
        Predicate::Equal { field, value } => {
            json!({ "field": field, "equal": operand(value, dataset.measure_type(field)) })
        }
        Predicate::Range {
            field,
            lo,
            hi,
            inclusive,
        } => {
            let m = dataset.measure_type(field);
            let top = if *inclusive { "lte" } else { "lt" };
            json!({ "and": [
                { "field": field, "gte": operand(lo, m) },
                { "field": field, top: operand(hi, m) },
            ]})
        }
        Predicate::OneOf { field, values } => {
            let m = dataset.measure_type(field);
            json!({ "field": field, "oneOf": values.iter().map(|v| operand(v, m)).collect::<Vec<_>>() })
        }
        Predicate::And(parts) => {
            json!({ "and": parts.iter().map(|p| predicate_test(p, dataset)).collect::<Vec<_>>() })
        }
    }
}

fn for_each_unit(doc: &mut Json, f: &mut dyn FnMut(&mut Map<String, Json>)) {
    match doc {
        Json::Object(obj) => {
            if obj.contains_key("mark") {
                f(obj);
                return;
            }
            for key in ["spec", "layer", "vconcat", "hconcat", "concat"] {
                if let Some(child) = obj.get_mut(key) {
                    for_each_unit(child, f);
                }
            }
        }
        Json::Array(items) => {
            for item in items {
                for_each_unit(item, f);
            }
        }
        _ => {}
    }
}

/// Adds (or replaces) a conditional opacity on every unit: rows passing the
/// predicate keep full opacity, the rest are muted.
pub fn apply_highlight(doc: &Json, predicate: &Predicate, dataset: &Dataset) -> Json {
    let test = predicate_test(predicate, dataset);
    let mut out = doc.clone();
    for_each_unit(&mut out, &mut |unit| {
        let enc = unit.entry("encoding").or_insert_with(|| json!({}));
        if let Json::Object(enc) = enc {
            enc.insert(
                "opacity".into(),
                json!({
                    "condition": { "test": test.clone(), "value": EMPHASIZED_OPACITY },
                    "value": MUTED_OPACITY
                }),
            );
        }
    });
    out
}

/// The highlight test currently applied to the document, if any.
pub fn highlight_test(doc: &Json) -> Option<Json> {
    let mut found = None;
    let mut doc = doc.clone();
    for_each_unit(&mut doc, &mut |unit| {
        if found.is_none() {
            found = unit
                .get("encoding")
                .and_then(|e| e.get("opacity"))
                .and_then(|o| o.get("condition"))
                .and_then(|c| c.get("test"))
                .cloned();
        }
    });
    found
}

// Independent reading of the emitted test against the document's own data.

fn datum_instant(v: &Json) -> Option<f64> {
    let text = match v {
        Json::String(s) => s.clone(),
        Json::Number(n) => {
            let x = n.as_f64()?;
            if x.fract() == 0.0 && (1000.0..3000.0).contains(&x) {
                format!("{}", x as i64)
            } else {
                return Some(x);
            }
        }
        _ => return None,
    };
    let dt: NaiveDateTime = if text.len() == 4 && text.bytes().all(|b| b.is_ascii_digit()) {
        NaiveDate::from_ymd_opt(text.parse().ok()?, 1, 1)?.and_hms_opt(0, 0, 0)?
    } else {
        parse_instant(&Value::Text(text))?
    };
    Some(dt.and_utc().timestamp_millis() as f64)
}

fn operand_instant(v: &Json) -> Option<f64> {
    let o = v.as_object()?;
    let get = |k: &str, d: i64| o.get(k).and_then(Json::as_i64).unwrap_or(d);
    let date = NaiveDate::from_ymd_opt(get("year", 1970) as i32, get("month", 1) as u32, get("date", 1) as u32)?;
    let dt = date.and_hms_milli_opt(
        get("hours", 0) as u32,
        get("minutes", 0) as u32,
        get("seconds", 0) as u32,
        get("milliseconds", 0) as u32,
    )?;
    Some(dt.and_utc().timestamp_millis() as f64)
}

/// Compares a datum to an operand: dates as instants, numbers numerically,
/// anything else as text.
fn compare(datum: &Json, op: &Json) -> Option<std::cmp::Ordering> {
    if datum.is_null() {
        return None;
    }
    if op.is_object() {
        return datum_instant(datum)?.partial_cmp(&operand_instant(op)?);
    }
    match (datum, op) {
        (Json::Number(a), Json::Number(b)) => a.as_f64()?.partial_cmp(&b.as_f64()?),
        (Json::String(a), Json::Number(b)) => a.parse::<f64>().ok()?.partial_cmp(&b.as_f64()?),
        (a, b) => {
            let text = |v: &Json| match v {
                Json::String(s) => s.clone(),
                other => other.to_string(),
            };
            Some(text(a).cmp(&text(b)))
        }
    }
}

/// Evaluates a Vega-Lite field predicate or logical composition on a datum.
pub fn eval_test(test: &Json, datum: &Json) -> bool {
    match test {
        Json::String(expr) => expr.trim() == "true",
        Json::Bool(b) => *b,
        Json::Object(o) => {
            if let Some(parts) = o.get("and").and_then(Json::as_array) {
                return parts.iter().all(|p| eval_test(p, datum));
            }
            if let Some(parts) = o.get("or").and_then(Json::as_array) {
                return parts.iter().any(|p| eval_test(p, datum));
            }
            if let Some(inner) = o.get("not") {
                return !eval_test(inner, datum);
            }
            let Some(field) = o.get("field").and_then(Json::as_str) else {
                return false;
            };
            let v = datum.get(field).unwrap_or(&Json::Null);
            use std::cmp::Ordering::*;
            let mut ok = true;
            if let Some(op) = o.get("equal") {
                ok &= compare(v, op) == Some(Equal);
            }
            if let Some(ops) = o.get("oneOf").and_then(Json::as_array) {
                ok &= ops.iter().any(|op| compare(v, op) == Some(Equal));
            }
            if let Some(op) = o.get("gte") {
                ok &= matches!(compare(v, op), Some(Greater | Equal));
            }
            if let Some(op) = o.get("gt") {
                ok &= compare(v, op) == Some(Greater);
            }
            if let Some(op) = o.get("lt") {
                ok &= compare(v, op) == Some(Less);
            }
            if let Some(op) = o.get("lte") {
                ok &= matches!(compare(v, op), Some(Less | Equal));
            }
            ok
        }
        _ => false,
    }
}

/// Rows of the document's data that the applied highlight emphasizes; all
/// rows when no highlight is applied.
pub fn emphasized_rows(doc: &Json) -> Vec<usize> {
    let values = doc
        .get("data")
        .and_then(|d| d.get("values"))
        .and_then(Json::as_array)
        .cloned()
        .unwrap_or_default();
    let test = highlight_test(doc).unwrap_or(json!("true"));
    values
        .iter()
        .enumerate()
        .filter(|(_, d)| eval_test(&test, d))
        .map(|(i, _)| i)
        .collect()
}

/// Every `(channel, field)` pair the document encodes, facets included.
pub fn encoded_pairs(doc: &Json) -> Vec<(String, String)> {
    let mut out = Vec::new();
    fn go(doc: &Json, out: &mut Vec<(String, String)>) {
        match doc {
            Json::Object(o) => {
                if let Some(f) = o.get("facet").and_then(|f| f.get("field")).and_then(Json::as_str) {
                    out.push(("facet".into(), f.to_string()));
                }
                if let Some(enc) = o.get("encoding").and_then(Json::as_object) {
                    for (c, def) in enc {
                        if let Some(f) = def.get("field").and_then(Json::as_str) {
                            out.push((c.clone(), f.to_string()));
                        }
                    }
                }
                for key in ["spec", "layer", "vconcat", "hconcat", "concat"] {
                    if let Some(child) = o.get(key) {
                        go(child, out);
                    }
                }
            }
            Json::Array(items) => items.iter().for_each(|i| go(i, out)),
            _ => {}
        }
    }
    go(doc, &mut out);
    out.sort();
    out.dedup();
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct AxisTicks {
    pub field: String,
    pub channel: Channel,
    /// Tick positions: numbers, or epoch milliseconds for temporal axes.
    pub values: Vec<f64>,
    pub labels: Vec<String>,
}

/// Ticks the renderer draws for `field` when a visual unit places it on x
/// or y, recomputed with the same nice-tick rules: a zero-based, niced
/// linear domain for quantitative fields and calendar intervals for
/// temporal ones.
pub fn axis_ticks(spec: &MultimodalSpec, dataset: &Dataset, field: &str) -> Option<AxisTicks> {
    let count = (AXIS_LENGTH / 40.0) as usize;
    for unit in &spec.visual {
        for channel in [Channel::X, Channel::Y] {
            let Some(e) = unit.encoding.get(&channel) else {
                continue;
            };
            let t = spec.effective_transform(e);
            if e.field != field || t.aggregate.is_some() || t.bin.is_some() {
                continue;
            }
            let ci = dataset.column_index(field)?;
            let (lo, hi) = dataset.extent(ci, 0..dataset.len())?;
            return match spec.measure_type(field)? {
                MeasureType::Quantitative => {
                    let (lo, hi) = (lo.min(0.0), hi.max(0.0));
                    let (lo, hi) = nice(lo, hi, count);
                    let values = ticks(lo, hi, count);
                    let labels = values.iter().map(|v| format_number(*v)).collect();
                    Some(AxisTicks {
                        field: field.to_string(),
                        channel,
                        values,
                        labels,
                    })
                }
                MeasureType::Temporal => {
                    let (lo, hi) = time_nice(lo, hi, count);
                    let (interval, values) = time_ticks(lo, hi, count);
                    let labels = values.iter().map(|v| time_label(interval, *v)).collect();
                    Some(AxisTicks {
                        field: field.to_string(),
                        channel,
                        values,
                        labels,
                    })
                }
                _ => None,
            };
        }
    }
    None
}

pub fn time_label(interval: TimeInterval, ms: f64) -> String {
    instant_from_millis(ms)
        .map(|dt| interval.label(dt))
        .unwrap_or_else(|| format_number(ms))
}
