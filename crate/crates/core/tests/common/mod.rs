#![allow(dead_code)]

use std::collections::BTreeSet;
use std::path::PathBuf;

use polymodal_core::audio::{linearize, render_wav, schedule_all, AudioError, ScheduleOptions, StepValue};
use polymodal_core::defaults::defaults_for_selection;
use polymodal_core::editor::{apply_edit, available_actions, check_state, EditAction, EditorState};
use polymodal_core::model::{Channel, MeasureType, MultimodalSpec, TraversalStep, UnitKind};
use polymodal_core::modality::ModalityRegistry;
use polymodal_core::predicate::{Modality, SyncMessage};
use polymodal_core::text::{text_grouping, TextGrouping};
use polymodal_core::{validate, DataFormat, Dataset, Predicate, Value};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;
use serde_json::{json, Value as Json};

pub fn crate_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

pub fn fixture(name: &str) -> Dataset {
    let path = crate_dir().join("data").join(name);
    let bytes = std::fs::read(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    Dataset::load_typed(&bytes, DataFormat::from_path(name)).expect("fixture parses")
}

/// Projects onto `fields` and drops rows with a null in any of them.
pub fn complete_rows(dataset: &Dataset, fields: &[&str]) -> Dataset {
    let names: Vec<String> = fields.iter().map(|s| s.to_string()).collect();
    let mut ds = dataset.project(&names);
    ds.rows.retain(|r| r.iter().all(|v| !v.is_null()));
    ds
}

// ---------------------------------------------------------------------------
// Default heuristics golden files

#[derive(Deserialize)]
pub struct GoldenColumn {
    pub name: String,
    #[serde(rename = "type")]
    pub measure_type: MeasureType,
    #[serde(default)]
    pub distinct: Option<usize>,
}

#[derive(Deserialize)]
pub struct GoldenRow {
    pub columns: Vec<GoldenColumn>,
    pub substitute: serde_json::Map<String, Json>,
    pub visual: Json,
    pub audio: Json,
    pub text: Json,
}

pub fn golden_row(row: usize) -> GoldenRow {
    let path = crate_dir().join(format!("tests/golden/table1/row{row}.json"));
    serde_json::from_slice(&std::fs::read(path).expect("golden file")).expect("golden file parses")
}

fn substitute(doc: &Json, names: &serde_json::Map<String, Json>) -> Json {
    match doc {
        Json::String(s) => names.get(s).cloned().unwrap_or_else(|| doc.clone()),
        Json::Array(a) => Json::Array(a.iter().map(|d| substitute(d, names)).collect()),
        Json::Object(o) => Json::Object(o.iter().map(|(k, v)| (k.clone(), substitute(v, names))).collect()),
        other => other.clone(),
    }
}

/// A dataset with the golden row's columns. Temporal and nominal columns
/// with a distinct count form a full cross product, so together they are
/// the key; without any, a repeating nominal column keeps the data keyless.
pub fn synthetic_dataset(columns: &[GoldenColumn], rng: &mut ChaCha8Rng) -> Dataset {
    let keyed: Vec<usize> = columns
        .iter()
        .enumerate()
        .filter(|(_, c)| c.measure_type != MeasureType::Quantitative)
        .map(|(i, _)| i)
        .collect();
    let sizes: Vec<usize> = keyed.iter().map(|&i| columns[i].distinct.unwrap_or(3)).collect();
    let keyless = columns.iter().all(|c| c.measure_type != MeasureType::Temporal)
        && columns.iter().filter(|c| c.measure_type == MeasureType::Nominal).count() == 1;
    let n_rows = if keyless { 30 } else { sizes.iter().product() };
    let mut rows = Vec::with_capacity(n_rows);
    for r in 0..n_rows {
        let mut rest = r;
        let mut cells = vec![Value::Null; columns.len()];
        for (k, &ci) in keyed.iter().enumerate().rev() {
            let i = rest % sizes[k];
            rest /= sizes[k];
            cells[ci] = match columns[ci].measure_type {
                MeasureType::Temporal => Value::Text(format!("{}-01-01", 2000 + i)),
                _ => Value::Text(format!("{}_{}", columns[ci].name, i)),
            };
        }
        for (ci, c) in columns.iter().enumerate() {
            if c.measure_type == MeasureType::Quantitative {
                cells[ci] = Value::Number((rng.gen_range(0.0..100.0f64) * 100.0).round() / 100.0);
            }
        }
        rows.push(cells);
    }
    let records: Vec<Json> = rows
        .iter()
        .map(|r| {
            Json::Object(
                columns
                    .iter()
                    .zip(r)
                    .map(|(c, v)| (c.name.clone(), serde_json::to_value(v).unwrap()))
                    .collect(),
            )
        })
        .collect();
    Dataset::load_typed(&serde_json::to_vec(&records).unwrap(), DataFormat::JsonRecords).unwrap()
}

fn strip_unit(v: Json) -> Json {
    match v {
        Json::Object(mut o) => {
            o.remove("unit");
            Json::Object(o)
        }
        other => other,
    }
}

fn grouping_from_golden(doc: &Json) -> TextGrouping {
    let names = |list: &Json| -> Vec<String> {
        list.as_array()
            .expect("groupby list")
            .iter()
            .map(|c| c["groupby"].as_str().expect("groupby name").to_string())
            .collect()
    };
    match doc {
        Json::Array(_) => TextGrouping {
            groupby: None,
            children: names(doc),
        },
        _ => TextGrouping {
            groupby: doc["groupby"].as_str().map(str::to_string),
            children: names(&doc["children"]),
        },
    }
}

/// Generates defaults for a synthetic dataset shaped like golden row `row`
/// and compares them with its fragments.
pub fn check_golden_row(row: usize, rng: &mut ChaCha8Rng) -> Result<(), String> {
    let golden = golden_row(row);
    let dataset = synthetic_dataset(&golden.columns, rng);
    let fields: Vec<String> = golden.columns.iter().map(|c| c.name.clone()).collect();
    let spec = defaults_for_selection(&dataset, &fields);

    let visual = match spec.visual.as_slice() {
        [unit] => strip_unit(serde_json::to_value(unit).unwrap()),
        units => return Err(format!("row {row}: expected one visual unit, got {}", units.len())),
    };
    let want_visual = substitute(&golden.visual, &golden.substitute);
    if visual != want_visual {
        return Err(format!("row {row}: visual {visual} != {want_visual}"));
    }
    let audio = Json::Array(
        spec.audio
            .iter()
            .map(|u| strip_unit(serde_json::to_value(u).unwrap()))
            .collect(),
    );
    let want_audio = substitute(&golden.audio, &golden.substitute);
    if audio != want_audio {
        return Err(format!("row {row}: audio {audio} != {want_audio}"));
    }
    let text = text_grouping(&spec);
    let want_text = grouping_from_golden(&substitute(&golden.text, &golden.substitute));
    if text != want_text {
        return Err(format!("row {row}: text {text:?} != {want_text:?}"));
    }
    let report = validate(&spec);
    if !report.is_valid() {
        return Err(format!("row {row}: generated spec is invalid: {report}"));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Traversal oracle

/// Random dataset with a nominal, a temporal and two quantitative columns,
/// some cells null, plus up to three traversal steps over them.
pub fn random_traversal_case(rng: &mut ChaCha8Rng) -> (Dataset, Vec<TraversalStep>, Predicate) {
    let n_rows = rng.gen_range(0..=200);
    let null_rate = if rng.gen_bool(0.3) { 0.1 } else { 0.0 };
    let n_cats = rng.gen_range(1..=6);
    let n_years = rng.gen_range(1..=8);
    let q_range = rng.gen_range(1..=40);
    let mut rows = Vec::with_capacity(n_rows);
    for _ in 0..n_rows {
        let mut cell = |make: &mut dyn FnMut(&mut ChaCha8Rng) -> Value| {
            if rng.gen_bool(null_rate) {
                Value::Null
            } else {
                make(rng)
            }
        };
        rows.push(vec![
            cell(&mut |r| Value::Text(["a", "b", "c", "d", "e", "f"][r.gen_range(0..n_cats)].into())),
            cell(&mut |r| Value::Number(2000.0 + 5.0 * r.gen_range(0..n_years) as f64)),
            cell(&mut |r| Value::Number(r.gen_range(0..=q_range) as f64)),
            cell(&mut |r| Value::Number((r.gen_range(-50.0..50.0f64) * 10.0).round() / 10.0)),
        ]);
    }
    let types = [
        ("n", MeasureType::Nominal),
        ("t", MeasureType::Temporal),
        ("q", MeasureType::Quantitative),
        ("r", MeasureType::Quantitative),
    ];
    let dataset = Dataset {
        columns: types
            .iter()
            .map(|(name, m)| polymodal_core::ingest::Column {
                name: name.to_string(),
                measure_type: Some(*m),
            })
            .collect(),
        rows,
        key: Vec::new(),
    };
    let mut names = vec!["n", "t", "q", "r"];
    names.shuffle(rng);
    let depth = rng.gen_range(1..=3);
    let steps = names[..depth]
        .iter()
        .map(|&f| {
            let continuous = f != "n";
            if continuous && rng.gen_bool(0.5) {
                let mut s = TraversalStep::binned(f);
                s.bin = Some(polymodal_core::model::Bin::with_count(rng.gen_range(1..=6)));
                s
            } else {
                TraversalStep::field(f)
            }
        })
        .collect();
    let filter = if rng.gen_bool(0.5) || dataset.is_empty() {
        Predicate::True
    } else {
        random_predicate(rng, &dataset, &["n", "t", "q", "r"])
    };
    (dataset, steps, filter)
}

#[derive(Clone)]
enum OracleDomain {
    Values(Vec<Value>),
    Bins(Vec<(f64, f64, bool)>),
}

fn oracle_domain(step: &TraversalStep, dataset: &Dataset) -> (usize, MeasureType, OracleDomain) {
    let ci = dataset.column_index(&step.field).unwrap();
    let measure = dataset.measure_type(&step.field);
    let present: Vec<&Value> = dataset.rows.iter().map(|r| &r[ci]).filter(|v| !v.is_null()).collect();
    match step.bin {
        Some(bin) if measure.is_continuous() => {
            let xs: Vec<f64> = present.iter().filter_map(|v| v.ordinal(measure)).collect();
            let lo = xs.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            if xs.is_empty() || lo == hi {
                let at = if xs.is_empty() { 0.0 } else { lo };
                return (ci, measure, OracleDomain::Bins(vec![(at, at, true)]));
            }
            let n = bin.resolved_count() as usize;
            let width = (hi - lo) / n as f64;
            let bins = (0..n)
                .map(|i| {
                    let b_hi = if i + 1 == n { hi } else { lo + width * (i + 1) as f64 };
                    (lo + width * i as f64, b_hi, i + 1 == n)
                })
                .collect();
            (ci, measure, OracleDomain::Bins(bins))
        }
        _ => {
            let mut values: Vec<Value> = Vec::new();
            for v in present {
                if !values.iter().any(|x| x.equals_as(v, measure)) {
                    values.push(v.clone());
                }
            }
            if measure.is_continuous() {
                values.sort_by(|a, b| a.ordinal(measure).unwrap().total_cmp(&b.ordinal(measure).unwrap()));
            }
            (ci, measure, OracleDomain::Values(values))
        }
    }
}

/// Nested-loop group-by: iterate every combination of step values in
/// domain order and keep those at least one filtered row occupies.
pub fn oracle_linearize(steps: &[TraversalStep], dataset: &Dataset, filter: &Predicate) -> Vec<Vec<StepValue>> {
    let domains: Vec<_> = steps.iter().map(|s| oracle_domain(s, dataset)).collect();
    let rows: Vec<usize> = (0..dataset.len())
        .filter(|&r| filter.evaluate(&dataset.rows[r], dataset).unwrap())
        .collect();

    fn go(
        depth: usize,
        domains: &[(usize, MeasureType, OracleDomain)],
        rows: &[usize],
        dataset: &Dataset,
        prefix: &mut Vec<StepValue>,
        out: &mut Vec<Vec<StepValue>>,
    ) {
        if depth == domains.len() {
            if !rows.is_empty() {
                out.push(prefix.clone());
            }
            return;
        }
        let (ci, measure, domain) = &domains[depth];
        match domain {
            OracleDomain::Values(values) => {
                for v in values {
                    let inner: Vec<usize> = rows
                        .iter()
                        .copied()
                        .filter(|&r| dataset.rows[r][*ci].equals_as(v, *measure))
                        .collect();
                    prefix.push(StepValue::Value(v.clone()));
                    go(depth + 1, domains, &inner, dataset, prefix, out);
                    prefix.pop();
                }
            }
            OracleDomain::Bins(bins) => {
                for (index, &(lo, hi, closed)) in bins.iter().enumerate() {
                    let inner: Vec<usize> = rows
                        .iter()
                        .copied()
                        .filter(|&r| match dataset.rows[r][*ci].ordinal(*measure) {
                            Some(x) => x >= lo && (x < hi || (closed && x <= hi)),
                            None => false,
                        })
                        .collect();
                    prefix.push(StepValue::Bin { index, lo, hi, closed });
                    go(depth + 1, domains, &inner, dataset, prefix, out);
                    prefix.pop();
                }
            }
        }
    }

    let mut out = Vec::new();
    go(0, &domains, &rows, dataset, &mut Vec::new(), &mut out);
    out
}

fn step_values_match(a: &StepValue, b: &StepValue) -> bool {
    match (a, b) {
        (StepValue::Value(x), StepValue::Value(y)) => x == y,
        (
            StepValue::Bin { index: i, lo: l1, hi: h1, closed: c1 },
            StepValue::Bin { index: j, lo: l2, hi: h2, closed: c2 },
        ) => i == j && c1 == c2 && (l1 - l2).abs() <= 1e-9 && (h1 - h2).abs() <= 1e-9,
        _ => false,
    }
}

pub fn check_linearize(steps: &[TraversalStep], dataset: &Dataset, filter: &Predicate) -> Result<(), String> {
    let got = match linearize(steps, dataset, filter) {
        Ok(v) => v,
        Err(AudioError::EmptyAfterFilter) => Vec::new(),
        Err(e) => return Err(e.to_string()),
    };
    let want = oracle_linearize(steps, dataset, filter);
    let same = got.len() == want.len()
        && got
            .iter()
            .zip(&want)
            .all(|(g, w)| g.len() == w.len() && g.iter().zip(w).all(|(a, b)| step_values_match(a, b)));
    if same {
        Ok(())
    } else {
        Err(format!(
            "steps {steps:?} filter {filter}: {} positions, oracle {}\n got {got:?}\nwant {want:?}",
            got.len(),
            want.len()
        ))
    }
}

// ---------------------------------------------------------------------------
// Predicates and cross-modal consistency

fn pick_value(rng: &mut ChaCha8Rng, dataset: &Dataset, ci: usize) -> Option<Value> {
    let present: Vec<&Value> = dataset.rows.iter().map(|r| &r[ci]).filter(|v| !v.is_null()).collect();
    present.choose(rng).map(|v| (*v).clone())
}

fn atom(rng: &mut ChaCha8Rng, dataset: &Dataset, fields: &[&str]) -> Predicate {
    let field = *fields.choose(rng).unwrap();
    let ci = dataset.column_index(field).unwrap();
    let measure = dataset.measure_type(field);
    let Some(v) = pick_value(rng, dataset, ci) else {
        return Predicate::True;
    };
    match rng.gen_range(0..3) {
        0 => Predicate::equal(field, v),
        1 => {
            let mut values = vec![v];
            for _ in 0..rng.gen_range(1..=3) {
                values.extend(pick_value(rng, dataset, ci));
            }
            Predicate::one_of(field, values)
        }
        _ if measure.is_continuous() => {
            let w = pick_value(rng, dataset, ci).unwrap();
            let (a, b) = (v.ordinal(measure).unwrap(), w.ordinal(measure).unwrap());
            if a == b {
                Predicate::equal(field, v)
            } else if a < b {
                Predicate::range(field, v, w)
            } else if rng.gen_bool(0.5) {
                Predicate::range_inclusive(field, w, v)
            } else {
                Predicate::range(field, w, v)
            }
        }
        _ => Predicate::equal(field, v),
    }
}

pub fn random_predicate(rng: &mut ChaCha8Rng, dataset: &Dataset, fields: &[&str]) -> Predicate {
    if rng.gen_bool(0.3) {
        let a = atom(rng, dataset, fields);
        let b = atom(rng, dataset, fields);
        a.and(b)
    } else {
        atom(rng, dataset, fields)
    }
}

/// A fixture spec: defaults for the selected fields over rows complete in
/// those fields.
pub struct FixtureCase {
    pub name: &'static str,
    pub dataset: Dataset,
    pub spec: MultimodalSpec,
}

pub fn fixture_cases() -> Vec<FixtureCase> {
    let cases: [(&'static str, &'static str, &[&str]); 6] = [
        ("gapminder", "gapminder.json", &["year", "country", "life_expect", "fertility"]),
        ("stocks", "stocks.csv", &["symbol", "date", "price"]),
        ("barley", "barley.json", &["yield", "variety", "year", "site"]),
        (
            "penguins",
            "penguins.json",
            &["Species", "Beak Length (mm)", "Flipper Length (mm)"],
        ),
        ("cars", "cars.json", &["Miles_per_Gallon", "Horsepower", "Origin"]),
        ("seattle-weather", "seattle-weather.csv", &["date", "temp_max", "temp_min"]),
    ];
    cases
        .into_iter()
        .map(|(name, file, fields)| {
            let dataset = complete_rows(&fixture(file), fields);
            let selected: Vec<String> = fields.iter().map(|s| s.to_string()).collect();
            let spec = defaults_for_selection(&dataset, &selected);
            FixtureCase { name, dataset, spec }
        })
        .collect()
}

/// Row sets each modality keeps for one selection made in `source`.
pub fn modality_rows(case: &FixtureCase, predicate: &Predicate) -> Result<Vec<(Modality, BTreeSet<usize>)>, String> {
    let registry = ModalityRegistry::standard();
    let mut out = Vec::new();
    for source in [Modality::Text, Modality::Visual] {
        let message = SyncMessage {
            source,
            predicate: predicate.clone(),
        };
        let effects = registry
            .reify(&message, &case.spec, &case.dataset)
            .map_err(|e| e.to_string())?;
        for (m, effect) in effects {
            if out.iter().any(|(seen, _)| *seen == m) {
                continue;
            }
            let backend = registry.get(m).unwrap();
            out.push((m, backend.selected_rows(&effect, &case.dataset).into_iter().collect()));
        }
    }
    Ok(out)
}

pub fn check_cross_modal(case: &FixtureCase, predicate: &Predicate) -> Result<(), String> {
    let sets = modality_rows(case, predicate)?;
    if sets.len() != 3 {
        return Err(format!("{}: only {} modalities reified", case.name, sets.len()));
    }
    let first = &sets[0].1;
    for (m, rows) in &sets[1..] {
        if rows != first {
            let diff: Vec<_> = rows.symmetric_difference(first).take(5).collect();
            return Err(format!(
                "{} {predicate}: {} keeps {} rows, {} keeps {} (differ at {diff:?})",
                case.name,
                sets[0].0.as_str(),
                first.len(),
                m.as_str(),
                rows.len()
            ));
        }
    }
    Ok(())
}

pub fn encoded_fields(spec: &MultimodalSpec) -> Vec<String> {
    spec.fields
        .iter()
        .filter(|f| !f.encodings.is_empty())
        .map(|f| f.name.clone())
        .collect()
}

// ---------------------------------------------------------------------------
// Editor fuzzing

/// Small JSON-records datasets the fuzzer loads.
pub fn fuzz_datasets() -> Vec<String> {
    let sources = [
        ("gapminder.json", 60),
        ("stocks.csv", 40),
        ("barley.json", 50),
        ("penguins.json", 40),
        ("cars.json", 40),
        ("seattle-weather.csv", 30),
    ];
    sources
        .iter()
        .map(|(file, n)| {
            let ds = fixture(file);
            let records: Vec<Json> = ds
                .rows
                .iter()
                .take(*n)
                .map(|r| {
                    Json::Object(
                        ds.columns
                            .iter()
                            .zip(r)
                            .map(|(c, v)| (c.name.clone(), serde_json::to_value(v).unwrap()))
                            .collect(),
                    )
                })
                .collect();
            serde_json::to_string(&records).unwrap()
        })
        .collect()
}

/// Runs one random action sequence, checking every intermediate state.
pub fn fuzz_editor(rng: &mut ChaCha8Rng, datasets: &[String], steps: usize) -> Result<EditorState, String> {
    let mut state = EditorState::default();
    for step in 0..steps {
        let actions = available_actions(&state);
        let mut action = actions.choose(rng).expect("loading is always available").clone();
        // Load a dataset first, most of the time.
        if state.dataset.columns.is_empty() && rng.gen_bool(0.8) {
            action = actions[0].clone();
        }
        if let EditAction::LoadDataset { content, format } = &mut action {
            *content = datasets.choose(rng).unwrap().clone();
            *format = DataFormat::JsonRecords;
        }
        state = apply_edit(&state, &action).map_err(|e| format!("step {step}: offered action {action:?} failed: {e}"))?;
        let problems = check_state(&state);
        if !problems.is_empty() {
            return Err(format!("step {step}: after {action:?}: {problems:?}"));
        }
        if !validate(&state.spec).violations.is_empty() {
            return Err(format!("step {step}: validate reported violations"));
        }
    }
    Ok(state)
}

// ---------------------------------------------------------------------------
// Audio and schema helpers

pub fn wav_samples(wav: &[u8]) -> (u32, Vec<f64>) {
    let reader = hound::WavReader::new(wav).expect("wav parses");
    let rate = reader.spec().sample_rate;
    let samples = reader
        .into_samples::<i16>()
        .map(|s| s.unwrap() as f64 / i16::MAX as f64)
        .collect();
    (rate, samples)
}

/// Frequency of the largest DFT bin and the bin width.
pub fn dominant_frequency(samples: &[f64], sample_rate: u32) -> (f64, f64) {
    use rustfft::num_complex::Complex;
    let mut buf: Vec<Complex<f64>> = samples.iter().map(|&x| Complex::new(x, 0.0)).collect();
    let n = buf.len();
    rustfft::FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let (bin, _) = buf[1..n / 2]
        .iter()
        .enumerate()
        .map(|(i, c)| (i + 1, c.norm()))
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap();
    let width = sample_rate as f64 / n as f64;
    (bin as f64 * width, width)
}

/// Single-unit spec over `k -> x` whose tones land on known frequencies:
/// x in {0, 1, 3} maps to 220, 440 and 880 Hz.
pub fn three_tone_case() -> (MultimodalSpec, Dataset) {
    let data = json!([
        {"k": "a", "x": 0},
        {"k": "b", "x": 1},
        {"k": "c", "x": 3}
    ]);
    let dataset = Dataset::load_typed(&serde_json::to_vec(&data).unwrap(), DataFormat::JsonRecords).unwrap();
    let mut spec = MultimodalSpec {
        key: vec!["k".into()],
        fields: vec![
            polymodal_core::model::FieldDef::new("k", MeasureType::Nominal),
            polymodal_core::model::FieldDef::new("x", MeasureType::Quantitative),
        ],
        audio: vec![polymodal_core::model::AudioUnitSpec {
            unit: "audio_0".into(),
            encoding: Default::default(),
            traversal: vec![TraversalStep::field("k")],
        }],
        ..Default::default()
    };
    spec.bind(
        "x",
        UnitKind::Audio,
        "audio_0",
        Channel::Pitch,
        polymodal_core::model::ChannelEncoding::field("x"),
    );
    (spec.normalized(), dataset)
}

pub fn render(spec: &MultimodalSpec, dataset: &Dataset, rate: f64) -> Vec<u8> {
    let options = ScheduleOptions {
        rate,
        ticks: false,
        ..Default::default()
    };
    let schedules = schedule_all(spec, dataset, &options).unwrap();
    let tracks = render_wav(&schedules, &spec.composition, 44_100).unwrap();
    tracks.into_iter().next().unwrap().wav
}

pub fn vega_lite_schema() -> jsonschema::JSONSchema {
    let path = crate_dir().join("schema/vega-lite-v5.23.0.schema.json");
    let schema: Json = serde_json::from_slice(&std::fs::read(path).unwrap()).unwrap();
    jsonschema::JSONSchema::options()
        .with_draft(jsonschema::Draft::Draft7)
        .compile(&schema)
        .expect("schema compiles")
}

pub fn schema_errors(schema: &jsonschema::JSONSchema, doc: &Json) -> Vec<String> {
    match schema.validate(doc) {
        Ok(()) => Vec::new(),
        Err(errors) => errors.take(5).map(|e| format!("{} at {}", e, e.instance_path)).collect(),
    }
}

// ---------------------------------------------------------------------------
// Random valid specs

pub fn random_spec(rng: &mut ChaCha8Rng) -> MultimodalSpec {
    use polymodal_core::model::{Aggregate, AudioUnitSpec, Bin, ChannelEncoding, CompositionOp, FieldDef, Mark, VisualUnitSpec};

    let n_fields = rng.gen_range(0..=6);
    let mut spec = MultimodalSpec::default();
    for i in 0..n_fields {
        let mut f = FieldDef::new(format!("f{i}"), *MeasureType::ALL.choose(rng).unwrap());
        if rng.gen_bool(0.2) {
            f.aggregate = Some(*Aggregate::ALL.choose(rng).unwrap());
        }
        if f.measure_type.is_continuous() && rng.gen_bool(0.2) {
            f.bin = Some(if rng.gen_bool(0.5) { Bin::default() } else { Bin::with_count(rng.gen_range(1..=20)) });
        }
        spec.fields.push(f);
    }
    let names: Vec<String> = spec.fields.iter().map(|f| f.name.clone()).collect();
    if !names.is_empty() {
        let k = rng.gen_range(0..=names.len().min(3));
        spec.key = names.choose_multiple(rng, k).cloned().collect();
    }
    if names.is_empty() {
        return spec;
    }
    for u in 0..rng.gen_range(0..=2) {
        spec.visual.push(VisualUnitSpec {
            unit: format!("visual_{u}"),
            mark: *Mark::ALL.choose(rng).unwrap(),
            encoding: Default::default(),
        });
    }
    let layered = rng.gen_bool(0.3);
    let shared: Vec<TraversalStep> = {
        let k = rng.gen_range(1..=names.len().min(3));
        names
            .choose_multiple(rng, k)
            .map(|n| {
                let continuous = spec.field(n).unwrap().measure_type.is_continuous();
                if continuous && rng.gen_bool(0.3) {
                    TraversalStep::binned(n.as_str())
                } else {
                    TraversalStep::field(n.as_str())
                }
            })
            .collect()
    };
    for u in 0..rng.gen_range(0..=2) {
        let traversal = if layered || rng.gen_bool(0.5) {
            shared.clone()
        } else {
            vec![TraversalStep::field(names.choose(rng).unwrap().as_str())]
        };
        spec.audio.push(AudioUnitSpec {
            unit: format!("audio_{u}"),
            encoding: Default::default(),
            traversal,
        });
    }
    if layered {
        spec.composition.audio = CompositionOp::Layer;
    }
    if rng.gen_bool(0.5) {
        spec.composition.visual = CompositionOp::Layer;
    }
    let units: Vec<(UnitKind, String)> = spec.unit_ids().map(|(k, u)| (k, u.to_string())).collect();
    for (kind, unit) in units {
        for &channel in Channel::for_kind(kind) {
            if rng.gen_bool(0.4) {
                let field = names.choose(rng).unwrap().clone();
                let mut enc = ChannelEncoding::field(field.as_str());
                if rng.gen_bool(0.2) {
                    enc.aggregate = Some(*Aggregate::ALL.choose(rng).unwrap());
                }
                if spec.field(&field).unwrap().measure_type.is_continuous() && rng.gen_bool(0.2) {
                    enc.bin = Some(Bin::default());
                }
                spec.bind(&field, kind, &unit, channel, enc);
            }
        }
    }
    if spec.composition.visual == CompositionOp::Layer {
        // Layers share one facet; later units keep it only when it agrees.
        let first = spec.visual.iter().find_map(|u| u.encoding.get(&Channel::Facet)).map(|e| e.field.clone());
        let units: Vec<String> = spec.visual.iter().map(|u| u.unit.clone()).collect();
        for unit in units {
            let facet = spec.visual_unit(&unit).unwrap().encoding.get(&Channel::Facet).map(|e| e.field.clone());
            if facet.is_some() && facet != first {
                spec.unbind(UnitKind::Visual, &unit, Channel::Facet);
            }
        }
    }
    spec.normalized()
}
