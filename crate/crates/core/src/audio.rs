//! Sonification: traversal linearization, tone and speech-tick scheduling,
//! alternate playback orders, and PCM rendering.

use std::collections::HashMap;
use std::io::Cursor;

use schemars::JsonSchema;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::Dataset;
use crate::model::{Aggregate, AudioUnitSpec, Channel, CompositionOp, MeasureType, MultimodalSpec, TraversalStep, ViewComposition};
use crate::predicate::Predicate;
use crate::scale::{equal_width_bins, ticks, time_ticks, Bins};
use crate::value::{format_value, Value};
use crate::visual::{axis_ticks, time_label};

pub const PITCH_LOW_HZ: f64 = 220.0;
pub const PITCH_HIGH_HZ: f64 = 880.0;
/// Seconds per tone at rate 1.
pub const TONE_SECONDS: f64 = 0.2;
pub const DEFAULT_SAMPLE_RATE: u32 = 44_100;
/// Tick count for audio axes that have no visual counterpart.
pub const AUDIO_TICK_COUNT: usize = 10;
const AMPLITUDE: f64 = 0.5;
/// Linear fade at each tone edge, in seconds, to avoid clicks.
const FADE_SECONDS: f64 = 0.002;

#[derive(Debug, Error, PartialEq)]
pub enum AudioError {
    #[error("no rows remain after filtering")]
    EmptyAfterFilter,
    #[error("audio unit `{0}` has no pitch encoding")]
    MissingPitchEncoding(String),
    #[error("unknown audio unit `{0}`")]
    UnknownUnit(String),
    #[error("unknown traversal field `{0}`")]
    UnknownField(String),
    #[error("sample rate must be positive")]
    InvalidSampleRate,
    #[error("wav encoding failed: {0}")]
    Wav(String),
}

/// A linear map from encoded values to frequencies.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct FrequencyScale {
    pub domain: (f64, f64),
    pub range: (f64, f64),
}

impl FrequencyScale {
    pub fn new(lo: f64, hi: f64) -> Self {
        FrequencyScale {
            domain: (lo, hi),
            range: (PITCH_LOW_HZ, PITCH_HIGH_HZ),
        }
    }

    /// A constant domain maps to the middle of the range.
    pub fn frequency(&self, x: f64) -> f64 {
        let (d0, d1) = self.domain;
        let (r0, r1) = self.range;
        if !(d1 > d0) {
            return (r0 + r1) / 2.0;
        }
        let t = ((x - d0) / (d1 - d0)).clamp(0.0, 1.0);
        r0 + t * (r1 - r0)
    }
}

/// One step's position: a value, or a bin for binned steps.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(untagged)]
pub enum StepValue {
    Value(Value),
    Bin { index: usize, lo: f64, hi: f64, closed: bool },
}

/// Hash key agreeing with [`Value::equals_as`].
fn identity(v: &Value, measure: MeasureType) -> String {
    match v.ordinal(measure) {
        // `+ 0.0` folds -0 into 0, which compare equal.
        Some(x) => format!("o{}", (x + 0.0).to_bits()),
        None => format!("t{v}"),
    }
}

/// Ordered values each traversal step iterates over.
#[derive(Clone, Debug)]
enum StepDomain {
    Values { measure: MeasureType, values: Vec<Value>, lookup: HashMap<String, usize> },
    Bins { measure: MeasureType, bins: Bins },
}

impl StepDomain {
    fn build(step: &TraversalStep, dataset: &Dataset) -> Result<StepDomain, AudioError> {
        let ci = dataset
            .column_index(&step.field)
            .ok_or_else(|| AudioError::UnknownField(step.field.clone()))?;
        let measure = dataset.measure_type(&step.field);
        match step.bin.filter(|_| measure.is_continuous()) {
            Some(bin) => {
                let (lo, hi) = dataset.extent(ci, 0..dataset.len()).unwrap_or((0.0, 0.0));
                Ok(StepDomain::Bins {
                    measure,
                    bins: equal_width_bins(lo, hi, bin.resolved_count()),
                })
            }
            None => {
                let values = dataset.domain(ci);
                let mut lookup = HashMap::new();
                for (i, v) in values.iter().enumerate() {
                    lookup.entry(identity(v, measure)).or_insert(i);
                }
                Ok(StepDomain::Values { measure, values, lookup })
            }
        }
    }

    fn index_of(&self, v: &Value) -> Option<usize> {
        if v.is_null() {
            return None;
        }
        match self {
            StepDomain::Values { measure, lookup, .. } => lookup.get(&identity(v, *measure)).copied(),
            StepDomain::Bins { measure, bins } => {
                let x = v.ordinal(*measure)?;
                if bins.edges.len() == 2 && bins.edges[0] == bins.edges[1] {
                    return (x == bins.edges[0]).then_some(0);
                }
                bins.index_of(x)
            }
        }
    }

    fn value_at(&self, i: usize) -> StepValue {
        match self {
            StepDomain::Values { values, .. } => StepValue::Value(values[i].clone()),
            StepDomain::Bins { bins, .. } => {
                let n = bins.len().max(1);
                StepValue::Bin {
                    index: i,
                    lo: bins.edges[i],
                    hi: bins.edges[(i + 1).min(bins.edges.len() - 1)],
                    closed: bins.closed_top && i + 1 == n,
                }
            }
        }
    }
}

/// Predicate for a step fixed at `value`.
pub fn step_predicate(field: &str, value: &StepValue, measure: MeasureType) -> Predicate {
    match value {
        StepValue::Value(v) => Predicate::equal(field, v.clone()),
        StepValue::Bin { lo, hi, closed, .. } => {
            let bound = |x: f64| -> Value {
                if measure == MeasureType::Temporal {
                    crate::value::instant_from_millis(x)
                        .map(|dt| Value::Text(dt.format("%Y-%m-%dT%H:%M:%S%.3f").to_string()))
                        .unwrap_or(Value::Number(x))
                } else {
                    Value::Number(x)
                }
            };
            if *closed || lo == hi {
                Predicate::range_inclusive(field, bound(*lo), bound(*hi))
            } else {
                Predicate::range(field, bound(*lo), bound(*hi))
            }
        }
    }
}

/// Predicate for a paused playback position: one constraint per fixed
/// step, in traversal order.
pub fn from_audio_position(steps: &[TraversalStep], position: &[StepValue], dataset: &Dataset) -> Predicate {
    Predicate::all(
        steps
            .iter()
            .zip(position)
            .map(|(s, v)| step_predicate(&s.field, v, dataset.measure_type(&s.field))),
    )
}

/// A linearized position with the rows it covers.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearItem {
    pub indices: Vec<usize>,
    pub values: Vec<StepValue>,
    pub rows: Vec<usize>,
}

fn linearize_items(steps: &[TraversalStep], dataset: &Dataset, filter: &Predicate) -> Result<Vec<LinearItem>, AudioError> {
    let domains: Vec<StepDomain> = steps
        .iter()
        .map(|s| StepDomain::build(s, dataset))
        .collect::<Result<_, _>>()?;
    let cols: Vec<usize> = steps
        .iter()
        .map(|s| dataset.column_index(&s.field).expect("checked by StepDomain::build"))
        .collect();
    let rows = dataset.matching_rows(filter).map_err(|e| match e {
        crate::predicate::PredicateError::UnknownField(f) => AudioError::UnknownField(f),
        _ => AudioError::EmptyAfterFilter,
    })?;
    let mut groups: HashMap<Vec<usize>, Vec<usize>> = HashMap::new();
    'rows: for r in rows {
        let mut key = Vec::with_capacity(steps.len());
        for (d, &ci) in domains.iter().zip(&cols) {
            match d.index_of(dataset.value(r, ci)) {
                Some(i) => key.push(i),
                None => continue 'rows,
            }
        }
        groups.entry(key).or_default().push(r);
    }
    if groups.is_empty() {
        return Err(AudioError::EmptyAfterFilter);
    }
    let mut items: Vec<LinearItem> = groups
        .into_iter()
        .map(|(indices, rows)| LinearItem {
            values: indices.iter().zip(&domains).map(|(&i, d)| d.value_at(i)).collect(),
            indices,
            rows,
        })
        .collect();
    items.sort_by(|a, b| a.indices.cmp(&b.indices));
    Ok(items)
}

/// Playback order of a traversal: nested iteration over each step's domain
/// (ascending for continuous fields, first appearance for nominal ones),
/// keeping only positions some filtered row occupies.
pub fn linearize(steps: &[TraversalStep], dataset: &Dataset, filter: &Predicate) -> Result<Vec<Vec<StepValue>>, AudioError> {
    Ok(linearize_items(steps, dataset, filter)?
        .into_iter()
        .map(|i| i.values)
        .collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct ToneEvent {
    pub start: f64,
    pub duration: f64,
    pub frequency: f64,
    /// The encoded value the pitch represents.
    pub value: f64,
    pub source_predicate: Predicate,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct SpeechTickEvent {
    pub start: f64,
    pub text: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum AudioEvent {
    Tone(ToneEvent),
    SpeechTick(SpeechTickEvent),
}

impl AudioEvent {
    pub fn start(&self) -> f64 {
        match self {
            AudioEvent::Tone(t) => t.start,
            AudioEvent::SpeechTick(s) => s.start,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct AudioSchedule {
    pub unit_id: String,
    pub order: String,
    pub scale: FrequencyScale,
    pub events: Vec<AudioEvent>,
    pub total_duration: f64,
}

impl AudioSchedule {
    pub fn tones(&self) -> impl Iterator<Item = &ToneEvent> {
        self.events.iter().filter_map(|e| match e {
            AudioEvent::Tone(t) => Some(t),
            _ => None,
        })
    }

    pub fn ticks(&self) -> impl Iterator<Item = &SpeechTickEvent> {
        self.events.iter().filter_map(|e| match e {
            AudioEvent::SpeechTick(s) => Some(s),
            _ => None,
        })
    }

    /// Total seconds of tone playback.
    pub fn tone_time(&self) -> f64 {
        self.tones().map(|t| t.duration).sum()
    }
}

/// A playback order: some steps fixed at selected values, the rest iterated
/// in the listed order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct PlaybackOrder {
    pub descriptor: String,
    #[serde(default)]
    pub fixed: Vec<(String, Value)>,
    pub steps: Vec<TraversalStep>,
}

fn step_label(step: &TraversalStep) -> String {
    if step.bin.is_some() {
        format!("binned {}", step.field)
    } else {
        step.field.clone()
    }
}

fn default_descriptor(steps: &[TraversalStep]) -> String {
    let names: Vec<String> = steps.iter().map(step_label).collect();
    format!("by {}", names.join(", then "))
}

impl PlaybackOrder {
    /// The traversal as specified.
    pub fn default_for(unit: &AudioUnitSpec) -> PlaybackOrder {
        PlaybackOrder {
            descriptor: default_descriptor(&unit.traversal),
            fixed: Vec::new(),
            steps: unit.traversal.clone(),
        }
    }
}

/// The default order plus, for each step, an order that fixes the selected
/// values of the other steps and iterates that one.
pub fn enumerate_playback_orders(unit: &AudioUnitSpec, selection: &[(String, Value)], dataset: &Dataset) -> Vec<PlaybackOrder> {
    let mut out = vec![PlaybackOrder::default_for(unit)];
    if unit.traversal.len() < 2 {
        return out;
    }
    for (i, step) in unit.traversal.iter().enumerate() {
        let mut fixed = Vec::new();
        let mut rest = vec![step.clone()];
        for (j, other) in unit.traversal.iter().enumerate() {
            if j == i {
                continue;
            }
            match selection.iter().find(|(f, _)| *f == other.field) {
                Some((f, v)) => fixed.push((f.clone(), v.clone())),
                None => rest.push(other.clone()),
            }
        }
        if fixed.is_empty() {
            continue;
        }
        let labels: Vec<String> = fixed
            .iter()
            .map(|(f, v)| format_value(v, dataset.measure_type(f)))
            .collect();
        let descriptor = format!("{} {}", labels.join(", "), default_descriptor(&rest));
        if out.iter().all(|o| o.descriptor != descriptor) {
            out.push(PlaybackOrder {
                descriptor,
                fixed,
                steps: rest,
            });
        }
    }
    out
}

/// Finds an order by its descriptor among those available.
pub fn find_order(unit: &AudioUnitSpec, selection: &[(String, Value)], dataset: &Dataset, descriptor: &str) -> Option<PlaybackOrder> {
    enumerate_playback_orders(unit, selection, dataset)
        .into_iter()
        .find(|o| o.descriptor == descriptor)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct ScheduleOptions {
    #[serde(default = "default_rate")]
    pub rate: f64,
    #[serde(default = "default_true")]
    pub ticks: bool,
    #[serde(default)]
    pub filter: Predicate,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub order: Option<PlaybackOrder>,
}

fn default_rate() -> f64 {
    1.0
}

fn default_true() -> bool {
    true
}

impl Default for ScheduleOptions {
    fn default() -> Self {
        ScheduleOptions {
            rate: 1.0,
            ticks: true,
            filter: Predicate::True,
            order: None,
        }
    }
}

/// Decides which speech ticks precede each tone of the innermost step.
enum TickPlan {
    /// Speak every new value.
    EachValue,
    /// Speak a tick label before the first tone at or past each tick.
    Thresholds { values: Vec<f64>, labels: Vec<String>, measure: MeasureType },
}

impl TickPlan {
    fn for_step(step: &TraversalStep, spec: &MultimodalSpec, dataset: &Dataset) -> TickPlan {
        let measure = dataset.measure_type(&step.field);
        if !measure.is_continuous() || step.bin.is_some() {
            return TickPlan::EachValue;
        }
        if let Some(axis) = axis_ticks(spec, dataset, &step.field) {
            return TickPlan::Thresholds {
                values: axis.values,
                labels: axis.labels,
                measure,
            };
        }
        let Some((lo, hi)) = dataset
            .column_index(&step.field)
            .and_then(|ci| dataset.extent(ci, 0..dataset.len()))
        else {
            return TickPlan::EachValue;
        };
        if measure == MeasureType::Temporal {
            let (interval, values) = time_ticks(lo, hi, AUDIO_TICK_COUNT);
            let labels = values.iter().map(|v| time_label(interval, *v)).collect();
            TickPlan::Thresholds { values, labels, measure }
        } else {
            let values = ticks(lo, hi, AUDIO_TICK_COUNT);
            let labels = values.iter().map(|v| crate::value::format_number(*v)).collect();
            TickPlan::Thresholds { values, labels, measure }
        }
    }

    /// Index of the tick interval a value falls in.
    fn slot(&self, v: &StepValue) -> Option<usize> {
        match (self, v) {
            (TickPlan::Thresholds { values, measure, .. }, StepValue::Value(x)) => {
                let x = x.ordinal(*measure)?;
                values.iter().rposition(|t| *t <= x)
            }
            _ => None,
        }
    }
}

fn value_label(v: &StepValue, measure: MeasureType) -> String {
    match v {
        StepValue::Value(x) => format_value(x, measure),
        StepValue::Bin { lo, hi, .. } => {
            let f = |x: f64| match measure {
                MeasureType::Temporal => crate::value::instant_from_millis(x)
                    .map(crate::value::format_instant)
                    .unwrap_or_else(|| crate::value::format_number(x)),
                _ => crate::value::format_number(x),
            };
            format!("{} to {}", f(*lo), f(*hi))
        }
    }
}

fn pitch_value(spec: &MultimodalSpec, unit: &AudioUnitSpec, dataset: &Dataset, rows: &[usize]) -> Option<f64> {
    let enc = unit.encoding.get(&Channel::Pitch)?;
    let ci = dataset.column_index(&enc.field)?;
    let xs = dataset.numbers(ci, rows);
    let aggregate = spec.effective_transform(enc).aggregate.unwrap_or(Aggregate::Mean);
    aggregate.apply(&xs)
}

/// Schedules one audio unit. Tones play back to back, one per linearized
/// position; with ticks on, speech cues mark outer-step changes and each
/// tick interval of the innermost step.
pub fn schedule(unit: &AudioUnitSpec, spec: &MultimodalSpec, dataset: &Dataset, options: &ScheduleOptions) -> Result<AudioSchedule, AudioError> {
    if !unit.encoding.contains_key(&Channel::Pitch) {
        return Err(AudioError::MissingPitchEncoding(unit.unit.clone()));
    }
    let order = options.order.clone().unwrap_or_else(|| PlaybackOrder::default_for(unit));
    let rate = if options.rate > 0.0 { options.rate } else { 1.0 };
    let tone = TONE_SECONDS / rate;

    // Pitch domain spans every position of the unfiltered order so that a
    // filter never changes a tone's frequency.
    let all = linearize_items(&order.steps, dataset, &Predicate::True).unwrap_or_default();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for item in &all {
        if let Some(x) = pitch_value(spec, unit, dataset, &item.rows) {
            lo = lo.min(x);
            hi = hi.max(x);
        }
    }
    let scale = if lo <= hi { FrequencyScale::new(lo, hi) } else { FrequencyScale::new(0.0, 0.0) };

    let fixed = Predicate::all(order.fixed.iter().map(|(f, v)| Predicate::equal(f.as_str(), v.clone())));
    let filter = options.filter.clone().and(fixed);
    let items = match linearize_items(&order.steps, dataset, &filter) {
        Ok(items) => items,
        Err(AudioError::EmptyAfterFilter) => Vec::new(),
        Err(e) => return Err(e),
    };

    let measures: Vec<MeasureType> = order.steps.iter().map(|s| dataset.measure_type(&s.field)).collect();
    let plan = order
        .steps
        .last()
        .map(|s| TickPlan::for_step(s, spec, dataset))
        .unwrap_or(TickPlan::EachValue);
    let mut events = Vec::new();
    let mut t = 0.0;
    let mut previous: Option<&LinearItem> = None;
    let mut last_slot: Option<usize> = None;
    if options.ticks && !items.is_empty() {
        for (f, v) in &order.fixed {
            events.push(AudioEvent::SpeechTick(SpeechTickEvent {
                start: 0.0,
                text: format_value(v, dataset.measure_type(f)),
            }));
        }
    }
    for item in &items {
        let Some(x) = pitch_value(spec, unit, dataset, &item.rows) else {
            continue;
        };
        if options.ticks {
            let n = item.indices.len();
            // First step whose value changed since the previous tone.
            let changed = match previous {
                None => 0,
                Some(p) => p.indices.iter().zip(&item.indices).position(|(a, b)| a != b).unwrap_or(n),
            };
            if changed < n.saturating_sub(1) {
                last_slot = None;
            }
            for s in changed..n.saturating_sub(1) {
                events.push(AudioEvent::SpeechTick(SpeechTickEvent {
                    start: t,
                    text: value_label(&item.values[s], measures[s]),
                }));
            }
            if n > 0 && changed < n {
                let inner = &item.values[n - 1];
                match &plan {
                    TickPlan::EachValue => events.push(AudioEvent::SpeechTick(SpeechTickEvent {
                        start: t,
                        text: value_label(inner, measures[n - 1]),
                    })),
                    TickPlan::Thresholds { labels, .. } => {
                        let slot = plan.slot(inner);
                        if let Some(i) = slot.filter(|_| slot != last_slot) {
                            events.push(AudioEvent::SpeechTick(SpeechTickEvent {
                                start: t,
                                text: labels[i].clone(),
                            }));
                        }
                        last_slot = slot;
                    }
                }
            }
        }
        let source = from_audio_position(&order.steps, &item.values, dataset).and(filter.clone());
        events.push(AudioEvent::Tone(ToneEvent {
            start: t,
            duration: tone,
            frequency: scale.frequency(x),
            value: x,
            source_predicate: source,
        }));
        t += tone;
        previous = Some(item);
    }
    Ok(AudioSchedule {
        unit_id: unit.unit.clone(),
        order: order.descriptor,
        scale,
        events,
        total_duration: t,
    })
}

/// Schedules every audio unit of the spec with shared options.
pub fn schedule_all(spec: &MultimodalSpec, dataset: &Dataset, options: &ScheduleOptions) -> Result<Vec<AudioSchedule>, AudioError> {
    spec.audio.iter().map(|u| {
        let opts = ScheduleOptions {
            // A playback order only applies to units whose traversal it was built from.
            order: options.order.clone().filter(|o| {
                let mut a: Vec<&str> = o.steps.iter().map(|s| s.field.as_str()).chain(o.fixed.iter().map(|(f, _)| f.as_str())).collect();
                let mut b: Vec<&str> = u.traversal.iter().map(|s| s.field.as_str()).collect();
                a.sort_unstable();
                b.sort_unstable();
                a == b
            }),
            ..options.clone()
        };
        schedule(u, spec, dataset, &opts)
    }).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct Cue {
    pub time_s: f64,
    pub text: String,
}

/// One rendered audio file.
#[derive(Clone, Debug, PartialEq)]
pub struct RenderedTrack {
    /// Unit ids mixed into this track, joined with `+`.
    pub name: String,
    pub wav: Vec<u8>,
    pub cues: Vec<Cue>,
}

fn synthesize(schedule: &AudioSchedule, sample_rate: u32, frames: usize) -> Vec<f64> {
    let sr = sample_rate as f64;
    let mut buf = vec![0.0; frames];
    let fade = (FADE_SECONDS * sr).round() as usize;
    for tone in schedule.tones() {
        let start = (tone.start * sr).round() as usize;
        let end = (((tone.start + tone.duration) * sr).round() as usize).min(frames);
        let len = end.saturating_sub(start);
        let step = 2.0 * std::f64::consts::PI * tone.frequency / sr;
        for i in 0..len {
            let edge = i.min(len - 1 - i);
            let gain = if fade > 0 && edge < fade { edge as f64 / fade as f64 } else { 1.0 };
            buf[start + i] += AMPLITUDE * gain * (step * i as f64).sin();
        }
    }
    buf
}

fn encode_wav(samples: &[f64], sample_rate: u32) -> Result<Vec<u8>, AudioError> {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut cursor = Cursor::new(Vec::new());
    {
        let mut writer = hound::WavWriter::new(&mut cursor, spec).map_err(|e| AudioError::Wav(e.to_string()))?;
        for s in samples {
            let v = (s.clamp(-1.0, 1.0) * i16::MAX as f64).round() as i16;
            writer.write_sample(v).map_err(|e| AudioError::Wav(e.to_string()))?;
        }
        writer.finalize().map_err(|e| AudioError::Wav(e.to_string()))?;
    }
    Ok(cursor.into_inner())
}

fn cues_of(schedules: &[&AudioSchedule]) -> Vec<Cue> {
    let mut cues: Vec<Cue> = schedules
        .iter()
        .flat_map(|s| {
            s.ticks().map(|t| Cue {
                time_s: t.start,
                text: t.text.clone(),
            })
        })
        .collect();
    cues.sort_by(|a, b| a.time_s.total_cmp(&b.time_s));
    cues
}

/// Renders 16-bit mono PCM. Layered units are mixed into one track (each
/// scaled by 1/n, then clipped); concatenated units get a track each.
pub fn render_wav(schedules: &[AudioSchedule], composition: &ViewComposition, sample_rate: u32) -> Result<Vec<RenderedTrack>, AudioError> {
    if sample_rate == 0 {
        return Err(AudioError::InvalidSampleRate);
    }
    let groups: Vec<Vec<&AudioSchedule>> = match composition.audio {
        CompositionOp::Layer => vec![schedules.iter().collect()],
        CompositionOp::Concat => schedules.iter().map(|s| vec![s]).collect(),
    };
    let mut out = Vec::new();
    for group in groups {
        let duration = group.iter().map(|s| s.total_duration).fold(0.0, f64::max);
        let frames = (duration * sample_rate as f64).round() as usize;
        let mut mix = vec![0.0; frames];
        let n = group.len().max(1) as f64;
        for s in &group {
            for (m, x) in mix.iter_mut().zip(synthesize(s, sample_rate, frames)) {
                *m += x / n;
            }
        }
        out.push(RenderedTrack {
            name: group.iter().map(|s| s.unit_id.as_str()).collect::<Vec<_>>().join("+"),
            wav: encode_wav(&mix, sample_rate)?,
            cues: cues_of(&group),
        });
    }
    Ok(out)
}
