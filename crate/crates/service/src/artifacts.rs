//! Artifact bytes shared by the CLI and the HTTP API, so both emit
//! identical files for identical inputs.

use polymodal_core::audio::{render_wav, schedule_all, AudioError, AudioSchedule, ScheduleOptions};
use polymodal_core::model::MultimodalSpec;
use polymodal_core::text::{build_tree, render_plain, rescope_tree, TextNode};
use polymodal_core::visual::{compile_visual, VisualError};
use polymodal_core::{Dataset, Predicate};
use serde::Serialize;

pub const VISUAL_FILE: &str = "visual.vl.json";
pub const TEXT_FILE: &str = "text.json";
pub const TEXT_PLAIN_FILE: &str = "text.txt";
pub const AUDIO_FILE: &str = "audio.json";
pub const DEFAULT_SAMPLE_RATE: u32 = 44_100;

/// Pretty JSON with a trailing newline.
pub fn json_bytes<T: Serialize + ?Sized>(value: &T) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(value).expect("artifacts serialize");
    out.push(b'\n');
    out
}

/// The dataset with column types taken from the spec where it declares them.
pub fn typed_for(dataset: &Dataset, spec: &MultimodalSpec) -> Dataset {
    let mut ds = dataset.clone();
    let types = spec.fields.iter().map(|f| (f.name.clone(), f.measure_type)).collect();
    ds.assign_types(&types);
    ds
}

/// Spec fields the dataset lacks.
pub fn missing_columns(dataset: &Dataset, spec: &MultimodalSpec) -> Vec<String> {
    spec.fields
        .iter()
        .filter(|f| dataset.column_index(&f.name).is_none())
        .map(|f| f.name.clone())
        .collect()
}

pub fn visual(spec: &MultimodalSpec, dataset: &Dataset) -> Result<Vec<u8>, VisualError> {
    Ok(json_bytes(&compile_visual(spec, dataset)?))
}

pub fn tree(spec: &MultimodalSpec, dataset: &Dataset, filter: &Predicate) -> TextNode {
    let tree = build_tree(spec, dataset);
    if filter.is_true() {
        tree
    } else {
        rescope_tree(&tree, filter, dataset)
    }
}

pub fn text_json(tree: &TextNode) -> Vec<u8> {
    json_bytes(tree)
}

pub fn text_plain(tree: &TextNode) -> Vec<u8> {
    render_plain(tree).into_bytes()
}

pub fn schedules(spec: &MultimodalSpec, dataset: &Dataset, options: &ScheduleOptions) -> Result<Vec<AudioSchedule>, AudioError> {
    schedule_all(spec, dataset, options)
}

pub fn audio_json(schedules: &[AudioSchedule]) -> Vec<u8> {
    json_bytes(schedules)
}

pub struct WavFile {
    pub name: String,
    pub wav: Vec<u8>,
    pub cues: Vec<u8>,
}

/// One WAV and cue sidecar per rendered track.
pub fn wav_files(spec: &MultimodalSpec, schedules: &[AudioSchedule], sample_rate: u32) -> Result<Vec<WavFile>, AudioError> {
    Ok(render_wav(schedules, &spec.composition, sample_rate)?
        .into_iter()
        .map(|t| WavFile {
            name: t.name,
            wav: t.wav,
            cues: json_bytes(&t.cues),
        })
        .collect())
}
