//! JSON Schemas for every document exchanged with the outside world.

use schemars::schema_for;
use serde_json::Value as Json;

use crate::audio::{AudioSchedule, Cue, ScheduleOptions};
use crate::editor::{EditAction, EditorState};
use crate::model::{MultimodalSpec, ValidationReport};
use crate::predicate::{Predicate, SyncMessage};
use crate::text::TextNode;

/// `(name, schema)` pairs; files ship as `schemas/{name}.schema.json`.
pub fn all() -> Vec<(&'static str, Json)> {
    fn json(s: schemars::schema::RootSchema) -> Json {
        serde_json::to_value(s).expect("schemas serialize")
    }
    vec![
        ("multimodal-spec", json(schema_for!(MultimodalSpec))),
        ("predicate", json(schema_for!(Predicate))),
        ("sync-message", json(schema_for!(SyncMessage))),
        ("edit-action", json(schema_for!(EditAction))),
        ("editor-state", json(schema_for!(EditorState))),
        ("validation-report", json(schema_for!(ValidationReport))),
        ("text-node", json(schema_for!(TextNode))),
        ("audio-schedule", json(schema_for!(AudioSchedule))),
        ("schedule-options", json(schema_for!(ScheduleOptions))),
        ("cues", json(schema_for!(Vec<Cue>))),
    ]
}

pub fn get(name: &str) -> Option<Json> {
    all().into_iter().find(|(n, _)| *n == name).map(|(_, s)| s)
}
