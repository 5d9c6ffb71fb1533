//! Structured editing: a state machine whose every action moves between
//! valid specs.

use std::collections::HashSet;

use schemars::JsonSchema;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::defaults::{defaults_for_selection, field_defs};
use crate::ingest::{infer_key, DataFormat, Dataset, IngestError};
use crate::model::{
    validate, Aggregate, AudioUnitSpec, Bin, Channel, ChannelEncoding, CompositionOp, FieldDef, Mark, MeasureType,
    MultimodalSpec, TraversalStep, UnitKind, ValidationReport, VisualUnitSpec,
};
use crate::value::parse_instant;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "lowercase")]
pub enum Tab {
    #[default]
    Data,
    Fields,
    Visual,
    Audio,
}

impl Tab {
    pub const ALL: [Tab; 4] = [Tab::Data, Tab::Fields, Tab::Visual, Tab::Audio];
}

/// One encoding slot.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, JsonSchema)]
pub struct Slot {
    pub modality: UnitKind,
    pub unit: String,
    pub channel: Channel,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(tag = "action", rename_all = "kebab-case")]
pub enum EditAction {
    LoadDataset {
        content: String,
        format: DataFormat,
    },
    ToggleField {
        field: String,
    },
    SetMeasureType {
        field: String,
        measure_type: MeasureType,
    },
    SetTransform {
        field: String,
        #[serde(default)]
        aggregate: Option<Aggregate>,
        #[serde(default)]
        bin: Option<Bin>,
    },
    AddEncoding {
        field: String,
        slot: Slot,
    },
    RemoveEncoding {
        slot: Slot,
    },
    MoveEncoding {
        from: Slot,
        to: Slot,
    },
    SetMark {
        unit: String,
        mark: Mark,
    },
    AddUnit {
        modality: UnitKind,
    },
    RemoveUnit {
        modality: UnitKind,
        unit: String,
    },
    SetTraversal {
        unit: String,
        traversal: Vec<TraversalStep>,
    },
    SetComposition {
        modality: UnitKind,
        op: CompositionOp,
    },
    SwitchTab {
        tab: Tab,
    },
}

#[derive(Debug, Error)]
pub enum EditError {
    #[error("action is not available: {0}")]
    InvalidAction(String),
    #[error("action would produce an invalid spec:\n{0}")]
    InvalidResult(ValidationReport),
    #[error(transparent)]
    Ingest(#[from] IngestError),
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct EditorState {
    pub dataset: Dataset,
    /// Checked fields, in dataset column order.
    pub selected_fields: Vec<String>,
    pub spec: MultimodalSpec,
    pub active_tab: Tab,
    /// Set once a manual edit makes the spec diverge from generated defaults.
    pub dirty_defaults: bool,
}

/// Broken state invariants, if any.
pub fn check_state(state: &EditorState) -> Vec<String> {
    let mut problems: Vec<String> = validate(&state.spec)
        .violations
        .into_iter()
        .map(|v| format!("{} at {}", v.code, v.path))
        .collect();
    for f in &state.selected_fields {
        if state.dataset.column_index(f).is_none() {
            problems.push(format!("selected field `{f}` is not a column"));
        }
    }
    for f in &state.spec.fields {
        if !state.selected_fields.contains(&f.name) {
            problems.push(format!("spec field `{}` is not selected", f.name));
        }
    }
    problems
}

impl EditorState {
    pub fn new(dataset: Dataset) -> EditorState {
        let selected: Vec<String> = dataset.columns.iter().map(|c| c.name.clone()).collect();
        let spec = defaults_for_selection(&dataset, &selected);
        EditorState {
            dataset,
            selected_fields: selected,
            spec,
            active_tab: Tab::Data,
            dirty_defaults: false,
        }
    }

    fn ordered_selection(&self, mut names: Vec<String>) -> Vec<String> {
        names.sort_by_key(|n| self.dataset.column_index(n).unwrap_or(usize::MAX));
        names.dedup();
        names
    }

    fn bound(&self, slot: &Slot) -> Option<&ChannelEncoding> {
        self.spec.unit_encodings(slot.modality, &slot.unit)?.get(&slot.channel)
    }

    fn unit_exists(&self, kind: UnitKind, unit: &str) -> bool {
        self.spec.unit_encodings(kind, unit).is_some()
    }

    fn field_is_binned(&self, field: &str) -> bool {
        let spec = &self.spec;
        spec.field(field).is_some_and(|f| f.bin.is_some())
            || spec
                .visual
                .iter()
                .flat_map(|u| u.encoding.values())
                .chain(spec.audio.iter().flat_map(|u| u.encoding.values()))
                .any(|e| e.field == field && e.bin.is_some())
            || spec
                .audio
                .iter()
                .flat_map(|u| &u.traversal)
                .any(|s| s.field == field && s.bin.is_some())
    }

    /// Measure types the column's values support.
    fn admissible_types(&self, field: &str) -> Vec<MeasureType> {
        let Some(ci) = self.dataset.column_index(field) else {
            return Vec::new();
        };
        let values: Vec<_> = self.dataset.rows.iter().map(|r| &r[ci]).filter(|v| !v.is_null()).collect();
        let mut out = vec![MeasureType::Nominal, MeasureType::Ordinal];
        if values.iter().all(|v| v.as_f64().is_some()) {
            out.push(MeasureType::Quantitative);
        }
        if values.iter().all(|v| parse_instant(v).is_some()) {
            out.push(MeasureType::Temporal);
        }
        out
    }

    fn next_unit_id(&self, kind: UnitKind) -> String {
        let prefix = match kind {
            UnitKind::Visual => "visual",
            UnitKind::Audio => "audio",
        };
        (0..)
            .map(|i| format!("{prefix}_{i}"))
            .find(|id| !self.unit_exists(kind, id))
            .expect("unbounded search")
    }

    fn slots(&self) -> Vec<(Slot, Option<&ChannelEncoding>)> {
        let mut out = Vec::new();
        for u in &self.spec.visual {
            for c in Channel::VISUAL {
                let slot = Slot {
                    modality: UnitKind::Visual,
                    unit: u.unit.clone(),
                    channel: c,
                };
                out.push((slot, u.encoding.get(&c)));
            }
        }
        for u in &self.spec.audio {
            for c in Channel::AUDIO {
                let slot = Slot {
                    modality: UnitKind::Audio,
                    unit: u.unit.clone(),
                    channel: c,
                };
                out.push((slot, u.encoding.get(&c)));
            }
        }
        out
    }

    /// Whether `field` may occupy a free `slot`.
    fn can_place(&self, field: &str, slot: &Slot) -> bool {
        match slot.modality {
            UnitKind::Visual if slot.channel == Channel::Facet && self.spec.composition.visual == CompositionOp::Layer => {
                self.spec
                    .visual
                    .iter()
                    .filter(|u| u.unit != slot.unit)
                    .filter_map(|u| u.encoding.get(&Channel::Facet))
                    .all(|e| e.field == field)
            }
            UnitKind::Visual => true,
            UnitKind::Audio => {
                self.spec.measure_type(field) == Some(MeasureType::Quantitative)
                    && self.spec.audio_unit(&slot.unit).is_some_and(|u| !u.traversal.is_empty())
            }
        }
    }

    /// Candidate traversals offered for an audio unit: each ordering of the
    /// key, and each single field (binned when continuous).
    fn traversal_choices(&self) -> Vec<Vec<TraversalStep>> {
        let mut out: Vec<Vec<TraversalStep>> = Vec::new();
        let key = &self.spec.key;
        if !key.is_empty() && key.len() <= 4 {
            for perm in permutations(key) {
                out.push(perm.into_iter().map(TraversalStep::field).collect());
            }
        }
        for f in &self.spec.fields {
            let step = if f.measure_type.is_continuous() && !key.contains(&f.name) {
                TraversalStep::binned(f.name.as_str())
            } else {
                TraversalStep::field(f.name.as_str())
            };
            let t = vec![step];
            if !out.contains(&t) {
                out.push(t);
            }
        }
        out
    }
}

fn permutations(items: &[String]) -> Vec<Vec<String>> {
    if items.len() <= 1 {
        return vec![items.to_vec()];
    }
    let mut out = Vec::new();
    for i in 0..items.len() {
        let mut rest = items.to_vec();
        let head = rest.remove(i);
        for mut p in permutations(&rest) {
            p.insert(0, head.clone());
            out.push(p);
        }
    }
    out
}

/// Every action that, applied to `state`, yields a valid state.
/// `LoadDataset` appears as a template with empty content.
pub fn available_actions(state: &EditorState) -> Vec<EditAction> {
    let mut out = vec![EditAction::LoadDataset {
        content: String::new(),
        format: DataFormat::Csv,
    }];
    for tab in Tab::ALL {
        if tab != state.active_tab {
            out.push(EditAction::SwitchTab { tab });
        }
    }
    if state.dataset.columns.is_empty() {
        return out;
    }
    let spec = &state.spec;

    for c in &state.dataset.columns {
        out.push(EditAction::ToggleField { field: c.name.clone() });
    }

    for f in &spec.fields {
        for m in state.admissible_types(&f.name) {
            if m != f.measure_type && (m.is_continuous() || !state.field_is_binned(&f.name)) {
                out.push(EditAction::SetMeasureType {
                    field: f.name.clone(),
                    measure_type: m,
                });
            }
        }
        let aggregates = std::iter::once(None).chain(Aggregate::ALL.into_iter().map(Some));
        for aggregate in aggregates {
            let bins: Vec<Option<Bin>> = if f.measure_type.is_continuous() {
                vec![None, Some(Bin::default())]
            } else {
                vec![None]
            };
            for bin in bins {
                if aggregate != f.aggregate || bin != f.bin {
                    out.push(EditAction::SetTransform {
                        field: f.name.clone(),
                        aggregate,
                        bin,
                    });
                }
            }
        }
    }

    let slots = state.slots();
    for (slot, bound) in &slots {
        match bound {
            None => {
                for f in &spec.fields {
                    if state.can_place(&f.name, slot) {
                        out.push(EditAction::AddEncoding {
                            field: f.name.clone(),
                            slot: slot.clone(),
                        });
                    }
                }
            }
            Some(enc) => {
                out.push(EditAction::RemoveEncoding { slot: slot.clone() });
                for (to, to_bound) in &slots {
                    if to_bound.is_none() && state.can_place(&enc.field, to) {
                        out.push(EditAction::MoveEncoding {
                            from: slot.clone(),
                            to: to.clone(),
                        });
                    }
                }
            }
        }
    }

    for u in &spec.visual {
        for mark in Mark::ALL {
            if mark != u.mark {
                out.push(EditAction::SetMark {
                    unit: u.unit.clone(),
                    mark,
                });
            }
        }
        out.push(EditAction::RemoveUnit {
            modality: UnitKind::Visual,
            unit: u.unit.clone(),
        });
    }
    out.push(EditAction::AddUnit {
        modality: UnitKind::Visual,
    });
    out.push(EditAction::AddUnit {
        modality: UnitKind::Audio,
    });

    let choices = state.traversal_choices();
    for u in &spec.audio {
        out.push(EditAction::RemoveUnit {
            modality: UnitKind::Audio,
            unit: u.unit.clone(),
        });
        for t in &choices {
            if *t != u.traversal {
                out.push(EditAction::SetTraversal {
                    unit: u.unit.clone(),
                    traversal: t.clone(),
                });
            }
        }
    }

    for op in [CompositionOp::Layer, CompositionOp::Concat] {
        let facets: HashSet<&str> = spec
            .visual
            .iter()
            .filter_map(|u| u.encoding.get(&Channel::Facet))
            .map(|e| e.field.as_str())
            .collect();
        if op != spec.composition.visual && (op == CompositionOp::Concat || facets.len() <= 1) {
            out.push(EditAction::SetComposition {
                modality: UnitKind::Visual,
                op,
            });
        }
        let shared = spec.audio.windows(2).all(|w| w[0].traversal == w[1].traversal);
        if op != spec.composition.audio && (op == CompositionOp::Concat || shared) {
            out.push(EditAction::SetComposition {
                modality: UnitKind::Audio,
                op,
            });
        }
    }
    out
}

fn invalid(msg: impl Into<String>) -> EditError {
    EditError::InvalidAction(msg.into())
}

/// Removes a field and everything that refers to it. Audio units left with
/// encodings but no traversal are removed with it.
fn drop_field(spec: &mut MultimodalSpec, field: &str) {
    let refs = spec.field(field).map(|f| f.encodings.clone()).unwrap_or_default();
    for r in refs {
        spec.unbind(r.modality, &r.unit, r.channel);
    }
    spec.fields.retain(|f| f.name != field);
    spec.key.retain(|k| k != field);
    for u in &mut spec.audio {
        u.traversal.retain(|s| s.field != field);
    }
    let orphaned: Vec<String> = spec
        .audio
        .iter()
        .filter(|u| u.traversal.is_empty() && !u.encoding.is_empty())
        .map(|u| u.unit.clone())
        .collect();
    for unit in orphaned {
        remove_unit(spec, UnitKind::Audio, &unit);
    }
}

fn remove_unit(spec: &mut MultimodalSpec, kind: UnitKind, unit: &str) {
    for f in &mut spec.fields {
        f.encodings.retain(|r| !(r.modality == kind && r.unit == unit));
    }
    match kind {
        UnitKind::Visual => spec.visual.retain(|u| u.unit != unit),
        UnitKind::Audio => spec.audio.retain(|u| u.unit != unit),
    }
}

/// Applies one action. The result always satisfies the state invariants;
/// actions that cannot are rejected.
pub fn apply_edit(state: &EditorState, action: &EditAction) -> Result<EditorState, EditError> {
    let mut next = state.clone();
    let mut manual = true;
    match action {
        EditAction::LoadDataset { content, format } => {
            let dataset = Dataset::load_typed(content.as_bytes(), *format)?;
            let tab = state.active_tab;
            next = EditorState::new(dataset);
            next.active_tab = tab;
            manual = false;
        }
        EditAction::SwitchTab { tab } => {
            next.active_tab = *tab;
            manual = false;
        }
        EditAction::ToggleField { field } => {
            if state.dataset.column_index(field).is_none() {
                return Err(invalid(format!("no column `{field}`")));
            }
            let on = !state.selected_fields.contains(field);
            let mut selected = state.selected_fields.clone();
            if on {
                selected.push(field.clone());
            } else {
                selected.retain(|f| f != field);
            }
            next.selected_fields = next.ordered_selection(selected);
            if state.dirty_defaults {
                if on {
                    let def = field_defs(&state.dataset, std::slice::from_ref(field))
                        .pop()
                        .expect("column exists");
                    next.spec.fields.push(def);
                    let order = next.selected_fields.clone();
                    next.spec
                        .fields
                        .sort_by_key(|f| order.iter().position(|n| *n == f.name).unwrap_or(usize::MAX));
                } else {
                    drop_field(&mut next.spec, field);
                }
            } else {
                next.spec = defaults_for_selection(&state.dataset, &next.selected_fields);
                manual = false;
            }
        }
        EditAction::SetMeasureType { field, measure_type } => {
            if state.spec.field(field).is_none() {
                return Err(invalid(format!("field `{field}` is not in the spec")));
            }
            if !state.admissible_types(field).contains(measure_type) {
                return Err(invalid(format!("`{field}` values cannot be read as {measure_type}")));
            }
            next.spec.field_mut(field).expect("checked").measure_type = *measure_type;
            if let Some(ci) = next.dataset.column_index(field) {
                next.dataset.columns[ci].measure_type = Some(*measure_type);
            }
        }
        EditAction::SetTransform { field, aggregate, bin } => {
            let def = next
                .spec
                .field_mut(field)
                .ok_or_else(|| invalid(format!("field `{field}` is not in the spec")))?;
            def.aggregate = *aggregate;
            def.bin = *bin;
        }
        EditAction::AddEncoding { field, slot } => {
            if state.spec.field(field).is_none() {
                return Err(invalid(format!("field `{field}` is not in the spec")));
            }
            if !state.unit_exists(slot.modality, &slot.unit) {
                return Err(invalid(format!("no {} unit `{}`", slot.modality, slot.unit)));
            }
            if state.bound(slot).is_some() {
                return Err(invalid(format!("`{}` of `{}` is already bound", slot.channel, slot.unit)));
            }
            if !state.can_place(field, slot) {
                return Err(invalid(format!("`{field}` cannot be placed on `{}`", slot.channel)));
            }
            next.spec
                .bind(field, slot.modality, &slot.unit, slot.channel, ChannelEncoding::field(field.as_str()));
        }
        EditAction::RemoveEncoding { slot } => {
            if state.bound(slot).is_none() {
                return Err(invalid(format!("`{}` of `{}` is not bound", slot.channel, slot.unit)));
            }
            next.spec.unbind(slot.modality, &slot.unit, slot.channel);
        }
        EditAction::MoveEncoding { from, to } => {
            let enc = state
                .bound(from)
                .cloned()
                .ok_or_else(|| invalid(format!("`{}` of `{}` is not bound", from.channel, from.unit)))?;
            if !state.unit_exists(to.modality, &to.unit) || state.bound(to).is_some() {
                return Err(invalid(format!("`{}` of `{}` is not free", to.channel, to.unit)));
            }
            if !state.can_place(&enc.field, to) {
                return Err(invalid(format!("`{}` cannot be placed on `{}`", enc.field, to.channel)));
            }
            next.spec.unbind(from.modality, &from.unit, from.channel);
            let field = enc.field.clone();
            next.spec.bind(&field, to.modality, &to.unit, to.channel, enc);
        }
        EditAction::SetMark { unit, mark } => {
            let u = next
                .spec
                .visual
                .iter_mut()
                .find(|u| u.unit == *unit)
                .ok_or_else(|| invalid(format!("no visual unit `{unit}`")))?;
            u.mark = *mark;
        }
        EditAction::AddUnit { modality } => {
            if state.dataset.columns.is_empty() {
                return Err(invalid("no dataset loaded"));
            }
            let id = state.next_unit_id(*modality);
            match modality {
                UnitKind::Visual => next.spec.visual.push(VisualUnitSpec {
                    unit: id,
                    mark: Mark::Point,
                    encoding: Default::default(),
                }),
                UnitKind::Audio => {
                    // Layered units share one traversal; otherwise start from the key.
                    let traversal = match (state.spec.composition.audio, state.spec.audio.first()) {
                        (CompositionOp::Layer, Some(first)) => first.traversal.clone(),
                        _ => state.spec.key.iter().map(|k| TraversalStep::field(k.as_str())).collect(),
                    };
                    next.spec.audio.push(AudioUnitSpec {
                        unit: id,
                        encoding: Default::default(),
                        traversal,
                    });
                }
            }
        }
        EditAction::RemoveUnit { modality, unit } => {
            if !state.unit_exists(*modality, unit) {
                return Err(invalid(format!("no {modality} unit `{unit}`")));
            }
            remove_unit(&mut next.spec, *modality, unit);
        }
        EditAction::SetTraversal { unit, traversal } => {
            if state.spec.audio_unit(unit).is_none() {
                return Err(invalid(format!("no audio unit `{unit}`")));
            }
            // Layered units move together to keep sharing one traversal.
            let layered = state.spec.composition.audio == CompositionOp::Layer;
            for u in &mut next.spec.audio {
                if layered || u.unit == *unit {
                    u.traversal = traversal.clone();
                }
            }
        }
        EditAction::SetComposition { modality, op } => match modality {
            UnitKind::Visual => next.spec.composition.visual = *op,
            UnitKind::Audio => next.spec.composition.audio = *op,
        },
    }
    if manual {
        next.dirty_defaults = true;
    }
    next.spec = next.spec.normalized();
    let report = validate(&next.spec);
    if !report.is_valid() {
        return Err(EditError::InvalidResult(report));
    }
    Ok(next)
}

/// Replays an action log from an empty state.
pub fn replay(actions: &[EditAction]) -> Result<EditorState, EditError> {
    actions
        .iter()
        .try_fold(EditorState::default(), |s, a| apply_edit(&s, a))
}

/// Key inferred over the current selection.
pub fn selection_key(state: &EditorState) -> Vec<String> {
    infer_key(&state.dataset, &state.selected_fields)
}

/// Field definitions for the current selection, as defaults would type them.
pub fn selection_fields(state: &EditorState) -> Vec<FieldDef> {
    field_defs(&state.dataset, &state.selected_fields)
}
