//! Encoding-oriented projection of a spec and its inverse.
//!
//! The field-oriented form ([`MultimodalSpec`]) nests encoding references
//! under fields. The encoding-oriented form groups everything by unit, with
//! each encoding carrying its field's full definition.

use std::collections::{BTreeMap, HashSet};

use schemars::JsonSchema;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{
    validate, Aggregate, AudioUnitSpec, Bin, Channel, ChannelEncoding, EncodingRef, FieldDef, Mark,
    MeasureType, MultimodalSpec, TraversalStep, UnitKind, ValidationReport, ViewComposition, VisualUnitSpec,
};

#[derive(Debug, Error)]
pub enum ViewError {
    #[error("invalid spec:\n{0}")]
    InvalidSpec(ValidationReport),
    #[error("inconsistent view: {0}")]
    InconsistentView(String),
}

/// Field declaration without its encodings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct FieldDecl {
    pub name: String,
    #[serde(rename = "type")]
    pub measure_type: MeasureType,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub aggregate: Option<Aggregate>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bin: Option<Bin>,
}

/// An encoding with its field definition nested inside. `aggregate` and
/// `bin` are the channel's overrides; the field's own transforms live in
/// the matching [`FieldDecl`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct EncodingDef {
    pub field: String,
    #[serde(rename = "type")]
    pub measure_type: MeasureType,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub aggregate: Option<Aggregate>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bin: Option<Bin>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct VisualUnitView {
    pub unit: String,
    pub mark: Mark,
    pub encoding: BTreeMap<Channel, EncodingDef>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct AudioUnitView {
    pub unit: String,
    pub encoding: BTreeMap<Channel, EncodingDef>,
    pub traversal: Vec<TraversalStep>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct EncodingView {
    #[serde(default)]
    pub key: Vec<String>,
    #[serde(default)]
    pub fields: Vec<FieldDecl>,
    #[serde(default)]
    pub visual: Vec<VisualUnitView>,
    #[serde(default)]
    pub audio: Vec<AudioUnitView>,
    #[serde(default)]
    pub composition: ViewComposition,
}

fn encoding_def(spec: &MultimodalSpec, enc: &ChannelEncoding) -> EncodingDef {
    EncodingDef {
        field: enc.field.clone(),
        measure_type: spec.measure_type(&enc.field).unwrap_or(MeasureType::Nominal),
        aggregate: enc.aggregate,
        bin: enc.bin,
    }
}

/// Groups a valid spec by unit.
pub fn to_encoding_view(spec: &MultimodalSpec) -> Result<EncodingView, ViewError> {
    let report = validate(spec);
    if !report.is_valid() {
        return Err(ViewError::InvalidSpec(report));
    }
    Ok(EncodingView {
        key: spec.key.clone(),
        fields: spec
            .fields
            .iter()
            .map(|f| FieldDecl {
                name: f.name.clone(),
                measure_type: f.measure_type,
                aggregate: f.aggregate,
                bin: f.bin,
            })
            .collect(),
        visual: spec
            .visual
            .iter()
            .map(|u| VisualUnitView {
                unit: u.unit.clone(),
                mark: u.mark,
                encoding: u.encoding.iter().map(|(c, e)| (*c, encoding_def(spec, e))).collect(),
            })
            .collect(),
        audio: spec
            .audio
            .iter()
            .map(|u| AudioUnitView {
                unit: u.unit.clone(),
                encoding: u.encoding.iter().map(|(c, e)| (*c, encoding_def(spec, e))).collect(),
                traversal: u.traversal.clone(),
            })
            .collect(),
        composition: spec.composition,
    })
}

/// Rebuilds the field-oriented spec, nesting a reference under each field
/// for every encoding that uses it. Refs come out in canonical order.
pub fn to_field_view(view: &EncodingView) -> Result<MultimodalSpec, ViewError> {
    let mut fields: Vec<FieldDef> = Vec::with_capacity(view.fields.len());
    for decl in &view.fields {
        if fields.iter().any(|f| f.name == decl.name) {
            return Err(ViewError::InconsistentView(format!("field `{}` is declared twice", decl.name)));
        }
        fields.push(FieldDef {
            name: decl.name.clone(),
            measure_type: decl.measure_type,
            aggregate: decl.aggregate,
            bin: decl.bin,
            encodings: Vec::new(),
        });
    }

    let mut claimed: HashSet<(UnitKind, String, Channel)> = HashSet::new();
    let mut attach = |fields: &mut Vec<FieldDef>,
                      kind: UnitKind,
                      unit: &str,
                      channel: Channel,
                      def: &EncodingDef|
     -> Result<ChannelEncoding, ViewError> {
        if !claimed.insert((kind, unit.to_string(), channel)) {
            return Err(ViewError::InconsistentView(format!(
                "two encodings claim `{channel}` of {kind} unit `{unit}`"
            )));
        }
        let field = fields
            .iter_mut()
            .find(|f| f.name == def.field)
            .ok_or_else(|| ViewError::InconsistentView(format!("encoding uses undeclared field `{}`", def.field)))?;
        if field.measure_type != def.measure_type {
            return Err(ViewError::InconsistentView(format!(
                "`{}` is declared {} but encoded as {}",
                def.field, field.measure_type, def.measure_type
            )));
        }
        field.encodings.push(EncodingRef::new(kind, unit, channel));
        Ok(ChannelEncoding {
            field: def.field.clone(),
            aggregate: def.aggregate,
            bin: def.bin,
        })
    };

    let mut visual = Vec::with_capacity(view.visual.len());
    for u in &view.visual {
        let mut encoding = BTreeMap::new();
        for (channel, def) in &u.encoding {
            encoding.insert(*channel, attach(&mut fields, UnitKind::Visual, &u.unit, *channel, def)?);
        }
        visual.push(VisualUnitSpec {
            unit: u.unit.clone(),
            mark: u.mark,
            encoding,
        });
    }
    let mut audio = Vec::with_capacity(view.audio.len());
    for u in &view.audio {
        let mut encoding = BTreeMap::new();
        for (channel, def) in &u.encoding {
            encoding.insert(*channel, attach(&mut fields, UnitKind::Audio, &u.unit, *channel, def)?);
        }
        audio.push(AudioUnitSpec {
            unit: u.unit.clone(),
            encoding,
            traversal: u.traversal.clone(),
        });
    }

    Ok(MultimodalSpec {
        key: view.key.clone(),
        fields,
        visual,
        audio,
        composition: view.composition,
    })
}
