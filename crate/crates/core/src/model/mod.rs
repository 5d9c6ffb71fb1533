//! The multimodal specification.
//!
//! A spec is stored field-first: every [`FieldDef`] lists the encodings it
//! participates in, and every unit carries the full definition of its
//! encodings. The two sides reference each other by name and must agree;
//! [`validate`] checks that they do. [`views`] projects between the two
//! orientations.

mod validate;
pub mod views;

use std::collections::BTreeMap;
use std::fmt;

use schemars::JsonSchema;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

pub use validate::{validate, ValidationReport, Violation};

/// Default number of equal-width bins when a bin flag carries no count.
pub const DEFAULT_BIN_COUNT: u32 = 10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "lowercase")]
pub enum MeasureType {
    Quantitative,
    Nominal,
    Ordinal,
    Temporal,
}

impl MeasureType {
    pub const ALL: [MeasureType; 4] = [
        MeasureType::Quantitative,
        MeasureType::Nominal,
        MeasureType::Ordinal,
        MeasureType::Temporal,
    ];

    /// Continuous types can be binned and placed on a linear or time scale.
    pub fn is_continuous(self) -> bool {
        matches!(self, MeasureType::Quantitative | MeasureType::Temporal)
    }

    /// Heuristics only distinguish temporal, nominal, and quantitative.
    pub fn heuristic_class(self) -> MeasureType {
        match self {
            MeasureType::Ordinal => MeasureType::Nominal,
            other => other,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            MeasureType::Quantitative => "quantitative",
            MeasureType::Nominal => "nominal",
            MeasureType::Ordinal => "ordinal",
            MeasureType::Temporal => "temporal",
        }
    }
}

impl fmt::Display for MeasureType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "lowercase")]
pub enum Aggregate {
    Mean,
    Sum,
    Count,
    Min,
    Max,
}

impl Aggregate {
    pub const ALL: [Aggregate; 5] = [
        Aggregate::Mean,
        Aggregate::Sum,
        Aggregate::Count,
        Aggregate::Min,
        Aggregate::Max,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Aggregate::Mean => "mean",
            Aggregate::Sum => "sum",
            Aggregate::Count => "count",
            Aggregate::Min => "min",
            Aggregate::Max => "max",
        }
    }

    /// Applies the aggregate to the non-null values of a group.
    pub fn apply(self, values: &[f64]) -> Option<f64> {
        if self == Aggregate::Count {
            return Some(values.len() as f64);
        }
        if values.is_empty() {
            return None;
        }
        Some(match self {
            Aggregate::Mean => values.iter().sum::<f64>() / values.len() as f64,
            Aggregate::Sum => values.iter().sum(),
            Aggregate::Min => values.iter().copied().fold(f64::INFINITY, f64::min),
            Aggregate::Max => values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            Aggregate::Count => unreachable!(),
        })
    }
}

/// A bin flag. Serialized as `true` when it carries no count, otherwise as
/// `{"count": n}`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct Bin {
    pub count: Option<u32>,
}

impl Bin {
    pub fn with_count(count: u32) -> Self {
        Bin { count: Some(count) }
    }

    pub fn resolved_count(&self) -> u32 {
        self.count.unwrap_or(DEFAULT_BIN_COUNT).max(1)
    }
}

impl Serialize for Bin {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Counted {
            count: u32,
        }
        match self.count {
            None => serializer.serialize_bool(true),
            Some(count) => Counted { count }.serialize(serializer),
        }
    }
}

impl<'de> Deserialize<'de> for Bin {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Flag(bool),
            Counted { count: u32 },
        }
        match Repr::deserialize(deserializer)? {
            Repr::Flag(true) => Ok(Bin::default()),
            Repr::Flag(false) => Err(serde::de::Error::custom("a disabled bin is written by omitting the key")),
            Repr::Counted { count } => Ok(Bin::with_count(count)),
        }
    }
}

impl JsonSchema for Bin {
    fn schema_name() -> String {
        "Bin".to_string()
    }

    fn json_schema(gen: &mut schemars::gen::SchemaGenerator) -> schemars::schema::Schema {
        #[allow(dead_code)]
        #[derive(JsonSchema)]
        struct Counted {
            count: u32,
        }
        let mut schema = schemars::schema::SchemaObject::default();
        schema.subschemas().one_of = Some(vec![
            schemars::schema::SchemaObject {
                const_value: Some(serde_json::Value::Bool(true)),
                ..Default::default()
            }
            .into(),
            gen.subschema_for::<Counted>(),
        ]);
        schema.into()
    }
}

/// Which kind of unit an encoding lives in.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "lowercase")]
pub enum UnitKind {
    Visual,
    Audio,
}

impl fmt::Display for UnitKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            UnitKind::Visual => "visual",
            UnitKind::Audio => "audio",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "lowercase")]
pub enum Channel {
    X,
    Y,
    Color,
    Size,
    Facet,
    Order,
    Pitch,
    Volume,
}

impl Channel {
    pub const VISUAL: [Channel; 6] = [
        Channel::X,
        Channel::Y,
        Channel::Color,
        Channel::Size,
        Channel::Facet,
        Channel::Order,
    ];
    pub const AUDIO: [Channel; 2] = [Channel::Pitch, Channel::Volume];

    pub fn kind(self) -> UnitKind {
        match self {
            Channel::Pitch | Channel::Volume => UnitKind::Audio,
            _ => UnitKind::Visual,
        }
    }

    pub fn for_kind(kind: UnitKind) -> &'static [Channel] {
        match kind {
            UnitKind::Visual => &Self::VISUAL,
            UnitKind::Audio => &Self::AUDIO,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Channel::X => "x",
            Channel::Y => "y",
            Channel::Color => "color",
            Channel::Size => "size",
            Channel::Facet => "facet",
            Channel::Order => "order",
            Channel::Pitch => "pitch",
            Channel::Volume => "volume",
        }
    }
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A back-reference from a field to the unit encoding that uses it.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, JsonSchema)]
pub struct EncodingRef {
    pub modality: UnitKind,
    pub unit: String,
    pub channel: Channel,
}

impl EncodingRef {
    pub fn new(modality: UnitKind, unit: impl Into<String>, channel: Channel) -> Self {
        EncodingRef {
            modality,
            unit: unit.into(),
            channel,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct FieldDef {
    pub name: String,
    #[serde(rename = "type")]
    pub measure_type: MeasureType,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub aggregate: Option<Aggregate>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bin: Option<Bin>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub encodings: Vec<EncodingRef>,
}

impl FieldDef {
    pub fn new(name: impl Into<String>, measure_type: MeasureType) -> Self {
        FieldDef {
            name: name.into(),
            measure_type,
            aggregate: None,
            bin: None,
            encodings: Vec::new(),
        }
    }
}

/// A channel's field plus transform overrides that shadow the field's own.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
pub struct ChannelEncoding {
    pub field: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub aggregate: Option<Aggregate>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bin: Option<Bin>,
}

impl ChannelEncoding {
    pub fn field(name: impl Into<String>) -> Self {
        ChannelEncoding {
            field: name.into(),
            aggregate: None,
            bin: None,
        }
    }

    pub fn with_aggregate(mut self, aggregate: Aggregate) -> Self {
        self.aggregate = Some(aggregate);
        self
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "lowercase")]
pub enum Mark {
    Point,
    Line,
    Bar,
    Area,
}

impl Mark {
    pub const ALL: [Mark; 4] = [Mark::Point, Mark::Line, Mark::Bar, Mark::Area];

    pub fn as_str(self) -> &'static str {
        match self {
            Mark::Point => "point",
            Mark::Line => "line",
            Mark::Bar => "bar",
            Mark::Area => "area",
        }
    }
}

pub type Encodings = BTreeMap<Channel, ChannelEncoding>;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct VisualUnitSpec {
    pub unit: String,
    pub mark: Mark,
    #[serde(default)]
    pub encoding: Encodings,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, JsonSchema)]
pub struct TraversalStep {
    pub field: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bin: Option<Bin>,
}

impl TraversalStep {
    pub fn field(name: impl Into<String>) -> Self {
        TraversalStep {
            field: name.into(),
            bin: None,
        }
    }

    pub fn binned(name: impl Into<String>) -> Self {
        TraversalStep {
            field: name.into(),
            bin: Some(Bin::default()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct AudioUnitSpec {
    pub unit: String,
    #[serde(default)]
    pub encoding: Encodings,
    #[serde(default)]
    pub traversal: Vec<TraversalStep>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "lowercase")]
pub enum CompositionOp {
    Layer,
    #[default]
    Concat,
}

/// How the units of each modality combine. Every unit of a modality takes
/// part in that modality's composition, in unit-list order.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
pub struct ViewComposition {
    #[serde(default)]
    pub visual: CompositionOp,
    #[serde(default)]
    pub audio: CompositionOp,
}

/// The multimodal specification document.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct MultimodalSpec {
    #[serde(default)]
    pub key: Vec<String>,
    #[serde(default)]
    pub fields: Vec<FieldDef>,
    #[serde(default)]
    pub visual: Vec<VisualUnitSpec>,
    #[serde(default)]
    pub audio: Vec<AudioUnitSpec>,
    #[serde(default)]
    pub composition: ViewComposition,
}

/// The transform that applies to a field on one channel after overrides.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct EffectiveTransform {
    pub aggregate: Option<Aggregate>,
    pub bin: Option<Bin>,
}

impl MultimodalSpec {
    pub fn field(&self, name: &str) -> Option<&FieldDef> {
        self.fields.iter().find(|f| f.name == name)
    }

    pub fn field_mut(&mut self, name: &str) -> Option<&mut FieldDef> {
        self.fields.iter_mut().find(|f| f.name == name)
    }

    pub fn visual_unit(&self, unit: &str) -> Option<&VisualUnitSpec> {
        self.visual.iter().find(|u| u.unit == unit)
    }

    pub fn audio_unit(&self, unit: &str) -> Option<&AudioUnitSpec> {
        self.audio.iter().find(|u| u.unit == unit)
    }

    pub fn unit_encodings(&self, kind: UnitKind, unit: &str) -> Option<&Encodings> {
        match kind {
            UnitKind::Visual => self.visual_unit(unit).map(|u| &u.encoding),
            UnitKind::Audio => self.audio_unit(unit).map(|u| &u.encoding),
        }
    }

    pub fn unit_encodings_mut(&mut self, kind: UnitKind, unit: &str) -> Option<&mut Encodings> {
        match kind {
            UnitKind::Visual => self.visual.iter_mut().find(|u| u.unit == unit).map(|u| &mut u.encoding),
            UnitKind::Audio => self.audio.iter_mut().find(|u| u.unit == unit).map(|u| &mut u.encoding),
        }
    }

    pub fn unit_ids(&self) -> impl Iterator<Item = (UnitKind, &str)> {
        self.visual
            .iter()
            .map(|u| (UnitKind::Visual, u.unit.as_str()))
            .chain(self.audio.iter().map(|u| (UnitKind::Audio, u.unit.as_str())))
    }

    pub fn measure_type(&self, field: &str) -> Option<MeasureType> {
        self.field(field).map(|f| f.measure_type)
    }

    /// Field transform shadowed by the channel's overrides.
    pub fn effective_transform(&self, encoding: &ChannelEncoding) -> EffectiveTransform {
        let base = self.field(&encoding.field);
        EffectiveTransform {
            aggregate: encoding.aggregate.or(base.and_then(|f| f.aggregate)),
            bin: encoding.bin.or(base.and_then(|f| f.bin)),
        }
    }

    /// Binds `field` to `(kind, unit, channel)` on both sides of the spec.
    /// The caller is responsible for the slot being free.
    pub fn bind(&mut self, field: &str, kind: UnitKind, unit: &str, channel: Channel, encoding: ChannelEncoding) {
        if let Some(encodings) = self.unit_encodings_mut(kind, unit) {
            encodings.insert(channel, encoding);
        }
        if let Some(def) = self.field_mut(field) {
            def.encodings.push(EncodingRef::new(kind, unit, channel));
        }
    }

    /// Removes whatever is bound to `(kind, unit, channel)` on both sides.
    pub fn unbind(&mut self, kind: UnitKind, unit: &str, channel: Channel) -> Option<ChannelEncoding> {
        let removed = self.unit_encodings_mut(kind, unit).and_then(|e| e.remove(&channel));
        for def in &mut self.fields {
            def.encodings
                .retain(|r| !(r.modality == kind && r.unit == unit && r.channel == channel));
        }
        removed
    }

    /// Encoding refs sorted into the canonical order: visual units before
    /// audio units, units in list order, channels in declaration order.
    pub fn normalized(&self) -> MultimodalSpec {
        let mut spec = self.clone();
        let unit_rank: Vec<(UnitKind, String)> = self.unit_ids().map(|(k, u)| (k, u.to_string())).collect();
        let rank = |r: &EncodingRef| {
            let pos = unit_rank
                .iter()
                .position(|(k, u)| *k == r.modality && *u == r.unit)
                .unwrap_or(usize::MAX);
            (pos, r.channel)
        };
        for f in &mut spec.fields {
            f.encodings.sort_by_key(|r| rank(r));
        }
        spec
    }
}
