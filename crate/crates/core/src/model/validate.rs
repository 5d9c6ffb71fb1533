use std::collections::{BTreeMap, HashSet};

use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use super::{Channel, MultimodalSpec, UnitKind};
use crate::model::CompositionOp;

/// One broken invariant: a machine-readable code and the offending path.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
pub struct Violation {
    pub code: String,
    pub path: String,
    pub message: String,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn codes(&self) -> Vec<&str> {
        self.violations.iter().map(|v| v.code.as_str()).collect()
    }

    fn push(&mut self, code: &str, path: impl Into<String>, message: impl Into<String>) {
        self.violations.push(Violation {
            code: code.to_string(),
            path: path.into(),
            message: message.into(),
        });
    }
}

impl std::fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for v in &self.violations {
            writeln!(f, "{} at {}: {}", v.code, v.path, v.message)?;
        }
        Ok(())
    }
}

/// Checks every spec invariant and reports all violations. An empty report
/// means the spec is valid.
pub fn validate(spec: &MultimodalSpec) -> ValidationReport {
    let mut report = ValidationReport::default();

    let mut names = HashSet::new();
    for (i, f) in spec.fields.iter().enumerate() {
        if f.name.trim().is_empty() {
            report.push("empty-field-name", format!("fields[{i}].name"), "field name is empty");
        } else if !names.insert(f.name.as_str()) {
            report.push("duplicate-field", format!("fields[{i}].name"), format!("field `{}` is defined twice", f.name));
        }
        if f.bin.is_some() && !f.measure_type.is_continuous() {
            report.push(
                "bin-on-discrete-field",
                format!("fields[{i}].bin"),
                format!("`{}` is {} and cannot be binned", f.name, f.measure_type),
            );
        }
    }

    let mut seen_keys = HashSet::new();
    for (i, k) in spec.key.iter().enumerate() {
        if spec.field(k).is_none() {
            report.push("unknown-key-field", format!("key[{i}]"), format!("key field `{k}` is not defined"));
        }
        if !seen_keys.insert(k.as_str()) {
            report.push("duplicate-key-field", format!("key[{i}]"), format!("key field `{k}` repeats"));
        }
    }

    let mut unit_ids: HashSet<(UnitKind, &str)> = HashSet::new();
    for (kind, unit) in spec.unit_ids() {
        let idx = match kind {
            UnitKind::Visual => spec.visual.iter().position(|u| u.unit == unit),
            UnitKind::Audio => spec.audio.iter().position(|u| u.unit == unit),
        }
        .unwrap_or(0);
        if unit.trim().is_empty() {
            report.push("empty-unit-id", format!("{kind}[{idx}].unit"), "unit id is empty");
        }
        if !unit_ids.insert((kind, unit)) {
            report.push("duplicate-unit", format!("{kind}[{idx}].unit"), format!("unit `{unit}` is defined twice"));
        }
    }

    // Field side: collect claims per (unit, channel).
    let mut claims: BTreeMap<(UnitKind, &str, Channel), Vec<(usize, usize)>> = BTreeMap::new();
    for (fi, f) in spec.fields.iter().enumerate() {
        for (ri, r) in f.encodings.iter().enumerate() {
            let path = format!("fields[{fi}].encodings[{ri}]");
            if r.channel.kind() != r.modality {
                report.push(
                    "channel-modality-mismatch",
                    path,
                    format!("channel `{}` does not belong to the {} modality", r.channel, r.modality),
                );
                continue;
            }
            if !unit_ids.contains(&(r.modality, r.unit.as_str())) {
                report.push("dangling-ref", path, format!("no {} unit named `{}`", r.modality, r.unit));
                continue;
            }
            claims.entry((r.modality, r.unit.as_str(), r.channel)).or_default().push((fi, ri));
        }
    }

    for ((kind, unit, channel), owners) in &claims {
        if owners.len() > 1 {
            let (fi, ri) = owners[1];
            let fields: Vec<&str> = owners.iter().map(|(f, _)| spec.fields[*f].name.as_str()).collect();
            report.push(
                "duplicate-channel",
                format!("fields[{fi}].encodings[{ri}]"),
                format!("channel `{channel}` of {kind} unit `{unit}` is claimed by {}", fields.join(", ")),
            );
            continue;
        }
        let (fi, ri) = owners[0];
        let field = &spec.fields[fi].name;
        match spec.unit_encodings(*kind, unit).and_then(|e| e.get(channel)) {
            Some(enc) if &enc.field == field => {}
            Some(enc) => report.push(
                "ref-mismatch",
                format!("fields[{fi}].encodings[{ri}]"),
                format!("{kind} unit `{unit}` binds `{channel}` to `{}`, not `{field}`", enc.field),
            ),
            None => report.push(
                "ref-mismatch",
                format!("fields[{fi}].encodings[{ri}]"),
                format!("{kind} unit `{unit}` has no `{channel}` encoding"),
            ),
        }
    }

    // Unit side: every encoding needs a backing field and a back-reference.
    let unit_encodings = spec
        .visual
        .iter()
        .enumerate()
        .map(|(i, u)| (UnitKind::Visual, i, u.unit.as_str(), &u.encoding))
        .chain(
            spec.audio
                .iter()
                .enumerate()
                .map(|(i, u)| (UnitKind::Audio, i, u.unit.as_str(), &u.encoding)),
        );
    for (kind, ui, unit, encodings) in unit_encodings {
        for (channel, enc) in encodings {
            let path = format!("{kind}[{ui}].encoding.{channel}");
            if channel.kind() != kind {
                report.push(
                    "channel-modality-mismatch",
                    path,
                    format!("channel `{channel}` is not a {kind} channel"),
                );
                continue;
            }
            let Some(def) = spec.field(&enc.field) else {
                report.push("unbacked-encoding", path, format!("field `{}` is not defined", enc.field));
                continue;
            };
            if !claims.contains_key(&(kind, unit, *channel)) {
                report.push(
                    "unbacked-encoding",
                    path.clone(),
                    format!("field `{}` has no reference to this encoding", def.name),
                );
            }
            if enc.bin.is_some() && !def.measure_type.is_continuous() {
                report.push(
                    "bin-on-discrete-field",
                    format!("{path}.bin"),
                    format!("`{}` is {} and cannot be binned", def.name, def.measure_type),
                );
            }
        }
    }

    for (ui, unit) in spec.audio.iter().enumerate() {
        if !unit.encoding.is_empty() && unit.traversal.is_empty() {
            report.push(
                "empty-traversal",
                format!("audio[{ui}].traversal"),
                format!("audio unit `{}` has encodings but no traversal", unit.unit),
            );
        }
        let mut seen = HashSet::new();
        for (si, step) in unit.traversal.iter().enumerate() {
            let path = format!("audio[{ui}].traversal[{si}]");
            if !seen.insert(step.field.as_str()) {
                report.push("duplicate-traversal-field", path.clone(), format!("`{}` is traversed twice", step.field));
            }
            match spec.field(&step.field) {
                None => report.push("unknown-traversal-field", path, format!("field `{}` is not defined", step.field)),
                Some(def) if step.bin.is_some() && !def.measure_type.is_continuous() => report.push(
                    "bin-on-discrete-field",
                    format!("{path}.bin"),
                    format!("`{}` is {} and cannot be binned", def.name, def.measure_type),
                ),
                Some(_) => {}
            }
        }
    }

    // Layers share one facet operator, so at most one facet field can hold.
    if spec.composition.visual == CompositionOp::Layer {
        let mut first: Option<(&str, &str)> = None;
        for (ui, unit) in spec.visual.iter().enumerate() {
            let Some(e) = unit.encoding.get(&Channel::Facet) else { continue };
            match first {
                None => first = Some((&unit.unit, &e.field)),
                Some((owner, field)) if field != e.field => report.push(
                    "layered-facet-mismatch",
                    format!("visual[{ui}].encoding.facet"),
                    format!("layered unit `{}` facets by `{}`, `{owner}` by `{field}`", unit.unit, e.field),
                ),
                Some(_) => {}
            }
        }
    }

    if spec.composition.audio == CompositionOp::Layer {
        if let Some(first) = spec.audio.first() {
            for (ui, unit) in spec.audio.iter().enumerate().skip(1) {
                if unit.traversal != first.traversal {
                    report.push(
                        "layered-traversal-mismatch",
                        format!("audio[{ui}].traversal"),
                        format!("layered unit `{}` does not share `{}`'s traversal", unit.unit, first.unit),
                    );
                }
            }
        }
    }

    report
}
