//! Default specifications from a dataset's key and measure types.
//!
//! Each rule maps one combination of key types and value types to
//! visual and audio fragments. Rules live behind [`DefaultRule`] in a
//! [`RuleRegistry`]; the standard registry holds them in priority order and
//! the first rule that matches wins.

use std::collections::BTreeMap;

use crate::ingest::Dataset;
use crate::model::{
    Aggregate, AudioUnitSpec, Channel, ChannelEncoding, CompositionOp, FieldDef, Mark, MeasureType, MultimodalSpec,
    TraversalStep, UnitKind, VisualUnitSpec,
};

/// Category count above which a temporal-by-nominal series is drawn as
/// sized points instead of colored lines.
pub const MAX_LINE_SERIES: usize = 5;

/// A field as the heuristics see it: its heuristic class and, for nominal
/// fields, how many distinct values it takes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TypedField {
    pub name: String,
    pub class: MeasureType,
    pub distinct: usize,
}

/// The key and value fields a rule is matched against.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Signature {
    pub key: Vec<TypedField>,
    pub values: Vec<TypedField>,
}

fn count(fields: &[TypedField], class: MeasureType) -> usize {
    fields.iter().filter(|f| f.class == class).count()
}

impl Signature {
    pub fn from_fields(fields: &[FieldDef], key: &[String], dataset: &Dataset) -> Signature {
        let typed = |f: &FieldDef| TypedField {
            name: f.name.clone(),
            class: f.measure_type.heuristic_class(),
            distinct: dataset
                .column_index(&f.name)
                .map(|c| dataset.distinct_values(c, 0..dataset.len()).len())
                .unwrap_or(0),
        };
        // Key fields keep key order; values keep field order.
        let key_fields = key
            .iter()
            .filter_map(|k| fields.iter().find(|f| &f.name == k))
            .map(typed)
            .collect();
        let values = fields.iter().filter(|f| !key.contains(&f.name)).map(typed).collect();
        Signature { key: key_fields, values }
    }

    /// Exact type counts: `(temporal, nominal, quantitative)`.
    fn key_counts(&self) -> (usize, usize, usize) {
        (
            count(&self.key, MeasureType::Temporal),
            count(&self.key, MeasureType::Nominal),
            count(&self.key, MeasureType::Quantitative),
        )
    }

    fn value_counts(&self) -> (usize, usize, usize) {
        (
            count(&self.values, MeasureType::Temporal),
            count(&self.values, MeasureType::Nominal),
            count(&self.values, MeasureType::Quantitative),
        )
    }

    fn bindings(&self) -> Bindings {
        let of = |fields: &[TypedField], class| -> Vec<TypedField> {
            fields.iter().filter(|f| f.class == class).cloned().collect()
        };
        let mut n_keys = of(&self.key, MeasureType::Nominal);
        // Fewer categories means an outer grouping; stable keeps key order on ties.
        n_keys.sort_by_key(|f| f.distinct);
        Bindings {
            t_keys: of(&self.key, MeasureType::Temporal).into_iter().map(|f| f.name).collect(),
            n_keys: n_keys.into_iter().map(|f| f.name).collect(),
            q_values: of(&self.values, MeasureType::Quantitative)
                .into_iter()
                .map(|f| f.name)
                .collect(),
            n_values: of(&self.values, MeasureType::Nominal).into_iter().map(|f| f.name).collect(),
        }
    }
}

/// Concrete field names for a rule's placeholders.
#[derive(Clone, Debug, Default)]
pub struct Bindings {
    pub t_keys: Vec<String>,
    pub n_keys: Vec<String>,
    pub q_values: Vec<String>,
    pub n_values: Vec<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct VisualFragment {
    pub mark: Mark,
    pub encoding: Vec<(Channel, ChannelEncoding)>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AudioFragment {
    pub encoding: Vec<(Channel, ChannelEncoding)>,
    pub traversal: Vec<TraversalStep>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Fragments {
    pub visual: VisualFragment,
    pub audio: Vec<AudioFragment>,
}

pub trait DefaultRule: Send + Sync {
    /// Position in the standard table, starting at 1.
    fn id(&self) -> u8;
    fn name(&self) -> &'static str;
    fn matches(&self, signature: &Signature) -> bool;
    fn fragments(&self, bindings: &Bindings) -> Fragments;
}

fn enc(field: &str) -> ChannelEncoding {
    ChannelEncoding::field(field)
}

fn pitch_unit(value: &str, traversal: Vec<TraversalStep>) -> AudioFragment {
    AudioFragment {
        encoding: vec![(Channel::Pitch, enc(value))],
        traversal,
    }
}

/// T, N (at most five categories) -> Q: multi-series line chart.
struct MultiSeriesLine;

impl DefaultRule for MultiSeriesLine {
    fn id(&self) -> u8 {
        1
    }
    fn name(&self) -> &'static str {
        "multi-series-line"
    }
    fn matches(&self, s: &Signature) -> bool {
        s.key_counts() == (1, 1, 0)
            && s.value_counts() == (0, 0, 1)
            && s.key.iter().any(|f| f.class == MeasureType::Nominal && f.distinct <= MAX_LINE_SERIES)
    }
    fn fragments(&self, b: &Bindings) -> Fragments {
        let (t, n, v) = (&b.t_keys[0], &b.n_keys[0], &b.q_values[0]);
        Fragments {
            visual: VisualFragment {
                mark: Mark::Line,
                encoding: vec![(Channel::X, enc(t)), (Channel::Y, enc(v)), (Channel::Color, enc(n))],
            },
            audio: vec![pitch_unit(v, vec![TraversalStep::field(n), TraversalStep::field(t)])],
        }
    }
}

/// T, N (more than five categories) -> Q: sized points per category row.
struct SizedPoint;

impl DefaultRule for SizedPoint {
    fn id(&self) -> u8 {
        2
    }
    fn name(&self) -> &'static str {
        "sized-point"
    }
    fn matches(&self, s: &Signature) -> bool {
        s.key_counts() == (1, 1, 0)
            && s.value_counts() == (0, 0, 1)
            && s.key.iter().any(|f| f.class == MeasureType::Nominal && f.distinct > MAX_LINE_SERIES)
    }
    fn fragments(&self, b: &Bindings) -> Fragments {
        let (t, n, v) = (&b.t_keys[0], &b.n_keys[0], &b.q_values[0]);
        Fragments {
            visual: VisualFragment {
                mark: Mark::Point,
                encoding: vec![
                    (Channel::X, enc(t)),
                    (Channel::Y, enc(n)),
                    (Channel::Color, enc(n)),
                    (Channel::Size, enc(v)),
                ],
            },
            audio: vec![pitch_unit(v, vec![TraversalStep::field(n), TraversalStep::field(t)])],
        }
    }
}

/// No key, Q, Q, N: colored scatterplot; each measure sonified as its mean
/// across bins of the other.
struct ColoredScatter;

impl DefaultRule for ColoredScatter {
    fn id(&self) -> u8 {
        3
    }
    fn name(&self) -> &'static str {
        "colored-scatter"
    }
    fn matches(&self, s: &Signature) -> bool {
        s.key.is_empty() && s.value_counts() == (0, 1, 2)
    }
    fn fragments(&self, b: &Bindings) -> Fragments {
        let (q0, q1, n) = (&b.q_values[0], &b.q_values[1], &b.n_values[0]);
        let mean_pitch = |value: &str, across: &str| AudioFragment {
            encoding: vec![(Channel::Pitch, enc(value).with_aggregate(Aggregate::Mean))],
            traversal: vec![TraversalStep::binned(across)],
        };
        Fragments {
            visual: VisualFragment {
                mark: Mark::Point,
                encoding: vec![(Channel::X, enc(q0)), (Channel::Y, enc(q1)), (Channel::Color, enc(n))],
            },
            audio: vec![mean_pitch(q0, q1), mean_pitch(q1, q0)],
        }
    }
}

/// T -> Q, Q: connected scatterplot ordered by time.
struct ConnectedScatter;

impl DefaultRule for ConnectedScatter {
    fn id(&self) -> u8 {
        4
    }
    fn name(&self) -> &'static str {
        "connected-scatter"
    }
    fn matches(&self, s: &Signature) -> bool {
        s.key_counts() == (1, 0, 0) && s.value_counts() == (0, 0, 2)
    }
    fn fragments(&self, b: &Bindings) -> Fragments {
        let (k, v0, v1) = (&b.t_keys[0], &b.q_values[0], &b.q_values[1]);
        Fragments {
            visual: VisualFragment {
                mark: Mark::Line,
                encoding: vec![(Channel::X, enc(v0)), (Channel::Y, enc(v1)), (Channel::Order, enc(k))],
            },
            audio: vec![
                pitch_unit(v0, vec![TraversalStep::field(k)]),
                pitch_unit(v1, vec![TraversalStep::field(k)]),
            ],
        }
    }
}

/// T, N, N -> Q: dot plots faceted by the coarser category.
struct FacetedDots;

impl DefaultRule for FacetedDots {
    fn id(&self) -> u8 {
        5
    }
    fn name(&self) -> &'static str {
        "faceted-dots"
    }
    fn matches(&self, s: &Signature) -> bool {
        s.key_counts() == (1, 2, 0) && s.value_counts() == (0, 0, 1)
    }
    fn fragments(&self, b: &Bindings) -> Fragments {
        let (t, n0, n1, v) = (&b.t_keys[0], &b.n_keys[0], &b.n_keys[1], &b.q_values[0]);
        Fragments {
            visual: VisualFragment {
                mark: Mark::Point,
                encoding: vec![
                    (Channel::X, enc(v)),
                    (Channel::Y, enc(n1)),
                    (Channel::Color, enc(t)),
                    (Channel::Facet, enc(n0)),
                ],
            },
            audio: vec![pitch_unit(
                v,
                vec![TraversalStep::field(n0), TraversalStep::field(n1), TraversalStep::field(t)],
            )],
        }
    }
}

/// T, N -> Q, Q: small multiples of connected scatterplots.
struct FacetedConnectedScatter;

impl DefaultRule for FacetedConnectedScatter {
    fn id(&self) -> u8 {
        6
    }
    fn name(&self) -> &'static str {
        "faceted-connected-scatter"
    }
    fn matches(&self, s: &Signature) -> bool {
        s.key_counts() == (1, 1, 0) && s.value_counts() == (0, 0, 2)
    }
    fn fragments(&self, b: &Bindings) -> Fragments {
        let (t, n, v0, v1) = (&b.t_keys[0], &b.n_keys[0], &b.q_values[0], &b.q_values[1]);
        let traversal = vec![TraversalStep::field(n), TraversalStep::field(t)];
        Fragments {
            visual: VisualFragment {
                mark: Mark::Line,
                encoding: vec![
                    (Channel::X, enc(v0)),
                    (Channel::Y, enc(v1)),
                    (Channel::Facet, enc(n)),
                    (Channel::Color, enc(n)),
                    (Channel::Order, enc(t)),
                ],
            },
            audio: vec![pitch_unit(v0, traversal.clone()), pitch_unit(v1, traversal)],
        }
    }
}

/// Ordered collection of rules.
pub struct RuleRegistry {
    rules: Vec<Box<dyn DefaultRule>>,
}

impl Default for RuleRegistry {
    fn default() -> Self {
        Self::standard()
    }
}

impl RuleRegistry {
    pub fn empty() -> Self {
        RuleRegistry { rules: Vec::new() }
    }

    /// The six built-in rules in priority order.
    pub fn standard() -> Self {
        let mut r = Self::empty();
        r.register(MultiSeriesLine);
        r.register(SizedPoint);
        r.register(ColoredScatter);
        r.register(ConnectedScatter);
        r.register(FacetedDots);
        r.register(FacetedConnectedScatter);
        r
    }

    pub fn register(&mut self, rule: impl DefaultRule + 'static) {
        self.rules.push(Box::new(rule));
    }

    pub fn rules(&self) -> impl Iterator<Item = &dyn DefaultRule> {
        self.rules.iter().map(|r| r.as_ref())
    }

    pub fn get(&self, name: &str) -> Option<&dyn DefaultRule> {
        self.rules().find(|r| r.name() == name)
    }

    /// First rule whose pattern the signature satisfies.
    pub fn match_rule(&self, signature: &Signature) -> Option<&dyn DefaultRule> {
        self.rules().find(|r| r.matches(signature))
    }

    /// Builds the default spec for typed `fields` keyed by `key`. Without a
    /// matching rule the spec carries the fields and key but no units.
    pub fn generate(&self, fields: &[FieldDef], key: &[String], dataset: &Dataset) -> MultimodalSpec {
        let key: Vec<String> = key.iter().filter(|k| fields.iter().any(|f| &f.name == *k)).cloned().collect();
        let mut spec = MultimodalSpec {
            key: key.clone(),
            fields: fields
                .iter()
                .map(|f| FieldDef {
                    encodings: Vec::new(),
                    ..f.clone()
                })
                .collect(),
            ..Default::default()
        };
        let signature = Signature::from_fields(fields, &key, dataset);
        let Some(rule) = self.match_rule(&signature) else {
            return spec;
        };
        let fragments = rule.fragments(&signature.bindings());

        let visual_id = "visual_0".to_string();
        spec.visual.push(VisualUnitSpec {
            unit: visual_id.clone(),
            mark: fragments.visual.mark,
            encoding: BTreeMap::new(),
        });
        for (channel, e) in &fragments.visual.encoding {
            spec.bind(&e.field, UnitKind::Visual, &visual_id, *channel, e.clone());
        }
        for (i, frag) in fragments.audio.iter().enumerate() {
            let id = format!("audio_{i}");
            spec.audio.push(AudioUnitSpec {
                unit: id.clone(),
                encoding: BTreeMap::new(),
                traversal: frag.traversal.clone(),
            });
            for (channel, e) in &frag.encoding {
                spec.bind(&e.field, UnitKind::Audio, &id, *channel, e.clone());
            }
        }
        spec.composition.audio = CompositionOp::Concat;
        spec.normalized()
    }
}

/// Identifies the matching rule for a signature under the standard table.
pub fn match_rule(signature: &Signature) -> Option<u8> {
    RuleRegistry::standard().match_rule(signature).map(|r| r.id())
}

/// Default spec under the standard rule table.
pub fn generate_default(fields: &[FieldDef], key: &[String], dataset: &Dataset) -> MultimodalSpec {
    RuleRegistry::standard().generate(fields, key, dataset)
}

/// Typed field definitions for the selected columns, in dataset order.
pub fn field_defs(dataset: &Dataset, selected: &[String]) -> Vec<FieldDef> {
    dataset
        .columns
        .iter()
        .filter(|c| selected.contains(&c.name))
        .map(|c| FieldDef::new(c.name.clone(), c.measure_type.unwrap_or(MeasureType::Nominal)))
        .collect()
}

/// Infers the key over the selected columns and generates the default spec.
pub fn defaults_for_selection(dataset: &Dataset, selected: &[String]) -> MultimodalSpec {
    let key = crate::ingest::infer_key(dataset, selected);
    generate_default(&field_defs(dataset, selected), &key, dataset)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tf(name: &str, class: MeasureType, distinct: usize) -> TypedField {
        TypedField {
            name: name.into(),
            class,
            distinct,
        }
    }

    #[test]
    fn category_guard_separates_rows_one_and_two() {
        let few = Signature {
            key: vec![tf("t", MeasureType::Temporal, 10), tf("n", MeasureType::Nominal, 5)],
            values: vec![tf("v", MeasureType::Quantitative, 100)],
        };
        assert_eq!(match_rule(&few), Some(1));
        let many = Signature {
            key: vec![tf("t", MeasureType::Temporal, 10), tf("n", MeasureType::Nominal, 6)],
            values: vec![tf("v", MeasureType::Quantitative, 100)],
        };
        assert_eq!(match_rule(&many), Some(2));
    }

    #[test]
    fn keyless_nominal_value_has_no_rule() {
        let s = Signature {
            key: vec![],
            values: vec![tf("n", MeasureType::Nominal, 3)],
        };
        assert_eq!(match_rule(&s), None);
    }

    #[test]
    fn rules_are_mutually_exclusive() {
        let registry = RuleRegistry::standard();
        let classes = [MeasureType::Temporal, MeasureType::Nominal, MeasureType::Quantitative];
        // Every key/value type multiset up to three fields each, both sides of the guard.
        let mut multisets: Vec<Vec<MeasureType>> = vec![vec![]];
        for size in 1..=3 {
            let mut next = Vec::new();
            for m in multisets.iter().filter(|m| m.len() == size - 1) {
                for c in classes {
                    if m.last().map_or(true, |l| *l <= c) {
                        let mut v = m.clone();
                        v.push(c);
                        next.push(v);
                    }
                }
            }
            multisets.extend(next);
        }
        for key in &multisets {
            for values in &multisets {
                for distinct in [3, 8] {
                    let s = Signature {
                        key: key.iter().map(|c| tf("k", *c, distinct)).collect(),
                        values: values.iter().map(|c| tf("v", *c, distinct)).collect(),
                    };
                    let hits = registry.rules().filter(|r| r.matches(&s)).count();
                    assert!(hits <= 1, "{key:?} / {values:?} matched {hits} rules");
                }
            }
        }
    }

    #[test]
    fn ordinal_is_heuristically_nominal() {
        assert_eq!(MeasureType::Ordinal.heuristic_class(), MeasureType::Nominal);
    }
}
