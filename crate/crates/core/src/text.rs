//! Hierarchical textual structure: a tree of predicate-scoped, described
//! nodes that follows the visual encodings when a chart exists and the
//! spec's fields otherwise.

use std::collections::HashSet;

use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use crate::ingest::Dataset;
use crate::model::{Channel, Mark, MeasureType, MultimodalSpec, VisualUnitSpec};
use crate::predicate::Predicate;
use crate::scale::{nice_bins, nice_bins_at_least, time_bins, time_bins_at_least, Bins};
use crate::value::{format_number, format_value, instant_from_millis, format_instant, Value};

/// Intervals per continuous grouping when the tree is first built.
pub const BASE_BIN_COUNT: usize = 5;
/// Minimum interval count after a filter re-bins a grouping.
pub const RESCOPE_MIN_BINS: usize = 4;
/// Groups with at most this many rows list their rows as datum nodes.
pub const DATUM_LIMIT: usize = 50;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "kebab-case")]
pub enum NodeRole {
    Root,
    /// One node per value of the outermost grouping field.
    FacetLevel,
    /// One node per visual unit when a chart has several.
    View,
    AxisLevel,
    LegendLevel,
    FieldGroup,
    Interval,
    Category,
    DatumSummary,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct TextNode {
    pub node_id: String,
    pub role: NodeRole,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub groupby_field: Option<String>,
    pub predicate: Predicate,
    pub description: String,
    /// Visual channel the node describes, if any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub channel: Option<Channel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mark: Option<Mark>,
    /// Fields whose values or summaries the description reports.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub summary_fields: Vec<String>,
    #[serde(default)]
    pub children: Vec<TextNode>,
}

impl TextNode {
    fn new(role: NodeRole, predicate: Predicate) -> TextNode {
        TextNode {
            node_id: String::new(),
            role,
            groupby_field: None,
            predicate,
            description: String::new(),
            channel: None,
            mark: None,
            summary_fields: Vec::new(),
            children: Vec::new(),
        }
    }

    /// Depth-first iterator over this node and its descendants.
    pub fn walk(&self) -> Vec<&TextNode> {
        let mut out = vec![self];
        let mut i = 0;
        while i < out.len() {
            let node = out[i];
            out.extend(node.children.iter());
            i += 1;
        }
        out
    }

    pub fn find(&self, node_id: &str) -> Option<&TextNode> {
        self.walk().into_iter().find(|n| n.node_id == node_id)
    }

    /// Rows covered by the tree's leaves: structural nodes contribute the
    /// union of their children, groups contribute their own rows.
    pub fn retained_rows(&self, dataset: &Dataset) -> Vec<usize> {
        let mut set = HashSet::new();
        self.collect_retained(dataset, &mut set);
        let mut rows: Vec<usize> = set.into_iter().collect();
        rows.sort_unstable();
        rows
    }

    fn collect_retained(&self, dataset: &Dataset, out: &mut HashSet<usize>) {
        if matches!(self.role, NodeRole::Interval | NodeRole::Category | NodeRole::DatumSummary) {
            out.extend(dataset.matching_rows(&self.predicate).unwrap_or_default());
            return;
        }
        for c in &self.children {
            c.collect_retained(dataset, out);
        }
    }
}

/// The predicate a navigation to `node` emits.
pub fn from_text_node(node: &TextNode) -> Predicate {
    node.predicate.clone()
}

/// Grouping order of a textual structure: an optional outermost field and
/// the fields nested beneath it (or the flat list when there is none).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
pub struct TextGrouping {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub groupby: Option<String>,
    pub children: Vec<String>,
}

const GROUP_CHANNELS: [Channel; 5] = [Channel::X, Channel::Y, Channel::Color, Channel::Size, Channel::Order];

/// Grouping for one visual unit. A facet field, or the nominal series
/// field of a line chart, becomes the outer level; the other encoded fields
/// follow in channel order. Without an outer level, key fields come first.
pub fn unit_grouping(spec: &MultimodalSpec, unit: &VisualUnitSpec) -> TextGrouping {
    let field_of = |c: Channel| unit.encoding.get(&c).map(|e| e.field.clone());
    let series = field_of(Channel::Color).filter(|f| {
        unit.mark == Mark::Line
            && spec
                .measure_type(f)
                .is_some_and(|m| m.heuristic_class() == MeasureType::Nominal)
    });
    let root = field_of(Channel::Facet).or(series);
    let mut children: Vec<String> = Vec::new();
    for c in GROUP_CHANNELS {
        if let Some(f) = field_of(c) {
            if Some(&f) != root.as_ref() && !children.contains(&f) {
                children.push(f);
            }
        }
    }
    if root.is_none() {
        let (mut keys, rest): (Vec<String>, Vec<String>) = children.into_iter().partition(|f| spec.key.contains(f));
        keys.extend(rest);
        children = keys;
    }
    TextGrouping { groupby: root, children }
}

/// Grouping of the whole spec: the first visual unit's, or one flat group
/// per field when there is no chart.
pub fn text_grouping(spec: &MultimodalSpec) -> TextGrouping {
    match spec.visual.first() {
        Some(unit) => unit_grouping(spec, unit),
        None => TextGrouping {
            groupby: None,
            children: spec.fields.iter().map(|f| f.name.clone()).collect(),
        },
    }
}

struct Builder<'a> {
    dataset: &'a Dataset,
    /// Fields listed by datum nodes.
    datum_fields: Vec<String>,
}

fn rows_within(dataset: &Dataset, predicate: &Predicate, candidates: &[usize]) -> Vec<usize> {
    candidates
        .iter()
        .copied()
        .filter(|&r| predicate.evaluate(&dataset.rows[r], dataset).unwrap_or(false))
        .collect()
}

fn bin_value(x: f64, measure: MeasureType) -> Value {
    match measure {
        MeasureType::Temporal => match instant_from_millis(x) {
            Some(dt) => Value::Text(format_instant(dt)),
            None => Value::Number(x),
        },
        _ => Value::Number(x),
    }
}

fn base_bins(dataset: &Dataset, field: &str) -> Option<Bins> {
    let ci = dataset.column_index(field)?;
    let (lo, hi) = dataset.extent(ci, 0..dataset.len())?;
    Some(match dataset.measure_type(field) {
        MeasureType::Temporal => time_bins(lo, hi, BASE_BIN_COUNT).1,
        _ => nice_bins(lo, hi, BASE_BIN_COUNT),
    })
}

fn role_for(channel: Option<Channel>) -> NodeRole {
    match channel {
        Some(Channel::X) | Some(Channel::Y) => NodeRole::AxisLevel,
        Some(Channel::Color) | Some(Channel::Size) => NodeRole::LegendLevel,
        _ => NodeRole::FieldGroup,
    }
}

impl<'a> Builder<'a> {
    fn measure(&self, field: &str) -> MeasureType {
        self.dataset.measure_type(field)
    }

    /// Datum nodes for the rows of a small group.
    fn datums(&self, scope: &Predicate, rows: &[usize]) -> Vec<TextNode> {
        if rows.is_empty() || rows.len() > DATUM_LIMIT {
            return Vec::new();
        }
        let identity: Vec<&String> = {
            let discrete: Vec<&String> = self
                .datum_fields
                .iter()
                .filter(|f| self.measure(f) != MeasureType::Quantitative)
                .collect();
            if discrete.is_empty() {
                self.datum_fields.iter().collect()
            } else {
                discrete
            }
        };
        let mut seen = HashSet::new();
        let mut out = Vec::new();
        for &r in rows {
            let mut p = scope.clone();
            for f in &identity {
                if let Some(ci) = self.dataset.column_index(f) {
                    let v = self.dataset.value(r, ci);
                    if !v.is_null() {
                        p = p.and(Predicate::equal(f.as_str(), v.clone()));
                    }
                }
            }
            if seen.insert(p.to_string()) {
                let mut node = TextNode::new(NodeRole::DatumSummary, p);
                node.summary_fields = self.datum_fields.clone();
                out.push(node);
            }
        }
        out
    }

    /// Interval or category children of a grouping over `field`.
    fn groups(
        &self,
        field: &str,
        channel: Option<Channel>,
        scope: &Predicate,
        rows: &[usize],
        bins: Option<&Bins>,
        summary: &[String],
    ) -> Vec<TextNode> {
        let measure = self.measure(field);
        let mut out = Vec::new();
        if measure.is_continuous() {
            let Some(bins) = bins else {
                return out;
            };
            for (lo, hi, closed) in bins.intervals() {
                let (lo, hi) = (bin_value(lo, measure), bin_value(hi, measure));
                let range = if closed {
                    Predicate::range_inclusive(field, lo, hi)
                } else {
                    Predicate::range(field, lo, hi)
                };
                let p = scope.clone().and(range);
                let inner = rows_within(self.dataset, &p, rows);
                let mut node = TextNode::new(NodeRole::Interval, p.clone());
                node.groupby_field = Some(field.to_string());
                node.channel = channel;
                node.summary_fields = summary.to_vec();
                node.children = self.datums(&p, &inner);
                out.push(node);
            }
        } else {
            let Some(ci) = self.dataset.column_index(field) else {
                return out;
            };
            for v in self.ordered_values(ci, rows) {
                let p = scope.clone().and(Predicate::equal(field, v));
                let inner = rows_within(self.dataset, &p, rows);
                let mut node = TextNode::new(NodeRole::Category, p.clone());
                node.groupby_field = Some(field.to_string());
                node.channel = channel;
                node.summary_fields = summary.to_vec();
                node.children = self.datums(&p, &inner);
                out.push(node);
            }
        }
        out
    }

    /// Values present in `rows`, in the column's domain order.
    fn ordered_values(&self, ci: usize, rows: &[usize]) -> Vec<Value> {
        let present: HashSet<String> = self
            .dataset
            .distinct_values(ci, rows.iter().copied())
            .iter()
            .map(Value::canonical)
            .collect();
        self.dataset
            .domain(ci)
            .into_iter()
            .filter(|v| present.contains(&v.canonical()))
            .collect()
    }

    fn branch(
        &self,
        field: &str,
        channel: Option<Channel>,
        scope: &Predicate,
        rows: &[usize],
        summary: &[String],
    ) -> TextNode {
        let mut node = TextNode::new(role_for(channel), scope.clone());
        node.groupby_field = Some(field.to_string());
        node.channel = channel;
        if self.measure(field) == MeasureType::Quantitative {
            node.summary_fields = vec![field.to_string()];
        }
        let bins = base_bins(self.dataset, field);
        node.children = self.groups(field, channel, scope, rows, bins.as_ref(), summary);
        node
    }

    fn unit_children(&self, spec: &MultimodalSpec, unit: &VisualUnitSpec, scope: &Predicate, rows: &[usize]) -> Vec<TextNode> {
        let grouping = unit_grouping(spec, unit);
        let channel_of = |field: &str| -> Option<Channel> {
            [Channel::Facet, Channel::X, Channel::Y, Channel::Color, Channel::Size, Channel::Order]
                .into_iter()
                .find(|c| unit.encoding.get(c).is_some_and(|e| e.field == field))
        };
        let summary = unit_quantities(spec, unit);
        let branches = |scope: &Predicate, rows: &[usize]| -> Vec<TextNode> {
            grouping
                .children
                .iter()
                .map(|f| {
                    let channel = GROUP_CHANNELS
                        .into_iter()
                        .find(|c| unit.encoding.get(c).is_some_and(|e| &e.field == f));
                    self.branch(f, channel, scope, rows, &summary)
                })
                .collect()
        };
        match &grouping.groupby {
            None => branches(scope, rows),
            Some(outer) => {
                let Some(ci) = self.dataset.column_index(outer) else {
                    return Vec::new();
                };
                self.ordered_values(ci, rows)
                    .into_iter()
                    .map(|v| {
                        let p = scope.clone().and(Predicate::equal(outer.as_str(), v));
                        let inner = rows_within(self.dataset, &p, rows);
                        let mut node = TextNode::new(NodeRole::FacetLevel, p.clone());
                        node.groupby_field = Some(outer.clone());
                        node.channel = channel_of(outer);
                        node.summary_fields = summary.clone();
                        node.children = branches(&p, &inner);
                        node
                    })
                    .collect()
            }
        }
    }
}

/// Quantitative fields a unit encodes, in channel order.
fn unit_quantities(spec: &MultimodalSpec, unit: &VisualUnitSpec) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for c in [Channel::X, Channel::Y, Channel::Color, Channel::Size, Channel::Order, Channel::Facet] {
        if let Some(e) = unit.encoding.get(&c) {
            if spec.measure_type(&e.field) == Some(MeasureType::Quantitative) && !out.contains(&e.field) {
                out.push(e.field.clone());
            }
        }
    }
    out
}

/// Builds the textual structure for `spec` over `dataset`.
pub fn build_tree(spec: &MultimodalSpec, dataset: &Dataset) -> TextNode {
    let builder = Builder {
        dataset,
        datum_fields: spec.fields.iter().map(|f| f.name.clone()).collect(),
    };
    let all: Vec<usize> = (0..dataset.len()).collect();
    let scope = Predicate::True;
    let mut root = TextNode::new(NodeRole::Root, scope.clone());
    root.summary_fields = builder.datum_fields.clone();
    match spec.visual.as_slice() {
        [] => {
            let quantities: Vec<String> = spec
                .fields
                .iter()
                .filter(|f| f.measure_type == MeasureType::Quantitative)
                .map(|f| f.name.clone())
                .collect();
            root.children = spec
                .fields
                .iter()
                .map(|f| builder.branch(&f.name, None, &scope, &all, &quantities))
                .collect();
        }
        [unit] => {
            root.mark = Some(unit.mark);
            root.children = builder.unit_children(spec, unit, &scope, &all);
        }
        units => {
            root.children = units
                .iter()
                .map(|u| {
                    let mut view = TextNode::new(NodeRole::View, scope.clone());
                    view.mark = Some(u.mark);
                    view.summary_fields = unit_quantities(spec, u);
                    view.children = builder.unit_children(spec, u, &scope, &all);
                    view
                })
                .collect();
        }
    }
    finish(&mut root, dataset, !spec.visual.is_empty());
    root
}

/// Re-scopes a built tree to `filter`: every predicate is conjoined with the
/// filter, continuous groupings the filter constrains are re-binned over the
/// filtered domain, and categories left without rows are dropped.
pub fn rescope_tree(root: &TextNode, filter: &Predicate, dataset: &Dataset) -> TextNode {
    let visual = root.mark.is_some() || root.children.iter().any(|c| c.role == NodeRole::View);
    let builder = Builder {
        dataset,
        datum_fields: root.summary_fields.clone(),
    };
    let all: Vec<usize> = (0..dataset.len()).collect();
    let mut out = rescope_node(&builder, root, filter, &all);
    finish(&mut out, dataset, visual);
    out
}

fn rescope_node(b: &Builder, node: &TextNode, filter: &Predicate, parent_rows: &[usize]) -> TextNode {
    let predicate = node.predicate.clone().and(filter.clone());
    let rows = rows_within(b.dataset, &predicate, parent_rows);
    let mut out = TextNode {
        predicate: predicate.clone(),
        children: Vec::new(),
        ..node.clone()
    };
    match node.role {
        NodeRole::Interval | NodeRole::Category if node.children.iter().all(|c| c.role == NodeRole::DatumSummary) => {
            out.children = b.datums(&predicate, &rows);
        }
        NodeRole::DatumSummary => {}
        NodeRole::AxisLevel | NodeRole::LegendLevel | NodeRole::FieldGroup => {
            let field = node.groupby_field.as_deref().unwrap_or_default();
            let rebin = b.measure(field).is_continuous() && filter.fields().contains(&field);
            if rebin {
                let summary = node.children.first().map(|c| c.summary_fields.clone()).unwrap_or_default();
                let bins = filtered_bins(b.dataset, node, field, filter, &rows);
                out.children = match bins {
                    Some(bins) => b.groups(field, node.channel, &predicate, &rows, Some(&bins), &summary),
                    None => Vec::new(),
                };
            } else {
                out.children = rescope_children(b, node, filter, &rows);
            }
        }
        _ => out.children = rescope_children(b, node, filter, &rows),
    }
    out
}

fn rescope_children(b: &Builder, node: &TextNode, filter: &Predicate, rows: &[usize]) -> Vec<TextNode> {
    node.children
        .iter()
        .map(|c| rescope_node(b, c, filter, rows))
        .filter(|c| {
            let droppable = matches!(c.role, NodeRole::Category | NodeRole::FacetLevel | NodeRole::DatumSummary);
            !droppable || !rows_within(b.dataset, &c.predicate, rows).is_empty()
        })
        .collect()
}

/// Bounds of an interval node's range on `field`.
fn interval_bounds(node: &TextNode, field: &str, measure: MeasureType) -> Option<(f64, f64, bool)> {
    node.predicate.atoms().into_iter().find_map(|a| match a {
        Predicate::Range {
            field: f,
            lo,
            hi,
            inclusive,
        } if f == field => Some((lo.ordinal(measure)?, hi.ordinal(measure)?, *inclusive)),
        _ => None,
    })
}

/// New bins for a grouping whose field the filter constrains: the original
/// domain intersected with the filter's bounds, or the filtered rows'
/// extent when the filter fixes values instead of a range.
fn filtered_bins(dataset: &Dataset, node: &TextNode, field: &str, filter: &Predicate, rows: &[usize]) -> Option<Bins> {
    if rows.is_empty() {
        return None;
    }
    let measure = dataset.measure_type(field);
    let ci = dataset.column_index(field)?;
    let first = node.children.first().and_then(|c| interval_bounds(c, field, measure));
    let last = node.children.last().and_then(|c| interval_bounds(c, field, measure));
    let (mut lo, mut hi, mut closed) = match (first, last) {
        (Some((lo, _, _)), Some((_, hi, closed))) => (lo, hi, closed),
        _ => {
            let (lo, hi) = dataset.extent(ci, rows.iter().copied())?;
            (lo, hi, true)
        }
    };
    let mut ranged = false;
    for atom in filter.atoms() {
        if let Predicate::Range {
            field: f,
            lo: flo,
            hi: fhi,
            inclusive,
        } = atom
        {
            if f != field {
                continue;
            }
            ranged = true;
            if let Some(x) = flo.ordinal(measure) {
                lo = lo.max(x);
            }
            if let Some(x) = fhi.ordinal(measure) {
                if x < hi || (x == hi && !*inclusive) {
                    hi = x;
                    closed = *inclusive;
                }
            }
        }
    }
    if !ranged {
        let (elo, ehi) = dataset.extent(ci, rows.iter().copied())?;
        lo = elo;
        hi = ehi;
        closed = true;
    }
    Some(match measure {
        MeasureType::Temporal => time_bins_at_least(lo, hi, RESCOPE_MIN_BINS, closed).1,
        _ => nice_bins_at_least(lo, hi, RESCOPE_MIN_BINS, closed),
    })
}

/// Assigns ids and descriptions top-down.
fn finish(root: &mut TextNode, dataset: &Dataset, visual: bool) {
    fn go(node: &mut TextNode, id: String, dataset: &Dataset, visual: bool) {
        node.node_id = id;
        node.description = describe_node(node, dataset, visual);
        for (i, c) in node.children.iter_mut().enumerate() {
            let child_id = format!("{}.{}", node.node_id, i);
            go(c, child_id, dataset, visual);
        }
    }
    go(root, "0".to_string(), dataset, visual);
}

fn channel_label(channel: Option<Channel>, visual: bool) -> &'static str {
    if !visual {
        return "field";
    }
    match channel {
        Some(Channel::X) => "x-axis",
        Some(Channel::Y) => "y-axis",
        Some(Channel::Color) => "color legend",
        Some(Channel::Size) => "size legend",
        Some(Channel::Order) => "order",
        Some(Channel::Facet) => "facet",
        _ => "field",
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Summary {
    pub count: usize,
    pub mean: f64,
    pub min: f64,
    pub max: f64,
}

/// Count, mean, min and max of a numeric field over `rows`, nulls skipped.
pub fn summarize(dataset: &Dataset, field: &str, rows: &[usize]) -> Option<Summary> {
    let ci = dataset.column_index(field)?;
    let xs = dataset.numbers(ci, rows);
    if xs.is_empty() {
        return None;
    }
    let sum: f64 = xs.iter().sum();
    Some(Summary {
        count: xs.len(),
        mean: sum / xs.len() as f64,
        min: xs.iter().copied().fold(f64::INFINITY, f64::min),
        max: xs.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    })
}

/// Quantile with linear interpolation between closest ranks.
pub fn quantile(sorted: &[f64], p: f64) -> Option<f64> {
    if sorted.is_empty() {
        return None;
    }
    let pos = (sorted.len() - 1) as f64 * p;
    let i = pos.floor() as usize;
    let frac = pos - i as f64;
    let a = sorted[i];
    let b = sorted[(i + 1).min(sorted.len() - 1)];
    Some(a + (b - a) * frac)
}

/// Which quartile of `others` the value falls in, 1 through 4.
pub fn quartile_of(value: f64, others: &[f64]) -> Option<usize> {
    let mut sorted = others.to_vec();
    sorted.sort_by(f64::total_cmp);
    let q1 = quantile(&sorted, 0.25)?;
    let q2 = quantile(&sorted, 0.5)?;
    let q3 = quantile(&sorted, 0.75)?;
    Some(if value < q1 {
        1
    } else if value < q2 {
        2
    } else if value < q3 {
        3
    } else {
        4
    })
}

fn ordinal_suffix(n: usize) -> &'static str {
    match n {
        1 => "st",
        2 => "nd",
        3 => "rd",
        _ => "th",
    }
}

fn summaries(dataset: &Dataset, fields: &[String], rows: &[usize]) -> String {
    let parts: Vec<String> = fields
        .iter()
        .filter_map(|f| {
            summarize(dataset, f, rows).map(|s| {
                format!(
                    "{f} mean {}, min {}, max {}",
                    format_number(s.mean),
                    format_number(s.min),
                    format_number(s.max)
                )
            })
        })
        .collect();
    if parts.is_empty() {
        String::new()
    } else {
        format!(" {}.", parts.join("; "))
    }
}

fn rows_noun(n: usize) -> String {
    if n == 1 {
        "1 row".to_string()
    } else {
        format!("{n} rows")
    }
}

/// Value a node fixes for its grouping field.
fn fixed_value<'p>(node: &'p TextNode, field: &str) -> Option<&'p Value> {
    node.predicate.atoms().into_iter().rev().find_map(|a| match a {
        Predicate::Equal { field: f, value } if f == field => Some(value),
        _ => None,
    })
}

/// Interval bounds a node adds for its grouping field, formatted.
fn range_text(node: &TextNode, field: &str, dataset: &Dataset) -> Option<String> {
    let m = dataset.measure_type(field);
    node.predicate.atoms().into_iter().rev().find_map(|a| match a {
        Predicate::Range {
            field: f,
            lo,
            hi,
            inclusive,
        } if f == field => {
            let word = if *inclusive { "through" } else { "to" };
            Some(format!("{} {word} {}", format_value(lo, m), format_value(hi, m)))
        }
        _ => None,
    })
}

fn quartile_text(node: &TextNode, dataset: &Dataset, rows: &[usize]) -> String {
    let Some(field) = node.groupby_field.as_deref() else {
        return String::new();
    };
    let Some(ci) = dataset.column_index(field) else {
        return String::new();
    };
    let own = node.predicate.atoms().into_iter().rev().find(|a| matches!(a, Predicate::Equal { field: f, .. } if f == field)).cloned();
    // Sibling scope: this node's predicate without its own category constraint.
    let scope = Predicate::all(node.predicate.atoms().into_iter().filter(|a| Some(*a) != own.as_ref()).cloned());
    let scope_rows = dataset.matching_rows(&scope).unwrap_or_default();
    let mut parts = Vec::new();
    for q in &node.summary_fields {
        let Some(mine) = summarize(dataset, q, rows) else {
            continue;
        };
        let means: Vec<f64> = dataset
            .distinct_values(ci, scope_rows.iter().copied())
            .into_iter()
            .filter_map(|v| {
                let p = scope.clone().and(Predicate::equal(field, v));
                summarize(dataset, q, &rows_within(dataset, &p, &scope_rows)).map(|s| s.mean)
            })
            .collect();
        if let Some(k) = quartile_of(mine.mean, &means) {
            parts.push(format!("{q} mean is in the {k}{} quartile", ordinal_suffix(k)));
        }
    }
    if parts.is_empty() {
        String::new()
    } else {
        format!(" {}.", parts.join("; "))
    }
}

/// Description of one node, computed from the rows its predicate selects.
pub fn describe_node(node: &TextNode, dataset: &Dataset, visual_present: bool) -> String {
    let rows = dataset.matching_rows(&node.predicate).unwrap_or_default();
    let n = rows.len();
    let field = node.groupby_field.as_deref().unwrap_or_default();
    let measure = dataset.measure_type(field);
    match node.role {
        NodeRole::Root => {
            let filtered = !node.predicate.is_true();
            if filtered && n == 0 {
                return format!("No rows match the selection {}.", node.predicate.describe(dataset));
            }
            let mut s = if visual_present {
                let mut s = match node.mark {
                    Some(mark) => format!("A {} chart", mark.as_str()),
                    None => format!("A chart with {} views", node.children.len()),
                };
                if let Some(first) = node.children.first().filter(|c| c.role == NodeRole::FacetLevel) {
                    let outer = first.groupby_field.as_deref().unwrap_or_default();
                    let k = node.children.len();
                    if first.channel == Some(Channel::Facet) {
                        s.push_str(&format!(" faceted by {outer} into {k} views"));
                    } else {
                        s.push_str(&format!(" with {k} series by {outer}"));
                    }
                }
                format!("{s}. {}.", rows_noun(n))
            } else {
                format!("Data with fields {}. {}.", node.summary_fields.join(", "), rows_noun(n))
            };
            if filtered {
                s.push_str(&format!(" Selection: {}.", node.predicate.describe(dataset)));
            }
            s
        }
        NodeRole::View => {
            let mark = node.mark.map(|m| m.as_str()).unwrap_or("chart");
            format!("A {mark} view. {}.", rows_noun(n))
        }
        NodeRole::FacetLevel => {
            let value = fixed_value(node, field).map(|v| format_value(v, measure)).unwrap_or_default();
            format!("{field} {value}: {}.{}", rows_noun(n), summaries(dataset, &node.summary_fields, &rows))
        }
        NodeRole::AxisLevel | NodeRole::LegendLevel | NodeRole::FieldGroup => {
            let label = channel_label(node.channel, visual_present);
            let head = if measure.is_continuous() {
                let first = node.children.first().and_then(|c| range_text(c, field, dataset));
                let last = node.children.last().and_then(|c| range_text(c, field, dataset));
                let from = first.as_deref().and_then(|t| t.split(' ').next()).unwrap_or("");
                let to = last.as_deref().and_then(|t| t.rsplit(' ').next()).unwrap_or("");
                if node.children.is_empty() {
                    format!("{label} {field}: no intervals")
                } else {
                    format!("{label} {field} from {from} to {to} in {} intervals", node.children.len())
                }
            } else {
                format!("{label} {field}: {} categories", node.children.len())
            };
            format!("{head}. {}.{}", rows_noun(n), summaries(dataset, &node.summary_fields, &rows))
        }
        NodeRole::Interval => {
            let range = range_text(node, field, dataset).unwrap_or_default();
            format!("{range}: {}.{}", rows_noun(n), summaries(dataset, &node.summary_fields, &rows))
        }
        NodeRole::Category => {
            let value = fixed_value(node, field).map(|v| format_value(v, measure)).unwrap_or_default();
            let mut s = format!("{value}: {}.{}", rows_noun(n), summaries(dataset, &node.summary_fields, &rows));
            if matches!(node.channel, Some(Channel::Color) | Some(Channel::Size)) && visual_present {
                s.push_str(&quartile_text(node, dataset, &rows));
            }
            s
        }
        NodeRole::DatumSummary => {
            let Some(&r) = rows.first() else {
                return "No matching row.".to_string();
            };
            let parts: Vec<String> = node
                .summary_fields
                .iter()
                .filter_map(|f| {
                    let ci = dataset.column_index(f)?;
                    Some(format!("{f} {}", format_value(dataset.value(r, ci), dataset.measure_type(f))))
                })
                .collect();
            let mut s = parts.join(", ");
            if n > 1 {
                s = format!("{} ({} rows)", s, n);
            }
            s
        }
    }
}

/// Indented plain-text rendering, one node per line.
pub fn render_plain(root: &TextNode) -> String {
    fn go(node: &TextNode, depth: usize, out: &mut String) {
        out.push_str(&"  ".repeat(depth));
        out.push_str("- ");
        out.push_str(&node.description);
        out.push('\n');
        for c in &node.children {
            go(c, depth + 1, out);
        }
    }
    let mut out = String::new();
    go(root, 0, &mut out);
    out
}
