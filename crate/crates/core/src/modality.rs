//! Reification of a shared selection predicate in each modality.
//!
//! Each modality is a [`ModalityBackend`] registered by name. A selection
//! emitted by one modality is reified by every other backend: the chart
//! highlights, the sonification filters, the textual structure re-scopes.

use std::collections::BTreeSet;

use serde::Serialize;
use serde_json::Value as Json;
use thiserror::Error;

use crate::audio::{schedule_all, AudioError, AudioSchedule, ScheduleOptions};
use crate::ingest::Dataset;
use crate::model::MultimodalSpec;
use crate::predicate::{Modality, Predicate, PredicateError, SyncMessage};
use crate::text::{build_tree, rescope_tree, TextNode};
use crate::visual::{apply_highlight, compile_visual, emphasized_rows, VisualError};

#[derive(Debug, Error)]
pub enum ModalityError {
    #[error(transparent)]
    Predicate(#[from] PredicateError),
    #[error(transparent)]
    Visual(#[from] VisualError),
    #[error(transparent)]
    Audio(#[from] AudioError),
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "effect", rename_all = "kebab-case")]
pub enum ReifiedEffect {
    Highlight { doc: Json },
    Filter { filter: Predicate, schedules: Vec<AudioSchedule> },
    Rescope { tree: TextNode },
}

pub trait ModalityBackend: Send + Sync {
    fn modality(&self) -> Modality;

    /// The effect of `predicate` in this modality, or `None` when the spec
    /// has no output in it.
    fn reify(&self, spec: &MultimodalSpec, dataset: &Dataset, predicate: &Predicate) -> Result<Option<ReifiedEffect>, ModalityError>;

    /// Rows the effect keeps in view.
    fn selected_rows(&self, effect: &ReifiedEffect, dataset: &Dataset) -> Vec<usize>;
}

struct VisualBackend;

impl ModalityBackend for VisualBackend {
    fn modality(&self) -> Modality {
        Modality::Visual
    }

    fn reify(&self, spec: &MultimodalSpec, dataset: &Dataset, predicate: &Predicate) -> Result<Option<ReifiedEffect>, ModalityError> {
        if spec.visual.is_empty() {
            return Ok(None);
        }
        let doc = compile_visual(spec, dataset)?;
        Ok(Some(ReifiedEffect::Highlight {
            doc: apply_highlight(&doc, predicate, dataset),
        }))
    }

    fn selected_rows(&self, effect: &ReifiedEffect, _dataset: &Dataset) -> Vec<usize> {
        match effect {
            ReifiedEffect::Highlight { doc } => emphasized_rows(doc),
            _ => Vec::new(),
        }
    }
}

struct TextBackend;

impl ModalityBackend for TextBackend {
    fn modality(&self) -> Modality {
        Modality::Text
    }

    fn reify(&self, spec: &MultimodalSpec, dataset: &Dataset, predicate: &Predicate) -> Result<Option<ReifiedEffect>, ModalityError> {
        let tree = build_tree(spec, dataset);
        Ok(Some(ReifiedEffect::Rescope {
            tree: rescope_tree(&tree, predicate, dataset),
        }))
    }

    fn selected_rows(&self, effect: &ReifiedEffect, dataset: &Dataset) -> Vec<usize> {
        match effect {
            ReifiedEffect::Rescope { tree } => tree.retained_rows(dataset),
            _ => Vec::new(),
        }
    }
}

struct AudioBackend;

impl ModalityBackend for AudioBackend {
    fn modality(&self) -> Modality {
        Modality::Audio
    }

    fn reify(&self, spec: &MultimodalSpec, dataset: &Dataset, predicate: &Predicate) -> Result<Option<ReifiedEffect>, ModalityError> {
        if spec.audio.is_empty() {
            return Ok(None);
        }
        let options = ScheduleOptions {
            filter: predicate.clone(),
            ..Default::default()
        };
        Ok(Some(ReifiedEffect::Filter {
            filter: predicate.clone(),
            schedules: schedule_all(spec, dataset, &options)?,
        }))
    }

    /// Rows some scheduled tone sonifies.
    fn selected_rows(&self, effect: &ReifiedEffect, dataset: &Dataset) -> Vec<usize> {
        let ReifiedEffect::Filter { schedules, .. } = effect else {
            return Vec::new();
        };
        let mut rows = BTreeSet::new();
        for s in schedules {
            for t in s.tones() {
                rows.extend(dataset.matching_rows(&t.source_predicate).unwrap_or_default());
            }
        }
        rows.into_iter().collect()
    }
}

pub struct ModalityRegistry {
    backends: Vec<Box<dyn ModalityBackend>>,
}

impl Default for ModalityRegistry {
    fn default() -> Self {
        Self::standard()
    }
}

impl ModalityRegistry {
    pub fn empty() -> Self {
        ModalityRegistry { backends: Vec::new() }
    }

    pub fn standard() -> Self {
        let mut r = Self::empty();
        r.register(VisualBackend);
        r.register(TextBackend);
        r.register(AudioBackend);
        r
    }

    /// Adds a backend, replacing any registered for the same modality.
    pub fn register(&mut self, backend: impl ModalityBackend + 'static) {
        self.backends.retain(|b| b.modality() != backend.modality());
        self.backends.push(Box::new(backend));
    }

    pub fn get(&self, modality: Modality) -> Option<&dyn ModalityBackend> {
        self.backends.iter().find(|b| b.modality() == modality).map(|b| b.as_ref())
    }

    pub fn by_name(&self, name: &str) -> Option<&dyn ModalityBackend> {
        self.backends
            .iter()
            .find(|b| b.modality().as_str() == name)
            .map(|b| b.as_ref())
    }

    /// Effects of a selection message in every modality except its source.
    pub fn reify(&self, message: &SyncMessage, spec: &MultimodalSpec, dataset: &Dataset) -> Result<Vec<(Modality, ReifiedEffect)>, ModalityError> {
        message.predicate.check(dataset)?;
        let mut out = Vec::new();
        for b in &self.backends {
            if b.modality() == message.source {
                continue;
            }
            if let Some(effect) = b.reify(spec, dataset, &message.predicate)? {
                out.push((b.modality(), effect));
            }
        }
        Ok(out)
    }
}

/// Reifies with the standard backends.
pub fn reify(message: &SyncMessage, spec: &MultimodalSpec, dataset: &Dataset) -> Result<Vec<(Modality, ReifiedEffect)>, ModalityError> {
    ModalityRegistry::standard().reify(message, spec, dataset)
}
