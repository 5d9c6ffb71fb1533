//! Multimodal data representations: one spec compiled to linked visual,
//! textual and sonified views.

pub mod audio;
pub mod defaults;
pub mod editor;
pub mod ingest;
pub mod model;
pub mod modality;
pub mod predicate;
pub mod scale;
pub mod schemas;
pub mod text;
pub mod value;
pub mod visual;

pub use ingest::{infer_key, infer_types, load_dataset, DataFormat, Dataset};
pub use model::{validate, MultimodalSpec};
pub use predicate::Predicate;
pub use value::Value;
