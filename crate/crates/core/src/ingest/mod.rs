//! Corpus ingestion: line-oriented manifests and embedding files, vehicle
//! spec tables, the remote embedding client, seeded stratified splits and
//! synthetic corpora.

mod embeddings;
mod manifest;
mod service;
mod specs;
mod split;
mod synthetic;

use std::io;
use std::path::Path;

use thiserror::Error;

use crate::http::HttpError;

pub use embeddings::{load_embeddings, parse_embeddings_str, EmbeddingLine, LoadedEmbeddings};
pub use manifest::{parse_manifest, parse_manifest_str, DatasetManifest, ManifestEntry};
pub use service::{fetch_embeddings, EmbeddingServiceClient};
pub use specs::{parse_vehicle_specs, parse_vehicle_specs_str, vehicle_specs_to_string};
pub use split::{stratified_split, train_count, SplitPlan};
pub use synthetic::{generate_synthetic_corpus, synthetic_vehicle_specs, SyntheticCorpusConfig};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("line {line}: {reason}")]
    Line { line: usize, reason: String },
    #[error("line {line}: duplicate id {id:?}")]
    DuplicateId { line: usize, id: String },
    #[error("embedding for {id:?} has a non-finite component")]
    NonFinite { id: String },
    #[error("embedding for {id:?} has dimension {got}, expected {expected}")]
    DimensionMismatch { id: String, expected: usize, got: usize },
    #[error("embedding for {id:?}: {reason}")]
    Vector { id: String, reason: String },
    #[error("missing embeddings for ids: {}", .0.join(", "))]
    MissingIds(Vec<String>),
    #[error("inconsistent dimension: {id:?} returned {got}, expected {expected}")]
    InconsistentDimension { id: String, expected: usize, got: usize },
    #[error("embedding fetch failed for {} ids: {}", .0.len(), format_failures(.0))]
    FetchFailed(Vec<(String, String)>),
    #[error("class {0:?} has a single member and cannot be split")]
    SingletonClass(String),
    #[error("invalid split: {0}")]
    InvalidSplit(String),
    #[error("duplicate vehicle spec for {0:?}")]
    DuplicateType(String),
    #[error("invalid vehicle spec: {0}")]
    InvalidSpec(String),
    #[error("malformed file: {0}")]
    Format(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Http(HttpError),
    #[error("{path}: {source}")]
    Io { path: String, source: io::Error },
}

impl IngestError {
    pub(crate) fn io(path: &Path, source: io::Error) -> Self {
        IngestError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}

fn format_failures(f: &[(String, String)]) -> String {
    f.iter()
        .map(|(id, reason)| format!("{id} ({reason})"))
        .collect::<Vec<_>>()
        .join("; ")
}
