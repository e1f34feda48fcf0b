//! Retrieval requests shared by `ragatr query` and the HTTP service.

use ragatr_core::{EmbeddingVector, Index, MetadataFilter, RetrievalHit};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HitOut {
    pub id: String,
    #[serde(rename = "type")]
    pub target_type: String,
    pub score: f64,
    pub rank: usize,
}

impl From<RetrievalHit> for HitOut {
    fn from(h: RetrievalHit) -> Self {
        Self {
            id: h.record_id,
            target_type: h.target_type,
            score: h.score,
            rank: h.rank,
        }
    }
}

/// Where the query vector comes from.
#[derive(Debug, Clone)]
pub enum QuerySource {
    Vector(Vec<f32>),
    RecordId(String),
}

#[derive(Debug, thiserror::Error)]
pub enum QueryError {
    #[error("no record with id {0:?}")]
    UnknownId(String),
    #[error("{0}")]
    Invalid(String),
}

impl From<QueryError> for CliError {
    fn from(e: QueryError) -> Self {
        CliError::Data(e.to_string())
    }
}

pub fn query_vector(index: &Index, source: &QuerySource) -> Result<EmbeddingVector, QueryError> {
    let values = match source {
        QuerySource::Vector(v) => v.clone(),
        QuerySource::RecordId(id) => index
            .embedding(id)
            .ok_or_else(|| QueryError::UnknownId(id.clone()))?
            .to_vec(),
    };
    EmbeddingVector::new(values).map_err(|e| QueryError::Invalid(e.to_string()))
}

pub fn retrieve(
    index: &Index,
    source: &QuerySource,
    k: usize,
    filter: &MetadataFilter,
) -> Result<Vec<HitOut>, QueryError> {
    let q = query_vector(index, source)?;
    let hits = index
        .knn(&q, k, filter)
        .map_err(|e| QueryError::Invalid(e.to_string()))?;
    Ok(hits.into_iter().map(HitOut::from).collect())
}
