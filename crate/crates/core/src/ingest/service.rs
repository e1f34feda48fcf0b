//! Client for a remote image-embedding service.
//!
//! `POST {endpoint}/v1/embed` with `{"id": ..., "image": <base64 bytes>}`,
//! answered by `{"id": ..., "vec": [...]}`. Every attempt carries an
//! `x-ragatr-request-id` header of the form `{id}/{attempt}`.

use std::collections::BTreeMap;
use std::fs;

use base64::Engine;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{DatasetManifest, IngestError};
use crate::http::{self, HttpError, RetryPolicy};
use crate::model::{self, EmbeddingVector};

#[derive(Debug, Clone)]
pub struct EmbeddingServiceClient {
    endpoint: String,
    policy: RetryPolicy,
    concurrency: usize,
    client: reqwest::blocking::Client,
}

#[derive(Serialize)]
struct EmbedRequest<'a> {
    id: &'a str,
    image: String,
}

#[derive(Deserialize)]
struct EmbedResponse {
    id: String,
    vec: Vec<f32>,
}

impl EmbeddingServiceClient {
    pub const DEFAULT_CONCURRENCY: usize = 8;

    pub fn new(endpoint: impl Into<String>) -> Result<Self, IngestError> {
        Self::with_policy(endpoint, RetryPolicy::embedding_default())
    }

    pub fn with_policy(endpoint: impl Into<String>, policy: RetryPolicy) -> Result<Self, IngestError> {
        let client = http::build_client(&policy).map_err(IngestError::Http)?;
        Ok(Self {
            endpoint: endpoint.into(),
            policy,
            concurrency: Self::DEFAULT_CONCURRENCY,
            client,
        })
    }

    pub fn concurrency(mut self, n: usize) -> Self {
        self.concurrency = n.max(1);
        self
    }

    pub fn embed(&self, id: &str, image: &[u8]) -> Result<Vec<f32>, HttpError> {
        let body = EmbedRequest {
            id,
            image: base64::engine::general_purpose::STANDARD.encode(image),
        };
        let url = http::join_url(&self.endpoint, "v1/embed");
        let resp: EmbedResponse = http::post_json(&self.client, &self.policy, &url, id, &body)?;
        if resp.id != id {
            return Err(HttpError::Decode(format!(
                "response id {:?} does not match request id {id:?}",
                resp.id
            )));
        }
        Ok(resp.vec)
    }
}

/// Embeds every manifest entry's image. Results are keyed by id, so request
/// completion order does not matter; dimension consistency is checked in
/// manifest order.
pub fn fetch_embeddings(
    client: &EmbeddingServiceClient,
    manifest: &DatasetManifest,
) -> Result<BTreeMap<String, EmbeddingVector>, IngestError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(client.concurrency)
        .build()
        .map_err(|e| IngestError::InvalidConfig(e.to_string()))?;

    let results: Vec<(String, Result<Vec<f32>, String>)> = pool.install(|| {
        manifest
            .entries
            .par_iter()
            .map(|entry| {
                let id = entry.meta.id.clone();
                let outcome = manifest
                    .image_path(entry)
                    .ok_or_else(|| "entry has no image_path".to_string())
                    .and_then(|p| fs::read(&p).map_err(|e| format!("{}: {e}", p.display())))
                    .and_then(|bytes| client.embed(&id, &bytes).map_err(|e| e.to_string()));
                (id, outcome)
            })
            .collect()
    });

    let mut vectors = BTreeMap::new();
    let mut failures = Vec::new();
    let mut dim: Option<usize> = None;
    for (id, outcome) in results {
        let values = match outcome {
            Ok(v) => v,
            Err(reason) => {
                failures.push((id, reason));
                continue;
            }
        };
        match dim {
            None => dim = Some(values.len()),
            Some(d) if d != values.len() => {
                return Err(IngestError::InconsistentDimension {
                    id,
                    expected: d,
                    got: values.len(),
                })
            }
            Some(_) => {}
        }
        match EmbeddingVector::new(values).and_then(|v| model::normalize(&v)) {
            Ok(v) => {
                vectors.insert(id, v);
            }
            Err(e) => failures.push((id, e.to_string())),
        }
    }
    if !failures.is_empty() {
        return Err(IngestError::FetchFailed(failures));
    }
    Ok(vectors)
}
