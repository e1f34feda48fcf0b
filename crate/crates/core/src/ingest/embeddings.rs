use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::IngestError;
use crate::model::{self, EmbeddingVector};

#[derive(Debug, Clone, PartialEq)]
pub struct LoadedEmbeddings {
    /// Unit-normalized vectors for every expected id.
    pub vectors: BTreeMap<String, EmbeddingVector>,
    /// Ids present in the file but not expected; skipped.
    pub extra_ids: Vec<String>,
}

#[derive(Deserialize)]
struct RawLine {
    id: String,
    vec: Vec<Component>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum Component {
    Number(f64),
    Text(String),
}

/// One line of the embeddings file format.
#[derive(Debug, Serialize)]
pub struct EmbeddingLine<'a> {
    pub id: &'a str,
    pub vec: &'a [f32],
}

/// Quotes bare `NaN`, `Infinity` and `-Infinity` tokens (as written by
/// common JSON encoders) so the line parses and the offending id can be
/// reported.
fn quote_non_finite_tokens(line: &str) -> String {
    let mut out = String::with_capacity(line.len() + 8);
    let mut in_string = false;
    let mut escaped = false;
    let mut rest = line;
    while let Some(c) = rest.chars().next() {
        if in_string {
            out.push(c);
            if escaped {
                escaped = false;
            } else if c == '\\' {
                escaped = true;
            } else if c == '"' {
                in_string = false;
            }
            rest = &rest[c.len_utf8()..];
            continue;
        }
        if c == '"' {
            in_string = true;
        } else if let Some(tok) = ["-Infinity", "Infinity", "NaN"]
            .into_iter()
            .find(|t| rest.starts_with(t))
        {
            out.push('"');
            out.push_str(tok);
            out.push('"');
            rest = &rest[tok.len()..];
            continue;
        }
        out.push(c);
        rest = &rest[c.len_utf8()..];
    }
    out
}

pub fn parse_embeddings_str(
    text: &str,
    expected_ids: &BTreeSet<String>,
) -> Result<LoadedEmbeddings, IngestError> {
    let mut vectors = BTreeMap::new();
    let mut extra_ids = Vec::new();
    let mut dim: Option<usize> = None;
    for (n, line) in text.lines().enumerate() {
        let line_no = n + 1;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawLine = serde_json::from_str(line)
            .or_else(|_| serde_json::from_str(&quote_non_finite_tokens(line)))
            .map_err(|e| IngestError::Line {
                line: line_no,
                reason: e.to_string(),
            })?;
        if !expected_ids.contains(&raw.id) {
            tracing::warn!(id = %raw.id, line = line_no, "embedding for unexpected id skipped");
            extra_ids.push(raw.id);
            continue;
        }
        if vectors.contains_key(&raw.id) {
            return Err(IngestError::DuplicateId {
                line: line_no,
                id: raw.id,
            });
        }
        let mut values = Vec::with_capacity(raw.vec.len());
        for c in raw.vec {
            let v = match c {
                Component::Number(v) => v,
                Component::Text(s) => s.trim().parse::<f64>().map_err(|_| IngestError::Line {
                    line: line_no,
                    reason: format!("component {s:?} is not a number"),
                })?,
            };
            let v = v as f32;
            if !v.is_finite() {
                return Err(IngestError::NonFinite { id: raw.id });
            }
            values.push(v);
        }
        match dim {
            None => dim = Some(values.len()),
            Some(d) if d != values.len() => {
                return Err(IngestError::DimensionMismatch {
                    id: raw.id,
                    expected: d,
                    got: values.len(),
                })
            }
            Some(_) => {}
        }
        let v = EmbeddingVector::new(values).map_err(|e| IngestError::Vector {
            id: raw.id.clone(),
            reason: e.to_string(),
        })?;
        let v = model::normalize(&v).map_err(|e| IngestError::Vector {
            id: raw.id.clone(),
            reason: e.to_string(),
        })?;
        vectors.insert(raw.id, v);
    }
    let missing: Vec<String> = expected_ids
        .iter()
        .filter(|id| !vectors.contains_key(*id))
        .cloned()
        .collect();
    if !missing.is_empty() {
        return Err(IngestError::MissingIds(missing));
    }
    Ok(LoadedEmbeddings { vectors, extra_ids })
}

pub fn load_embeddings(
    path: impl AsRef<Path>,
    expected_ids: &BTreeSet<String>,
) -> Result<LoadedEmbeddings, IngestError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| IngestError::io(path, e))?;
    parse_embeddings_str(&text, expected_ids)
}
