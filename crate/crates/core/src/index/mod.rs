//! Exact cosine k-nearest-neighbor index over exemplar records.
//!
//! Embeddings are stored unit-normalized, so a query is normalized once and
//! scored against every stored row by a plain dot product. Results are
//! ordered by score descending, then record id ascending.
//!
//! The index is single-writer: [`Index::append`] takes `&mut self`. Once a
//! mutation returns, any number of threads may call [`Index::knn`] on a
//! shared reference.

mod filter;
mod snapshot;

use std::cmp::{Ordering, Reverse};
use std::collections::{BTreeMap, BinaryHeap, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{self, EmbeddingVector, ExemplarMeta, ExemplarRecord, ModelError};

pub use filter::{FilterClause, FilterField, FilterOp, FilterValue, MetadataFilter};
pub use snapshot::{load_snapshot, read_snapshot, save_snapshot, write_snapshot, SnapshotError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IndexError {
    #[error("cannot build an index from an empty record list")]
    Empty,
    #[error("duplicate record id {0:?}")]
    DuplicateId(String),
    #[error("dimension mismatch: index has {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("k must be at least 1")]
    InvalidK,
    #[error("invalid filter: {0}")]
    InvalidFilter(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// One ranked neighbor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalHit {
    pub record_id: String,
    pub target_type: String,
    pub score: f64,
    /// 1-based.
    pub rank: usize,
    pub depression_deg: f64,
    pub azimuth_deg: f64,
}

#[derive(Debug, Clone)]
pub struct Index {
    dim: usize,
    metas: Vec<ExemplarMeta>,
    /// Row-major, `metas.len() * dim` unit-norm components.
    vectors: Vec<f32>,
    positions: HashMap<String, usize>,
}

impl Index {
    pub fn build(records: Vec<ExemplarRecord>) -> Result<Self, IndexError> {
        let dim = records.first().ok_or(IndexError::Empty)?.embedding.dim();
        let mut index = Self {
            dim,
            metas: Vec::with_capacity(records.len()),
            vectors: Vec::with_capacity(records.len() * dim),
            positions: HashMap::with_capacity(records.len()),
        };
        index.append(records)?;
        Ok(index)
    }

    /// Adds records. Either every record is added or none is.
    pub fn append(&mut self, records: Vec<ExemplarRecord>) -> Result<(), IndexError> {
        let mut fresh: HashMap<&str, ()> = HashMap::with_capacity(records.len());
        for r in &records {
            if r.embedding.dim() != self.dim {
                return Err(IndexError::DimensionMismatch {
                    expected: self.dim,
                    got: r.embedding.dim(),
                });
            }
            r.meta.validate()?;
            if self.positions.contains_key(r.id()) || fresh.insert(r.id(), ()).is_some() {
                return Err(IndexError::DuplicateId(r.id().to_string()));
            }
        }
        drop(fresh);
        for r in records {
            let embedding = if r.embedding.is_normalized() {
                r.embedding
            } else {
                model::normalize(&r.embedding)?
            };
            self.push_raw(r.meta, embedding.values());
        }
        Ok(())
    }

    /// Inserts stored components verbatim. Callers guarantee dimension,
    /// uniqueness and normalization.
    fn push_raw(&mut self, meta: ExemplarMeta, components: &[f32]) {
        debug_assert_eq!(components.len(), self.dim);
        self.positions.insert(meta.id.clone(), self.metas.len());
        self.metas.push(meta);
        self.vectors.extend_from_slice(components);
    }

    pub fn len(&self) -> usize {
        self.metas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.metas.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn contains(&self, id: &str) -> bool {
        self.positions.contains_key(id)
    }

    pub fn meta(&self, id: &str) -> Option<&ExemplarMeta> {
        self.positions.get(id).map(|&i| &self.metas[i])
    }

    /// Stored (normalized) components of a record.
    pub fn embedding(&self, id: &str) -> Option<&[f32]> {
        self.positions.get(id).map(|&i| self.row(i))
    }

    fn row(&self, i: usize) -> &[f32] {
        &self.vectors[i * self.dim..(i + 1) * self.dim]
    }

    /// Records in insertion order.
    pub fn iter(&self) -> impl Iterator<Item = (&ExemplarMeta, &[f32])> {
        self.metas.iter().enumerate().map(|(i, m)| (m, self.row(i)))
    }

    pub fn records(&self) -> Vec<ExemplarRecord> {
        self.iter()
            .map(|(m, v)| ExemplarRecord {
                meta: m.clone(),
                embedding: EmbeddingVector::new_normalized(v.to_vec())
                    .expect("stored rows are unit norm"),
            })
            .collect()
    }

    pub fn class_histogram(&self) -> BTreeMap<String, usize> {
        let mut h = BTreeMap::new();
        for m in &self.metas {
            *h.entry(m.target_type.clone()).or_insert(0) += 1;
        }
        h
    }

    /// Exact top-`k` search among records passing `filter`.
    pub fn knn(
        &self,
        query: &EmbeddingVector,
        k: usize,
        filter: &MetadataFilter,
    ) -> Result<Vec<RetrievalHit>, IndexError> {
        if k == 0 {
            return Err(IndexError::InvalidK);
        }
        if query.dim() != self.dim {
            return Err(IndexError::DimensionMismatch {
                expected: self.dim,
                got: query.dim(),
            });
        }
        filter.validate()?;
        let q = model::normalize(query)?;
        let q = q.values();

        // Min-heap on "goodness": the root is the weakest kept candidate.
        let mut heap: BinaryHeap<Reverse<Candidate<'_>>> = BinaryHeap::with_capacity(k + 1);
        for (pos, meta) in self.metas.iter().enumerate() {
            if !filter.matches(meta) {
                continue;
            }
            let cand = Candidate {
                score: model::dot(q, self.row(pos)),
                id: &meta.id,
                pos,
            };
            if heap.len() < k {
                heap.push(Reverse(cand));
            } else if let Some(Reverse(worst)) = heap.peek() {
                if cand > *worst {
                    heap.pop();
                    heap.push(Reverse(cand));
                }
            }
        }

        let mut best: Vec<Candidate<'_>> = heap.into_iter().map(|Reverse(c)| c).collect();
        best.sort_by(|a, b| b.cmp(a));
        Ok(best
            .into_iter()
            .enumerate()
            .map(|(i, c)| {
                let meta = &self.metas[c.pos];
                RetrievalHit {
                    record_id: meta.id.clone(),
                    target_type: meta.target_type.clone(),
                    score: c.score,
                    rank: i + 1,
                    depression_deg: meta.depression_deg,
                    azimuth_deg: meta.azimuth_deg,
                }
            })
            .collect())
    }
}

/// Greater means a better match: higher score, then smaller id.
#[derive(Debug, Clone, Copy)]
struct Candidate<'a> {
    score: f64,
    id: &'a str,
    pos: usize,
}

impl PartialEq for Candidate<'_> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Candidate<'_> {}

impl PartialOrd for Candidate<'_> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Candidate<'_> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.score
            .total_cmp(&other.score)
            .then_with(|| other.id.cmp(self.id))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(id: &str, t: &str, dep: f64, v: &[f32]) -> ExemplarRecord {
        ExemplarRecord::new(
            ExemplarMeta {
                id: id.into(),
                target_type: t.into(),
                serial: None,
                depression_deg: dep,
                azimuth_deg: 0.0,
                condition: None,
                source_tag: None,
            },
            EmbeddingVector::new(v.to_vec()).unwrap(),
        )
        .unwrap()
    }

    fn q(v: &[f32]) -> EmbeddingVector {
        EmbeddingVector::new(v.to_vec()).unwrap()
    }

    fn ids(hits: &[RetrievalHit]) -> Vec<&str> {
        hits.iter().map(|h| h.record_id.as_str()).collect()
    }

    fn three() -> Index {
        Index::build(vec![
            record("e1", "A", 15.0, &[1.0, 0.0]),
            record("e2", "B", 17.0, &[0.0, 1.0]),
            record("e3", "A", 15.0, &[0.6, 0.8]),
        ])
        .unwrap()
    }

    #[test]
    fn build_reports_shape() {
        let idx = Index::build(vec![
            record("a", "A", 15.0, &[1., 2., 3., 4.]),
            record("b", "A", 15.0, &[4., 3., 2., 1.]),
            record("c", "B", 15.0, &[1., 0., 0., 0.]),
        ])
        .unwrap();
        assert_eq!((idx.len(), idx.dim()), (3, 4));
    }

    #[test]
    fn build_errors() {
        assert_eq!(Index::build(vec![]).unwrap_err(), IndexError::Empty);
        let dup = Index::build(vec![
            record("x1", "A", 15.0, &[1., 0.]),
            record("x1", "B", 15.0, &[0., 1.]),
        ]);
        assert_eq!(dup.unwrap_err(), IndexError::DuplicateId("x1".into()));
        let mismatch = Index::build(vec![
            record("a", "A", 15.0, &[1., 0.]),
            record("b", "A", 15.0, &[1., 0., 0.]),
        ]);
        assert!(matches!(
            mismatch,
            Err(IndexError::DimensionMismatch { expected: 2, got: 3 })
        ));
    }

    #[test]
    fn knn_example() {
        let hits = three().knn(&q(&[1., 0.]), 2, &MetadataFilter::all()).unwrap();
        assert_eq!(ids(&hits), ["e1", "e3"]);
        assert!((hits[0].score - 1.0).abs() < 1e-7);
        assert!((hits[1].score - 0.6).abs() < 1e-7);
        assert_eq!((hits[0].rank, hits[1].rank), (1, 2));
    }

    #[test]
    fn self_retrieval() {
        let hits = three().knn(&q(&[0.6, 0.8]), 1, &MetadataFilter::all()).unwrap();
        assert_eq!(ids(&hits), ["e3"]);
        assert!((hits[0].score - 1.0).abs() < 1e-6);
    }

    #[test]
    fn filter_restricts_candidates() {
        let f: MetadataFilter = "depression_deg=15".parse().unwrap();
        let hits = three().knn(&q(&[0., 1.]), 5, &f).unwrap();
        assert_eq!(ids(&hits), ["e3", "e1"]);
    }

    #[test]
    fn ties_break_by_id() {
        let idx = Index::build(vec![
            record("c", "A", 15.0, &[1., 1.]),
            record("a", "A", 15.0, &[1., 1.]),
            record("b", "A", 15.0, &[2., 2.]),
        ])
        .unwrap();
        let hits = idx.knn(&q(&[1., 1.]), 3, &MetadataFilter::all()).unwrap();
        assert_eq!(ids(&hits), ["a", "b", "c"]);
    }

    #[test]
    fn knn_errors() {
        let idx = three();
        assert_eq!(
            idx.knn(&q(&[1., 0.]), 0, &MetadataFilter::all()).unwrap_err(),
            IndexError::InvalidK
        );
        assert!(matches!(
            idx.knn(&q(&[1., 0., 0.]), 1, &MetadataFilter::all()),
            Err(IndexError::DimensionMismatch { .. })
        ));
        assert!(matches!(
            idx.knn(&q(&[0., 0.]), 1, &MetadataFilter::all()),
            Err(IndexError::Model(ModelError::ZeroNorm))
        ));
    }

    #[test]
    fn append_changes_nearest() {
        let mut idx = three();
        let query = q(&[0.8, 0.6]);
        let before = idx.knn(&query, 1, &MetadataFilter::all()).unwrap();
        assert_eq!(ids(&before), ["e3"]);
        idx.append(vec![record("e4", "C", 15.0, &[0.8, 0.6])]).unwrap();
        assert_eq!(idx.len(), 4);
        let after = idx.knn(&query, 1, &MetadataFilter::all()).unwrap();
        assert_eq!(ids(&after), ["e4"]);
    }

    #[test]
    fn append_rejects_collision_atomically() {
        let mut idx = three();
        let err = idx
            .append(vec![
                record("e9", "C", 15.0, &[1., 1.]),
                record("e2", "C", 15.0, &[1., 1.]),
            ])
            .unwrap_err();
        assert_eq!(err, IndexError::DuplicateId("e2".into()));
        assert_eq!(idx.len(), 3);
        assert!(!idx.contains("e9"));
    }
}
