//! Shared fixtures for the benchmarks.

use ragatr_core::ingest::{generate_synthetic_corpus, SyntheticCorpusConfig};
use ragatr_core::{EmbeddingVector, ExemplarRecord, SplitMix64};

/// A clustered synthetic corpus of `classes * per_class` records.
pub fn corpus(classes: usize, per_class: usize, dim: usize, seed: u64) -> Vec<ExemplarRecord> {
    generate_synthetic_corpus(&SyntheticCorpusConfig::uniform(classes, per_class, dim, 3.0, seed))
        .expect("valid synthetic config")
}

/// Uniform-cube query vectors.
pub fn queries(n: usize, dim: usize, seed: u64) -> Vec<EmbeddingVector> {
    let mut rng = SplitMix64::new(seed);
    (0..n)
        .map(|_| {
            let v = (0..dim).map(|_| (rng.unit_f64() * 2.0 - 1.0) as f32).collect();
            EmbeddingVector::new(v).expect("finite components")
        })
        .collect()
}
