//! Retrieval-augmented target recognition over precomputed SAR chip
//! embeddings: an exact cosine k-NN exemplar index, a grounded answer
//! pipeline, the evaluation metrics with their weighted-random baselines, and
//! 2-D projections.

pub mod eval;
pub mod http;
pub mod index;
pub mod ingest;
pub mod metrics;
pub mod model;
pub mod projection;
pub mod rag;
pub mod rng;

pub use index::{Index, IndexError, MetadataFilter, RetrievalHit};
pub use model::{
    class_distribution, cosine_similarity, normalize, Attribute, ClassDistribution, EmbeddingVector,
    ExemplarMeta, ExemplarRecord, ModelError, SpecTable, VehicleSpec,
};
pub use rag::{answer_pipeline, Generator, StructuredAnswer, Task, VqaQuestion};
pub use rng::SplitMix64;
