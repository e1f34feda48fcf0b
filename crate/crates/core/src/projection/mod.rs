//! Two-dimensional projections of exemplar embeddings and their CSV export.

mod export;
mod pca;
mod tsne;

use std::io;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use export::{export_points, read_points, write_points};
pub use pca::{pca_2d, pca_embed, PcaOutput};
pub use tsne::{
    calibrate_row, tsne_2d, tsne_2d_traced, tsne_embed, Calibration, TsneConfig, TsneOutput, TsneTrace,
    MAX_BISECTION_STEPS, PERPLEXITY_TOLERANCE,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectedPoint {
    pub id: String,
    pub target_type: String,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Error)]
pub enum ProjectionError {
    #[error("need at least {min} points, got {n}")]
    TooFewPoints { n: usize, min: usize },
    #[error("invalid projection config: {0}")]
    InvalidConfig(String),
    #[error("point {point:?}: perplexity {perplexity} is unreachable for its distances")]
    InfeasiblePerplexity { point: String, perplexity: f64 },
    #[error("point {0:?} diverged to a non-finite coordinate")]
    NonFinite(String),
    #[error("data is rank-deficient: all points coincide")]
    RankDeficient,
    #[error("{0}: {1}")]
    Io(String, io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}
