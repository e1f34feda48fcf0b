//! Retrieve, assemble grounded context, generate, parse.

mod context;
mod generator;
mod parse;

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::http::HttpError;
use crate::index::{Index, IndexError, MetadataFilter};
use crate::model::{EmbeddingVector, SpecTable};

pub use context::{assemble_context, AssembledContext, TEMPLATE_VERSION};
pub use generator::{prior_generate, stub_generate, Generator, RemoteGenerator, StubGenerator};
pub use parse::{parse_answer, parse_numeric_answer, AnswerParseError};

pub const DEFAULT_K: usize = 5;

#[derive(Debug, Clone, Error)]
pub enum RagError {
    #[error("retrieve: {0}")]
    Retrieve(#[from] IndexError),
    #[error("assemble: no retrieval hits")]
    NoHits,
    #[error("assemble: no vehicle spec for target type {0:?}")]
    MissingSpec(String),
    #[error("generate: {0}")]
    Generate(#[from] HttpError),
}

impl RagError {
    pub fn stage(&self) -> &'static str {
        match self {
            RagError::Retrieve(_) => "retrieve",
            RagError::NoHits | RagError::MissingSpec(_) => "assemble",
            RagError::Generate(_) => "generate",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Type,
    Qualities,
    MountedWeapon,
    Weight,
    Dimensions,
}

impl Task {
    pub const ALL: [Task; 5] = [
        Task::Type,
        Task::Qualities,
        Task::MountedWeapon,
        Task::Weight,
        Task::Dimensions,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Task::Type => "type",
            Task::Qualities => "qualities",
            Task::MountedWeapon => "mounted_weapon",
            Task::Weight => "weight",
            Task::Dimensions => "dimensions",
        }
    }

    pub fn question_text(self) -> &'static str {
        match self {
            Task::Type => "What type of vehicle is shown in this SAR image?",
            Task::Qualities => "Which descriptive qualities apply to the vehicle in this SAR image?",
            Task::MountedWeapon => "Does the vehicle in this SAR image carry a mounted weapon system?",
            Task::Weight => "What is the weight in metric tons of the vehicle in this SAR image?",
            Task::Dimensions => {
                "What are the length, width and height in meters of the vehicle in this SAR image?"
            }
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Task {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Task::ALL
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| format!("unknown task {s:?}"))
    }
}

#[derive(Debug, Clone)]
pub struct VqaQuestion {
    pub query_id: String,
    pub query_embedding: EmbeddingVector,
    pub task: Task,
    pub k: usize,
    pub filter: MetadataFilter,
}

impl VqaQuestion {
    pub fn new(query_id: impl Into<String>, query_embedding: EmbeddingVector, task: Task) -> Self {
        Self {
            query_id: query_id.into(),
            query_embedding,
            task,
            k: DEFAULT_K,
            filter: MetadataFilter::all(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StructuredAnswer {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_type: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub qualities: Option<BTreeSet<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mounted_weapon: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weight_tons: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub length_m: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub width_m: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub height_m: Option<f64>,
    pub raw_text: String,
    /// Set when the field the task asks for could not be extracted.
    #[serde(default)]
    pub unparseable: bool,
}

impl StructuredAnswer {
    /// Whether the fields demanded by `task` are all present.
    pub fn answers(&self, task: Task) -> bool {
        match task {
            Task::Type => self.target_type.is_some(),
            Task::Qualities => self.qualities.is_some(),
            Task::MountedWeapon => self.mounted_weapon.is_some(),
            Task::Weight => self.weight_tons.is_some(),
            Task::Dimensions => {
                self.length_m.is_some() && self.width_m.is_some() && self.height_m.is_some()
            }
        }
    }
}

/// Retrieves `q.k` neighbors, assembles the context and asks the generator.
pub fn answer_pipeline(
    index: &Index,
    q: &VqaQuestion,
    generator: &dyn Generator,
    specs: &SpecTable,
) -> Result<StructuredAnswer, RagError> {
    let hits = index.knn(&q.query_embedding, q.k, &q.filter)?;
    let ctx = assemble_context(q, &hits, specs)?;
    generator.generate(&ctx)
}
