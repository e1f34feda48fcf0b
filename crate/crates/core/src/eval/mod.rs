//! Repeated split-and-evaluate runs producing the full metric table.
//!
//! Each seed: stratified split, index the training part, query it with every
//! validation record in id order, answer the five tasks with the configured
//! generator and with the retrieval-free prior, and compute the
//! weighted-random column from the training-split class distribution.

mod table;

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::index::{Index, IndexError, MetadataFilter};
use crate::ingest::{stratified_split, IngestError};
use crate::metrics::{self, EvalReport, MetricsError, RegressionSample, RetrievalOutcome};
use crate::model::{class_distribution, Attribute, ExemplarRecord, ModelError, SpecTable};
use crate::rag::{
    assemble_context, prior_generate, Generator, RagError, StructuredAnswer, Task, VqaQuestion, DEFAULT_K,
};
use crate::rng::SplitMix64;

pub use table::{render_report, write_outputs, Column, MetricKind, RowSpec, ROWS};

pub const DEFAULT_SEEDS: [u64; 5] = [1, 2, 3, 4, 5];
pub const DEFAULT_PARALLELISM: usize = 4;
/// Depth of the shorter all-correct metric, read from the prefix of each hit list.
pub const SHORT_K: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    pub split_ratio: f64,
    pub seeds: Vec<u64>,
    pub k: usize,
    pub filter: MetadataFilter,
    /// In-flight generator calls.
    pub parallelism: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            split_ratio: 0.5,
            seeds: DEFAULT_SEEDS.to_vec(),
            k: DEFAULT_K,
            filter: MetadataFilter::all(),
            parallelism: DEFAULT_PARALLELISM,
        }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<(), EvalError> {
        if self.seeds.is_empty() {
            return Err(EvalError::InvalidConfig("seed list is empty".into()));
        }
        if self.k < SHORT_K {
            return Err(EvalError::InvalidConfig(format!("k must be at least {SHORT_K}, got {}", self.k)));
        }
        if self.parallelism == 0 {
            return Err(EvalError::InvalidConfig("parallelism must be at least 1".into()));
        }
        self.filter.validate().map_err(EvalError::Index)?;
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("config: {0}")]
    InvalidConfig(String),
    #[error("split: {0}")]
    Split(#[from] IngestError),
    #[error("index: {0}")]
    Index(#[from] IndexError),
    #[error("model: {0}")]
    Model(#[from] ModelError),
    #[error("specs: target type {0:?} has no vehicle spec")]
    UnknownType(String),
    #[error("retrieve: query {query_id:?} has {have} candidates after filtering, fewer than k = {k}")]
    TooFewCandidates { query_id: String, have: usize, k: usize },
    #[error("pipeline: {0}")]
    Rag(#[from] RagError),
    #[error("score: {0}")]
    Metrics(#[from] MetricsError),
    #[error("score: no parseable {0} answers to score")]
    NoRegressionSamples(Task),
    #[error("output: {0}")]
    Io(String),
}

impl EvalError {
    pub fn stage(&self) -> &'static str {
        match self {
            EvalError::InvalidConfig(_) => "config",
            EvalError::Split(_) => "split",
            EvalError::Index(_) | EvalError::Model(_) => "index",
            EvalError::UnknownType(_) => "specs",
            EvalError::TooFewCandidates { .. } => "retrieve",
            EvalError::Rag(e) => e.stage(),
            EvalError::Metrics(_) | EvalError::NoRegressionSamples(_) => "score",
            EvalError::Io(_) => "output",
        }
    }
}

/// Everything recorded for one validation query.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryPrediction {
    pub query_id: String,
    pub query_type: String,
    pub hit_ids: Vec<String>,
    pub hit_types: Vec<String>,
    pub answers: BTreeMap<Task, StructuredAnswer>,
    pub prior: StructuredAnswer,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunDetail {
    pub seed: u64,
    pub train_count: usize,
    pub val_count: usize,
    /// Metric values keyed `{row}/{column}`.
    pub metrics: BTreeMap<String, f64>,
    /// Diagnostics that are not table rows (Jaccard means, exclusion counts).
    pub diagnostics: BTreeMap<String, f64>,
    pub predictions: Vec<QueryPrediction>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub config: EvalConfig,
    pub generator: String,
    pub record_count: usize,
    pub report: EvalReport,
    pub diagnostics: EvalReport,
    pub runs: Vec<RunDetail>,
}

pub fn metric_key(row: &str, column: Column) -> String {
    format!("{row}/{}", column.name())
}

fn check_specs<'a>(types: impl Iterator<Item = &'a str>, specs: &SpecTable) -> Result<(), EvalError> {
    for t in types {
        if !specs.contains_key(t) {
            return Err(EvalError::UnknownType(t.to_string()));
        }
    }
    Ok(())
}

/// Runs every configured seed and aggregates the per-run tables.
pub fn run_eval(
    records: &[ExemplarRecord],
    specs: &SpecTable,
    generator: &dyn Generator,
    generator_name: &str,
    cfg: &EvalConfig,
) -> Result<EvalSummary, EvalError> {
    cfg.validate()?;
    check_specs(records.iter().map(|r| r.target_type()), specs)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.parallelism)
        .build()
        .map_err(|e| EvalError::InvalidConfig(e.to_string()))?;
    let runs = cfg
        .seeds
        .iter()
        .map(|&seed| pool.install(|| run_once(records, specs, generator, cfg, seed)))
        .collect::<Result<Vec<_>, _>>()?;
    let report = metrics::aggregate_runs(&runs.iter().map(|r| r.metrics.clone()).collect::<Vec<_>>())?;
    let diagnostics =
        metrics::aggregate_runs(&runs.iter().map(|r| r.diagnostics.clone()).collect::<Vec<_>>())?;
    Ok(EvalSummary {
        config: cfg.clone(),
        generator: generator_name.to_string(),
        record_count: records.len(),
        report,
        diagnostics,
        runs,
    })
}

/// One split-and-evaluate run.
pub fn run_once(
    records: &[ExemplarRecord],
    specs: &SpecTable,
    generator: &dyn Generator,
    cfg: &EvalConfig,
    seed: u64,
) -> Result<RunDetail, EvalError> {
    let plan = stratified_split(records.iter().map(|r| &r.meta), cfg.split_ratio, seed)?;
    let mut train = Vec::with_capacity(plan.train_ids.len());
    let mut val = Vec::with_capacity(plan.val_ids.len());
    for r in records {
        if plan.train_ids.contains(r.id()) {
            train.push(r.clone());
        } else {
            val.push(r);
        }
    }
    val.sort_by(|a, b| a.id().cmp(b.id()));
    let dist = class_distribution(&train)?;
    let index = Index::build(train)?;
    tracing::info!(seed, train = index.len(), val = val.len(), "evaluation run");

    let predictions = val
        .par_iter()
        .map(|r| predict(&index, r, specs, generator, cfg, seed, &dist))
        .collect::<Result<Vec<_>, EvalError>>()?;

    let (metrics, diagnostics) = score(&predictions, specs, &dist, cfg.k)?;
    Ok(RunDetail {
        seed,
        train_count: index.len(),
        val_count: predictions.len(),
        metrics,
        diagnostics,
        predictions,
    })
}

fn predict(
    index: &Index,
    record: &ExemplarRecord,
    specs: &SpecTable,
    generator: &dyn Generator,
    cfg: &EvalConfig,
    seed: u64,
    dist: &crate::model::ClassDistribution,
) -> Result<QueryPrediction, EvalError> {
    let mut q = VqaQuestion::new(record.id(), record.embedding.clone(), Task::Type);
    q.k = cfg.k;
    q.filter = cfg.filter.clone();
    let hits = index.knn(&q.query_embedding, q.k, &q.filter)?;
    if hits.len() < cfg.k {
        return Err(EvalError::TooFewCandidates {
            query_id: q.query_id,
            have: hits.len(),
            k: cfg.k,
        });
    }
    let mut answers = BTreeMap::new();
    for task in Task::ALL {
        q.task = task;
        let ctx = assemble_context(&q, &hits, specs)?;
        answers.insert(task, generator.generate(&ctx)?);
    }
    let prior_seed = SplitMix64::derive(seed, record.id()).next();
    let prior = prior_generate(dist, specs, Task::Type, prior_seed)?;
    Ok(QueryPrediction {
        query_id: record.id().to_string(),
        query_type: record.target_type().to_string(),
        hit_ids: hits.iter().map(|h| h.record_id.clone()).collect(),
        hit_types: hits.into_iter().map(|h| h.target_type).collect(),
        answers,
        prior,
    })
}

/// Task-specific regression samples; unparseable answers are skipped and
/// counted.
fn regression_samples<'a>(
    preds: &'a [QueryPrediction],
    specs: &SpecTable,
    attrs: &[Attribute],
    answer_of: impl Fn(&'a QueryPrediction) -> &'a StructuredAnswer,
) -> (Vec<RegressionSample>, usize) {
    let mut samples = Vec::new();
    let mut excluded = 0;
    for p in preds {
        let a = answer_of(p);
        let truth = &specs[&p.query_type];
        let values: Option<Vec<f64>> = attrs
            .iter()
            .map(|&attr| match attr {
                Attribute::WeightTons => a.weight_tons,
                Attribute::LengthM => a.length_m,
                Attribute::WidthM => a.width_m,
                Attribute::HeightM => a.height_m,
            })
            .collect();
        match values {
            Some(values) => samples.extend(attrs.iter().zip(values).map(|(&attr, predicted)| {
                RegressionSample {
                    query_id: p.query_id.clone(),
                    predicted,
                    truth: truth.attribute(attr),
                    attribute: attr,
                }
            })),
            None => excluded += 1,
        }
    }
    (samples, excluded)
}

#[allow(clippy::type_complexity)]
fn score(
    preds: &[QueryPrediction],
    specs: &SpecTable,
    dist: &crate::model::ClassDistribution,
    k: usize,
) -> Result<(BTreeMap<String, f64>, BTreeMap<String, f64>), EvalError> {
    let mut m = BTreeMap::new();
    let mut diag = BTreeMap::new();
    let mut put = |row: &str, col: Column, v: f64| {
        m.insert(metric_key(row, col), v);
    };

    let outcomes: Vec<RetrievalOutcome> = preds
        .iter()
        .map(|p| RetrievalOutcome {
            query_id: p.query_id.clone(),
            query_type: p.query_type.clone(),
            hit_types: p.hit_types.clone(),
        })
        .collect();
    put("acc1", Column::System, metrics::accuracy_at_1(&outcomes)?);
    put("precision_k", Column::System, metrics::precision_at_k(&outcomes, k)?);
    put("any_k", Column::System, metrics::any_correct_at_k(&outcomes, k)?);
    put("all_short", Column::System, metrics::all_correct_at_k(&outcomes, SHORT_K)?);
    put("all_k", Column::System, metrics::all_correct_at_k(&outcomes, k)?);
    let rb = metrics::random_baseline_retrieval(dist, k)?;
    let rb_short = metrics::random_baseline_retrieval(dist, SHORT_K)?;
    put("acc1", Column::Random, rb.acc1);
    put("precision_k", Column::Random, rb.precision_k);
    put("any_k", Column::Random, rb.any_k);
    put("all_short", Column::Random, rb_short.all_k);
    put("all_k", Column::Random, rb.all_k);

    type Pick<'a> = &'a dyn Fn(&'a QueryPrediction, Task) -> &'a StructuredAnswer;
    let system: Pick = &|p, t| &p.answers[&t];
    let prior: Pick = &|p, _| &p.prior;
    for (col, pick) in [(Column::System, system), (Column::Baseline, prior)] {
        let types: Vec<(Option<&str>, &str)> = preds
            .iter()
            .map(|p| (pick(p, Task::Type).target_type.as_deref(), p.query_type.as_str()))
            .collect();
        put("type", col, metrics::classification_accuracy(&types)?);

        let quals: Vec<_> = preds
            .iter()
            .map(|p| (pick(p, Task::Qualities).qualities.clone(), specs[&p.query_type].qualities.clone()))
            .collect();
        put("qualities", col, metrics::qualities_set_accuracy(&quals)?);
        diag.insert(
            format!("qualities_jaccard/{}", col.name()),
            metrics::qualities_jaccard_mean(&quals)?,
        );

        let weapons: Vec<_> = preds
            .iter()
            .map(|p| (pick(p, Task::MountedWeapon).mounted_weapon, specs[&p.query_type].mounted_weapon))
            .collect();
        put("mounted_weapon", col, metrics::binary_detection_accuracy(&weapons)?);

        for (task, attrs, prefix) in [
            (Task::Weight, &[Attribute::WeightTons][..], "weight"),
            (Task::Dimensions, &Attribute::DIMENSIONS[..], "dims"),
        ] {
            let (samples, excluded) = regression_samples(preds, specs, attrs, |p| pick(p, task));
            diag.insert(format!("{prefix}_excluded/{}", col.name()), excluded as f64);
            if samples.is_empty() {
                return Err(EvalError::NoRegressionSamples(task));
            }
            let r = metrics::regression_metrics(&samples)?;
            put(&format!("{prefix}_mae"), col, r.mae);
            put(&format!("{prefix}_rmse"), col, r.rmse);
            put(&format!("{prefix}_mape"), col, r.mape_pct / 100.0);
        }
    }
    for task in Task::ALL {
        let bad = preds.iter().filter(|p| p.answers[&task].unparseable).count();
        diag.insert(format!("unparseable/{}", task.name()), bad as f64);
    }

    put("type", Column::Random, rb.acc1);
    put("qualities", Column::Random, metrics::random_baseline_qualities(dist, specs)?);
    let p_yes = metrics::mounted_weapon_prior(dist, specs)?;
    put("mounted_weapon", Column::Random, metrics::random_baseline_binary(p_yes)?);
    let w = metrics::random_baseline_regression(dist, specs, Attribute::WeightTons)?;
    put("weight_mae", Column::Random, w.mae);
    put("weight_rmse", Column::Random, w.rmse);
    put("weight_mape", Column::Random, w.mape_pct / 100.0);
    let dm = metrics::random_baseline_dimensions(dist, specs)?;
    put("dims_mae", Column::Random, dm.mae);
    put("dims_rmse", Column::Random, dm.rmse);
    put("dims_mape", Column::Random, dm.mape_pct / 100.0);
    Ok((m, diag))
}

/// Distinct target types in `records`, for building spec tables.
pub fn target_types(records: &[ExemplarRecord]) -> BTreeSet<String> {
    records.iter().map(|r| r.target_type().to_string()).collect()
}
