use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{parse_answer, AssembledContext, RagError, StructuredAnswer, Task, TEMPLATE_VERSION};
use crate::http::{self, RetryPolicy};
use crate::index::RetrievalHit;
use crate::model::{Attribute, ClassDistribution, SpecTable, VehicleSpec};
use crate::rng::{sample_cumulative, SplitMix64};

/// Turns an assembled context into a structured answer.
pub trait Generator: Send + Sync {
    fn generate(&self, ctx: &AssembledContext) -> Result<StructuredAnswer, RagError>;
}

/// Deterministic local generator driven by the retrieved exemplars' specs.
#[derive(Debug, Clone)]
pub struct StubGenerator {
    specs: Arc<SpecTable>,
}

impl StubGenerator {
    pub fn new(specs: Arc<SpecTable>) -> Self {
        Self { specs }
    }
}

impl Generator for StubGenerator {
    fn generate(&self, ctx: &AssembledContext) -> Result<StructuredAnswer, RagError> {
        stub_generate(&ctx.hits, &self.specs, ctx.task)
    }
}

fn spec_for<'a>(specs: &'a SpecTable, t: &str) -> Result<&'a VehicleSpec, RagError> {
    specs.get(t).ok_or_else(|| RagError::MissingSpec(t.to_string()))
}

fn describe(spec_type: &str, a: &StructuredAnswer) -> String {
    let fmt = |v: Option<f64>| v.map_or_else(|| "?".to_string(), |v| format!("{v:.4}"));
    format!(
        "type={spec_type} weight_tons={} length_m={} width_m={} height_m={} mounted_weapon={}",
        fmt(a.weight_tons),
        fmt(a.length_m),
        fmt(a.width_m),
        fmt(a.height_m),
        if a.mounted_weapon == Some(true) { "yes" } else { "no" },
    )
}

/// Majority vote over hit types (ties: larger summed similarity, then the
/// lexicographically smaller type); numeric attributes are the
/// similarity-weighted mean of the hits' spec values.
pub fn stub_generate(
    hits: &[RetrievalHit],
    specs: &SpecTable,
    _task: Task,
) -> Result<StructuredAnswer, RagError> {
    if hits.is_empty() {
        return Err(RagError::NoHits);
    }
    // Per type: (votes, summed similarity, summed clamped weight).
    let mut tally: BTreeMap<&str, (usize, f64, f64)> = BTreeMap::new();
    for h in hits {
        spec_for(specs, &h.target_type)?;
        let e = tally.entry(h.target_type.as_str()).or_default();
        e.0 += 1;
        e.1 += h.score;
        e.2 += h.score.max(0.0);
    }
    let voted = tally
        .iter()
        .max_by(|(ta, a), (tb, b)| {
            a.0.cmp(&b.0)
                .then(a.1.total_cmp(&b.1))
                .then_with(|| tb.cmp(ta))
        })
        .map(|(t, _)| *t)
        .expect("tally is nonempty");

    let total: f64 = tally.values().map(|v| v.2).sum();
    let weights: Vec<(&str, f64)> = if total > 0.0 {
        tally.iter().map(|(t, v)| (*t, v.2 / total)).collect()
    } else {
        let n = hits.len() as f64;
        tally.iter().map(|(t, v)| (*t, v.0 as f64 / n)).collect()
    };
    let mean = |attr: Attribute| -> f64 {
        // A single contributing type yields its spec value exactly.
        if let [(t, _)] = weights.as_slice() {
            return specs[*t].attribute(attr);
        }
        weights.iter().map(|(t, w)| w * specs[*t].attribute(attr)).sum()
    };

    let spec = &specs[voted];
    let mut answer = StructuredAnswer {
        target_type: Some(voted.to_string()),
        qualities: Some(spec.qualities.clone()),
        mounted_weapon: Some(spec.mounted_weapon),
        weight_tons: Some(mean(Attribute::WeightTons)),
        length_m: Some(mean(Attribute::LengthM)),
        width_m: Some(mean(Attribute::WidthM)),
        height_m: Some(mean(Attribute::HeightM)),
        raw_text: String::new(),
        unparseable: false,
    };
    answer.raw_text = describe(voted, &answer);
    Ok(answer)
}

/// Retrieval-free reference: a type drawn from the prior with `seed`,
/// answered with that type's spec values.
pub fn prior_generate(
    dist: &ClassDistribution,
    specs: &SpecTable,
    _task: Task,
    seed: u64,
) -> Result<StructuredAnswer, RagError> {
    let mut acc = 0.0;
    let cumulative: Vec<f64> = dist
        .iter()
        .map(|(_, p)| {
            acc += p;
            acc
        })
        .collect();
    let u = SplitMix64::new(seed).unit_f64();
    let (t, _) = dist
        .iter()
        .nth(sample_cumulative(&cumulative, u))
        .expect("distribution is nonempty");
    let spec = spec_for(specs, t)?;
    let mut answer = StructuredAnswer {
        target_type: Some(t.to_string()),
        qualities: Some(spec.qualities.clone()),
        mounted_weapon: Some(spec.mounted_weapon),
        weight_tons: Some(spec.weight_tons),
        length_m: Some(spec.length_m),
        width_m: Some(spec.width_m),
        height_m: Some(spec.height_m),
        raw_text: String::new(),
        unparseable: false,
    };
    answer.raw_text = describe(t, &answer);
    Ok(answer)
}

#[derive(Serialize)]
struct GenerateRequest<'a> {
    template_version: &'a str,
    question: &'a str,
    context_lines: &'a [String],
}

#[derive(Deserialize)]
struct GenerateResponse {
    text: String,
}

/// Client for a remote generator speaking `POST {endpoint}/v1/generate`.
#[derive(Debug, Clone)]
pub struct RemoteGenerator {
    endpoint: String,
    policy: RetryPolicy,
    client: reqwest::blocking::Client,
    specs: Arc<SpecTable>,
}

impl RemoteGenerator {
    pub fn new(endpoint: impl Into<String>, specs: Arc<SpecTable>) -> Result<Self, RagError> {
        Self::with_policy(endpoint, specs, RetryPolicy::generator_default())
    }

    pub fn with_policy(
        endpoint: impl Into<String>,
        specs: Arc<SpecTable>,
        policy: RetryPolicy,
    ) -> Result<Self, RagError> {
        Ok(Self {
            endpoint: endpoint.into(),
            client: http::build_client(&policy)?,
            policy,
            specs,
        })
    }

    /// Sends the context and returns the raw reply text.
    pub fn complete(&self, ctx: &AssembledContext) -> Result<String, RagError> {
        let body = GenerateRequest {
            template_version: TEMPLATE_VERSION,
            question: &ctx.question_text,
            context_lines: &ctx.exemplar_lines,
        };
        let url = http::join_url(&self.endpoint, "v1/generate");
        let resp: GenerateResponse =
            http::post_json(&self.client, &self.policy, &url, &ctx.query_id, &body)?;
        Ok(resp.text)
    }
}

impl Generator for RemoteGenerator {
    fn generate(&self, ctx: &AssembledContext) -> Result<StructuredAnswer, RagError> {
        let text = self.complete(ctx)?;
        let answer = parse_answer(ctx.task, &text, &self.specs);
        if answer.unparseable {
            tracing::warn!(query = %ctx.query_id, task = %ctx.task, "unparseable generator answer");
        }
        Ok(answer)
    }
}
