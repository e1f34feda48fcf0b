//! Seeded synthetic corpora: one random unit direction per class, samples
//! `normalize(direction * concentration + N(0, I))`.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::IngestError;
use crate::model::{self, EmbeddingVector, ExemplarMeta, ExemplarRecord, SpecTable, VehicleSpec};
use crate::rng::SplitMix64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticCorpusConfig {
    pub class_counts: BTreeMap<String, usize>,
    pub dim: usize,
    /// Cluster tightness; 0 gives direction-uniform samples.
    pub concentration: f64,
    pub seed: u64,
}

impl SyntheticCorpusConfig {
    /// `classes` types named `C0`, `C1`, ... with `per_class` samples each.
    pub fn uniform(classes: usize, per_class: usize, dim: usize, concentration: f64, seed: u64) -> Self {
        Self {
            class_counts: (0..classes).map(|i| (format!("C{i}"), per_class)).collect(),
            dim,
            concentration,
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), IngestError> {
        let bad = |m: String| Err(IngestError::InvalidConfig(m));
        if self.dim < 2 {
            return bad(format!("dim must be at least 2, got {}", self.dim));
        }
        if self.class_counts.is_empty() {
            return bad("at least one class is required".into());
        }
        if let Some((t, _)) = self.class_counts.iter().find(|(_, &c)| c == 0) {
            return bad(format!("class {t} has zero samples"));
        }
        if self.class_counts.keys().any(|t| t.is_empty()) {
            return bad("class names must be nonempty".into());
        }
        if !(self.concentration.is_finite() && self.concentration >= 0.0) {
            return bad(format!("concentration must be >= 0, got {}", self.concentration));
        }
        Ok(())
    }
}

fn gaussian(rng: &mut SplitMix64, dim: usize) -> Vec<f64> {
    (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
}

fn unit(v: &[f64]) -> Vec<f64> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter().map(|x| x / n).collect()
}

pub fn generate_synthetic_corpus(cfg: &SyntheticCorpusConfig) -> Result<Vec<ExemplarRecord>, IngestError> {
    cfg.validate()?;
    let mut records = Vec::with_capacity(cfg.class_counts.values().sum());
    for (class, &count) in &cfg.class_counts {
        let mut rng = SplitMix64::derive(cfg.seed, class);
        let direction = unit(&gaussian(&mut rng, cfg.dim));
        for i in 0..count {
            let noise = gaussian(&mut rng, cfg.dim);
            let raw: Vec<f32> = direction
                .iter()
                .zip(&noise)
                .map(|(d, n)| (d * cfg.concentration + n) as f32)
                .collect();
            let embedding = EmbeddingVector::new(raw)
                .and_then(|v| model::normalize(&v))
                .map_err(|e| IngestError::InvalidConfig(e.to_string()))?;
            let meta = ExemplarMeta {
                id: format!("{class}-{i:05}"),
                target_type: class.clone(),
                serial: None,
                depression_deg: if rng.below(2) == 0 { 15.0 } else { 17.0 },
                azimuth_deg: (rng.unit_f64() * 36_000.0).floor() / 100.0,
                condition: None,
                source_tag: Some("synthetic".into()),
            };
            records.push(ExemplarRecord { meta, embedding });
        }
    }
    Ok(records)
}

/// A seeded spec table for synthetic classes. Values are arbitrary but
/// plausible vehicle magnitudes; weapons and qualities vary by class.
pub fn synthetic_vehicle_specs<'a, I>(types: I, seed: u64) -> SpecTable
where
    I: IntoIterator<Item = &'a str>,
{
    const QUALITIES: [&str; 6] = ["tracked", "wheeled", "turret", "armored", "open-top", "amphibious"];
    let mut table = SpecTable::new();
    for t in types {
        let mut rng = SplitMix64::derive(seed, &format!("spec:{t}"));
        let mut u = |lo: f64, hi: f64| lo + (hi - lo) * rng.unit_f64();
        let weight_tons = (u(2.0, 50.0) * 100.0).round() / 100.0;
        let length_m = (u(3.0, 10.0) * 100.0).round() / 100.0;
        let width_m = (u(2.0, 3.8) * 100.0).round() / 100.0;
        let height_m = (u(1.5, 3.5) * 100.0).round() / 100.0;
        let mounted_weapon = u(0.0, 1.0) < 0.6;
        let mut qualities = BTreeSet::new();
        qualities.insert(if u(0.0, 1.0) < 0.5 { "tracked" } else { "wheeled" }.to_string());
        for q in &QUALITIES[2..] {
            if u(0.0, 1.0) < 0.4 {
                qualities.insert(q.to_string());
            }
        }
        table.insert(
            t.to_string(),
            VehicleSpec {
                target_type: t.to_string(),
                weight_tons,
                length_m,
                width_m,
                height_m,
                mounted_weapon,
                qualities,
            },
        );
    }
    table
}
