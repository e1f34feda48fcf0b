//! Domain types shared across the crate and the elementary vector math on them.
//!
//! Similarity math runs on `f32` components with `f64` accumulation.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tolerance on the L2 norm of a vector flagged as normalized.
pub const UNIT_NORM_TOLERANCE: f64 = 1e-5;

/// Tolerance on the sum of a [`ClassDistribution`].
pub const DISTRIBUTION_SUM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("embedding must have at least one component")]
    EmptyVector,
    #[error("embedding component {index} is not finite ({value})")]
    NonFinite { index: usize, value: f32 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("vector has zero norm")]
    ZeroNorm,
    #[error("vector flagged normalized has norm {norm}")]
    NotNormalized { norm: f64 },
    #[error("cannot build a class distribution from an empty record list")]
    EmptyRecords,
    #[error("invalid class distribution: {0}")]
    InvalidDistribution(String),
    #[error("invalid exemplar metadata: {0}")]
    InvalidMeta(String),
    #[error("invalid vehicle spec for {target_type}: {reason}")]
    InvalidSpec { target_type: String, reason: String },
}

/// A dense embedding. Always nonempty with finite components.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingVector {
    values: Vec<f32>,
    normalized: bool,
}

impl EmbeddingVector {
    pub fn new(values: Vec<f32>) -> Result<Self, ModelError> {
        if values.is_empty() {
            return Err(ModelError::EmptyVector);
        }
        if let Some((index, &value)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(ModelError::NonFinite { index, value });
        }
        Ok(Self {
            values,
            normalized: false,
        })
    }

    /// Wraps components that are already unit length, checking the norm.
    pub fn new_normalized(values: Vec<f32>) -> Result<Self, ModelError> {
        let mut v = Self::new(values)?;
        let norm = v.norm();
        if (norm - 1.0).abs() > UNIT_NORM_TOLERANCE {
            return Err(ModelError::NotNormalized { norm });
        }
        v.normalized = true;
        Ok(v)
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f32> {
        self.values
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn norm(&self) -> f64 {
        dot(&self.values, &self.values).sqrt()
    }
}

/// Dot product of two equal-length slices accumulated in `f64`.
#[inline]
pub fn dot(a: &[f32], b: &[f32]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(&x, &y)| f64::from(x) * f64::from(y))
        .sum()
}

pub fn cosine_similarity(a: &EmbeddingVector, b: &EmbeddingVector) -> Result<f64, ModelError> {
    if a.dim() != b.dim() {
        return Err(ModelError::DimensionMismatch {
            expected: a.dim(),
            got: b.dim(),
        });
    }
    let na = a.norm();
    let nb = b.norm();
    if na == 0.0 || nb == 0.0 {
        return Err(ModelError::ZeroNorm);
    }
    Ok((dot(a.values(), b.values()) / (na * nb)).clamp(-1.0, 1.0))
}

pub fn normalize(v: &EmbeddingVector) -> Result<EmbeddingVector, ModelError> {
    let norm = v.norm();
    if norm == 0.0 {
        return Err(ModelError::ZeroNorm);
    }
    let values = v
        .values()
        .iter()
        .map(|&x| (f64::from(x) / norm) as f32)
        .collect();
    Ok(EmbeddingVector {
        values,
        normalized: true,
    })
}

/// Metadata carried by one exemplar chip.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExemplarMeta {
    pub id: String,
    pub target_type: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub serial: Option<String>,
    pub depression_deg: f64,
    pub azimuth_deg: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub condition: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_tag: Option<String>,
}

impl ExemplarMeta {
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.id.is_empty() {
            return Err(ModelError::InvalidMeta("id is empty".into()));
        }
        if self.target_type.is_empty() {
            return Err(ModelError::InvalidMeta(format!(
                "{}: target_type is empty",
                self.id
            )));
        }
        if !(0.0..=90.0).contains(&self.depression_deg) {
            return Err(ModelError::InvalidMeta(format!(
                "{}: depression_deg {} outside [0, 90]",
                self.id, self.depression_deg
            )));
        }
        if !(0.0..360.0).contains(&self.azimuth_deg) {
            return Err(ModelError::InvalidMeta(format!(
                "{}: azimuth_deg {} outside [0, 360)",
                self.id, self.azimuth_deg
            )));
        }
        Ok(())
    }
}

/// One indexed exemplar: metadata plus its unit-length embedding.
#[derive(Debug, Clone, PartialEq)]
pub struct ExemplarRecord {
    pub meta: ExemplarMeta,
    pub embedding: EmbeddingVector,
}

impl ExemplarRecord {
    /// Builds a record, normalizing the embedding if needed.
    pub fn new(meta: ExemplarMeta, embedding: EmbeddingVector) -> Result<Self, ModelError> {
        meta.validate()?;
        let embedding = if embedding.is_normalized() {
            embedding
        } else {
            normalize(&embedding)?
        };
        Ok(Self { meta, embedding })
    }

    pub fn id(&self) -> &str {
        &self.meta.id
    }

    pub fn target_type(&self) -> &str {
        &self.meta.target_type
    }
}

/// Ground-truth attributes of one vehicle type.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VehicleSpec {
    pub target_type: String,
    pub weight_tons: f64,
    pub length_m: f64,
    pub width_m: f64,
    pub height_m: f64,
    pub mounted_weapon: bool,
    pub qualities: BTreeSet<String>,
}

impl VehicleSpec {
    pub fn validate(&self) -> Result<(), ModelError> {
        let invalid = |reason: String| ModelError::InvalidSpec {
            target_type: self.target_type.clone(),
            reason,
        };
        if self.target_type.is_empty() {
            return Err(invalid("target_type is empty".into()));
        }
        for attr in Attribute::ALL {
            let v = self.attribute(attr);
            if !(v.is_finite() && v > 0.0) {
                return Err(invalid(format!("{} must be positive, got {v}", attr.name())));
            }
        }
        if self.qualities.iter().any(|q| q.trim().is_empty()) {
            return Err(invalid("qualities contains an empty string".into()));
        }
        Ok(())
    }

    pub fn attribute(&self, attr: Attribute) -> f64 {
        match attr {
            Attribute::WeightTons => self.weight_tons,
            Attribute::LengthM => self.length_m,
            Attribute::WidthM => self.width_m,
            Attribute::HeightM => self.height_m,
        }
    }
}

/// Vehicle specs keyed by target type.
pub type SpecTable = BTreeMap<String, VehicleSpec>;

/// A numeric vehicle attribute.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Attribute {
    WeightTons,
    LengthM,
    WidthM,
    HeightM,
}

impl Attribute {
    pub const ALL: [Attribute; 4] = [
        Attribute::WeightTons,
        Attribute::LengthM,
        Attribute::WidthM,
        Attribute::HeightM,
    ];
    pub const DIMENSIONS: [Attribute; 3] =
        [Attribute::LengthM, Attribute::WidthM, Attribute::HeightM];

    pub fn name(self) -> &'static str {
        match self {
            Attribute::WeightTons => "weight_tons",
            Attribute::LengthM => "length_m",
            Attribute::WidthM => "width_m",
            Attribute::HeightM => "height_m",
        }
    }
}

/// Per-type prior probabilities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassDistribution {
    probs: BTreeMap<String, f64>,
}

impl ClassDistribution {
    pub fn new(probs: BTreeMap<String, f64>) -> Result<Self, ModelError> {
        if probs.is_empty() {
            return Err(ModelError::InvalidDistribution("no classes".into()));
        }
        for (t, &p) in &probs {
            if !(p > 0.0 && p <= 1.0) {
                return Err(ModelError::InvalidDistribution(format!(
                    "probability of {t} is {p}, expected (0, 1]"
                )));
            }
        }
        let sum: f64 = probs.values().sum();
        if (sum - 1.0).abs() > DISTRIBUTION_SUM_TOLERANCE {
            return Err(ModelError::InvalidDistribution(format!(
                "probabilities sum to {sum}"
            )));
        }
        Ok(Self { probs })
    }

    /// Builds a distribution from positive counts.
    pub fn from_counts<'a, I>(counts: I) -> Result<Self, ModelError>
    where
        I: IntoIterator<Item = (&'a str, usize)>,
    {
        let mut tally: BTreeMap<String, usize> = BTreeMap::new();
        for (t, c) in counts {
            *tally.entry(t.to_string()).or_default() += c;
        }
        tally.retain(|_, c| *c > 0);
        let total: usize = tally.values().sum();
        if total == 0 {
            return Err(ModelError::EmptyRecords);
        }
        let probs = tally
            .into_iter()
            .map(|(t, c)| (t, c as f64 / total as f64))
            .collect();
        Self::new(probs)
    }

    pub fn probs(&self) -> &BTreeMap<String, f64> {
        &self.probs
    }

    pub fn get(&self, target_type: &str) -> Option<f64> {
        self.probs.get(target_type).copied()
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.probs.iter().map(|(t, &p)| (t.as_str(), p))
    }
}

pub fn class_distribution(records: &[ExemplarRecord]) -> Result<ClassDistribution, ModelError> {
    if records.is_empty() {
        return Err(ModelError::EmptyRecords);
    }
    ClassDistribution::from_counts(records.iter().map(|r| (r.target_type(), 1)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn ev(v: &[f32]) -> EmbeddingVector {
        EmbeddingVector::new(v.to_vec()).unwrap()
    }

    fn meta(id: &str, t: &str) -> ExemplarMeta {
        ExemplarMeta {
            id: id.into(),
            target_type: t.into(),
            serial: None,
            depression_deg: 15.0,
            azimuth_deg: 0.0,
            condition: None,
            source_tag: None,
        }
    }

    #[test]
    fn cosine_examples() {
        assert_abs_diff_eq!(cosine_similarity(&ev(&[1., 0.]), &ev(&[1., 0.])).unwrap(), 1.0);
        assert_abs_diff_eq!(cosine_similarity(&ev(&[1., 0.]), &ev(&[0., 1.])).unwrap(), 0.0);
        assert_abs_diff_eq!(
            cosine_similarity(&ev(&[1., 1.]), &ev(&[1., 0.])).unwrap(),
            std::f64::consts::FRAC_1_SQRT_2,
            epsilon = 1e-8
        );
    }

    #[test]
    fn cosine_errors() {
        assert!(matches!(
            cosine_similarity(&ev(&[1., 0.]), &ev(&[1., 0., 0.])),
            Err(ModelError::DimensionMismatch { expected: 2, got: 3 })
        ));
        assert_eq!(
            cosine_similarity(&ev(&[0., 0.]), &ev(&[1., 0.])),
            Err(ModelError::ZeroNorm)
        );
    }

    #[test]
    fn normalize_examples() {
        let n = normalize(&ev(&[3., 4.])).unwrap();
        assert!(n.is_normalized());
        assert_abs_diff_eq!(n.values()[0], 0.6, epsilon = 1e-7);
        assert_abs_diff_eq!(n.values()[1], 0.8, epsilon = 1e-7);
        assert_eq!(normalize(&ev(&[1., 0.])).unwrap().values(), &[1.0, 0.0]);
        assert_eq!(normalize(&ev(&[0., 0.])), Err(ModelError::ZeroNorm));
    }

    #[test]
    fn rejects_non_finite_and_empty() {
        assert_eq!(EmbeddingVector::new(vec![]), Err(ModelError::EmptyVector));
        assert!(matches!(
            EmbeddingVector::new(vec![1.0, f32::NAN]),
            Err(ModelError::NonFinite { index: 1, .. })
        ));
        assert!(EmbeddingVector::new_normalized(vec![3.0, 4.0]).is_err());
    }

    #[test]
    fn class_distribution_counts() {
        let recs = |types: &[&str]| -> Vec<ExemplarRecord> {
            types
                .iter()
                .enumerate()
                .map(|(i, t)| {
                    ExemplarRecord::new(meta(&format!("r{i}"), t), ev(&[1.0, 0.0])).unwrap()
                })
                .collect()
        };
        let d = class_distribution(&recs(&["A", "A", "A", "B"])).unwrap();
        assert_eq!(d.get("A"), Some(0.75));
        assert_eq!(d.get("B"), Some(0.25));
        assert_eq!(class_distribution(&recs(&["A"; 5])).unwrap().get("A"), Some(1.0));
        let d = class_distribution(&recs(&["A", "B", "C", "C"])).unwrap();
        assert_eq!(
            (d.get("A"), d.get("B"), d.get("C")),
            (Some(0.25), Some(0.25), Some(0.5))
        );
        assert_eq!(class_distribution(&[]), Err(ModelError::EmptyRecords));
    }

    #[test]
    fn distribution_validation() {
        let bad = BTreeMap::from([("A".to_string(), 0.5), ("B".to_string(), 0.4)]);
        assert!(ClassDistribution::new(bad).is_err());
        let zero = BTreeMap::from([("A".to_string(), 1.0), ("B".to_string(), 0.0)]);
        assert!(ClassDistribution::new(zero).is_err());
    }

    #[test]
    fn meta_angle_ranges() {
        let mut m = meta("x", "A");
        m.depression_deg = 95.0;
        assert!(m.validate().is_err());
        let mut m = meta("x", "A");
        m.azimuth_deg = 360.0;
        assert!(m.validate().is_err());
        assert!(meta("", "A").validate().is_err());
    }

    fn nonzero_vec(dim: usize) -> impl Strategy<Value = Vec<f32>> {
        prop::collection::vec(-10.0f32..10.0, dim)
            .prop_filter("nonzero", |v| v.iter().any(|x| x.abs() > 1e-3))
    }

    proptest! {
        #[test]
        fn self_similarity_is_one(a in nonzero_vec(12)) {
            let a = ev(&a);
            prop_assert!((cosine_similarity(&a, &a).unwrap() - 1.0).abs() <= 1e-6);
        }

        #[test]
        fn scale_invariant((a, b) in (nonzero_vec(8), nonzero_vec(8)), c in 0.01f32..100.0) {
            let scaled = ev(&a.iter().map(|x| x * c).collect::<Vec<_>>());
            let (a, b) = (ev(&a), ev(&b));
            let base = cosine_similarity(&a, &b).unwrap();
            prop_assert!((cosine_similarity(&scaled, &b).unwrap() - base).abs() <= 1e-6);
            prop_assert!((cosine_similarity(&b, &a).unwrap() - base).abs() <= 1e-12);
        }

        #[test]
        fn unit_dot_equals_cosine((a, b) in (nonzero_vec(16), nonzero_vec(16))) {
            let (a, b) = (ev(&a), ev(&b));
            let (na, nb) = (normalize(&a).unwrap(), normalize(&b).unwrap());
            prop_assert!((na.norm() - 1.0).abs() <= 1e-5);
            prop_assert!((cosine_similarity(&a, &na).unwrap() - 1.0).abs() <= 1e-6);
            let fast = dot(na.values(), nb.values());
            prop_assert!((fast - cosine_similarity(&a, &b).unwrap()).abs() <= 1e-6);
        }
    }
}
