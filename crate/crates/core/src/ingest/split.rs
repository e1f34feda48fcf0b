use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::IngestError;
use crate::model::ExemplarMeta;
use crate::rng::SplitMix64;

/// Train/validation partition of a corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub seed: u64,
    pub ratio: f64,
    pub train_ids: BTreeSet<String>,
    pub val_ids: BTreeSet<String>,
}

/// Number of training members for a class of size `n`: `ceil(ratio * n)`,
/// ignoring representation noise of the product below 1e-9.
pub fn train_count(ratio: f64, n: usize) -> usize {
    let exact = ratio * n as f64;
    let count = (exact - 1e-9).ceil().max(0.0) as usize;
    count.min(n)
}

/// Seeded per-class split.
///
/// Classes are visited in lexicographic order. Each class's ids are sorted,
/// shuffled with `SplitMix64::derive(seed, class)` and the first
/// `ceil(ratio * n)` go to training.
pub fn stratified_split<'a, I>(metas: I, ratio: f64, seed: u64) -> Result<SplitPlan, IngestError>
where
    I: IntoIterator<Item = &'a ExemplarMeta>,
{
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(IngestError::InvalidSplit(format!(
            "ratio must lie in (0, 1), got {ratio}"
        )));
    }
    let mut by_class: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    let mut seen = BTreeSet::new();
    for m in metas {
        if !seen.insert(m.id.as_str()) {
            return Err(IngestError::DuplicateId {
                line: 0,
                id: m.id.clone(),
            });
        }
        by_class.entry(&m.target_type).or_default().push(&m.id);
    }
    if by_class.is_empty() {
        return Err(IngestError::InvalidSplit("no entries to split".into()));
    }
    if let Some((class, _)) = by_class.iter().find(|(_, ids)| ids.len() < 2) {
        return Err(IngestError::SingletonClass(class.to_string()));
    }

    let mut train_ids = BTreeSet::new();
    let mut val_ids = BTreeSet::new();
    for (class, mut ids) in by_class {
        ids.sort_unstable();
        SplitMix64::derive(seed, class).shuffle(&mut ids);
        let cut = train_count(ratio, ids.len());
        train_ids.extend(ids[..cut].iter().map(|s| s.to_string()));
        val_ids.extend(ids[cut..].iter().map(|s| s.to_string()));
    }
    Ok(SplitPlan {
        seed,
        ratio,
        train_ids,
        val_ids,
    })
}
