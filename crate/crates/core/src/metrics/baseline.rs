//! Weighted-random baselines.
//!
//! Model: the query's true type is drawn from the class prior `p`, and every
//! answer slot is an independent draw from the same prior. That gives
//!
//! ```text
//! acc@1       = sum_t p_t^2
//! precision@k = sum_t p_t^2
//! any@k       = sum_t p_t (1 - (1 - p_t)^k)
//! all@k       = sum_t p_t^(k+1)
//! ```
//!
//! and, for a numeric attribute `a` with guessed type `j` and true type `i`,
//! `mae = sum_ij p_i p_j |a_j - a_i|`, `rmse = sqrt(sum_ij p_i p_j (a_j - a_i)^2)`
//! and `mape = 100 sum_ij p_i p_j |a_j - a_i| / a_i`.
//!
//! [`monte_carlo_baseline`] simulates the same draw model as an independent
//! check, and can also draw slots without replacement from a finite corpus.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{MetricsError, RegressionMetrics};
use crate::model::{Attribute, ClassDistribution, SpecTable};
use crate::rng::{sample_cumulative, SplitMix64};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RetrievalBaseline {
    pub k: usize,
    pub acc1: f64,
    pub precision_k: f64,
    pub any_k: f64,
    pub all_k: f64,
}

pub fn random_baseline_retrieval(
    dist: &ClassDistribution,
    k: usize,
) -> Result<RetrievalBaseline, MetricsError> {
    if k == 0 {
        return Err(MetricsError::InvalidK);
    }
    let k_i = i32::try_from(k).map_err(|_| MetricsError::InvalidK)?;
    let mut acc1 = 0.0;
    let mut any_k = 0.0;
    let mut all_k = 0.0;
    for (_, p) in dist.iter() {
        acc1 += p * p;
        any_k += p * (1.0 - (1.0 - p).powi(k_i));
        all_k += p.powi(k_i + 1);
    }
    Ok(RetrievalBaseline {
        k,
        acc1,
        precision_k: acc1,
        any_k,
        all_k,
    })
}

/// How simulated retrieval slots are drawn.
#[derive(Debug, Clone, PartialEq)]
pub enum DrawModel {
    /// Independent draws from the prior.
    WithReplacement,
    /// Draws without replacement from a finite corpus with these class
    /// counts; the query's own type comes from the same counts.
    WithoutReplacement(BTreeMap<String, usize>),
}

pub const MIN_MONTE_CARLO_TRIALS: usize = 100_000;

pub fn monte_carlo_baseline(
    dist: &ClassDistribution,
    k: usize,
    trials: usize,
    seed: u64,
) -> Result<RetrievalBaseline, MetricsError> {
    monte_carlo_baseline_with(dist, k, trials, seed, &DrawModel::WithReplacement)
}

pub fn monte_carlo_baseline_with(
    dist: &ClassDistribution,
    k: usize,
    trials: usize,
    seed: u64,
    model: &DrawModel,
) -> Result<RetrievalBaseline, MetricsError> {
    if k == 0 {
        return Err(MetricsError::InvalidK);
    }
    if trials < MIN_MONTE_CARLO_TRIALS {
        return Err(MetricsError::InvalidInput(format!(
            "at least {MIN_MONTE_CARLO_TRIALS} trials are required, got {trials}"
        )));
    }
    let mut rng = SplitMix64::derive(seed, "monte-carlo-baseline");
    let cumulative = cumulative(dist.iter().map(|(_, p)| p));

    let counts: Option<Vec<usize>> = match model {
        DrawModel::WithReplacement => None,
        DrawModel::WithoutReplacement(c) => {
            let v: Vec<usize> = dist.iter().map(|(t, _)| c.get(t).copied().unwrap_or(0)).collect();
            let total: usize = v.iter().sum();
            if total < k + 1 || v.iter().any(|&n| n == 0) {
                return Err(MetricsError::InvalidInput(
                    "corpus counts must cover every class and exceed k".into(),
                ));
            }
            Some(v)
        }
    };

    let mut slots = vec![0usize; k];
    let (mut acc1, mut matched, mut any, mut all) = (0u64, 0u64, 0u64, 0u64);
    for _ in 0..trials {
        let query = match &counts {
            None => {
                let q = sample_cumulative(&cumulative, rng.unit_f64());
                for s in slots.iter_mut() {
                    *s = sample_cumulative(&cumulative, rng.unit_f64());
                }
                q
            }
            Some(c) => draw_without_replacement(c, &mut slots, &mut rng),
        };
        let hits = slots.iter().filter(|&&s| s == query).count();
        acc1 += u64::from(slots[0] == query);
        matched += hits as u64;
        any += u64::from(hits > 0);
        all += u64::from(hits == k);
    }
    let n = trials as f64;
    Ok(RetrievalBaseline {
        k,
        acc1: acc1 as f64 / n,
        precision_k: matched as f64 / (n * k as f64),
        any_k: any as f64 / n,
        all_k: all as f64 / n,
    })
}

fn cumulative(probs: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut acc = 0.0;
    probs
        .map(|p| {
            acc += p;
            acc
        })
        .collect()
}

/// Draws the query item, then `slots.len()` further items, without
/// replacement from a pool with per-class `counts`.
fn draw_without_replacement(counts: &[usize], slots: &mut [usize], rng: &mut SplitMix64) -> usize {
    let mut remaining = counts.to_vec();
    let mut total: usize = remaining.iter().sum();
    let mut draw = |remaining: &mut [usize], total: &mut usize| {
        let mut r = rng.below(*total as u64) as usize;
        let mut class = 0;
        while r >= remaining[class] {
            r -= remaining[class];
            class += 1;
        }
        remaining[class] -= 1;
        *total -= 1;
        class
    };
    let query = draw(&mut remaining, &mut total);
    for s in slots.iter_mut() {
        *s = draw(&mut remaining, &mut total);
    }
    query
}

fn attribute_values(
    dist: &ClassDistribution,
    specs: &SpecTable,
    attribute: Attribute,
) -> Result<Vec<(f64, f64)>, MetricsError> {
    dist.iter()
        .map(|(t, p)| {
            specs
                .get(t)
                .map(|s| (p, s.attribute(attribute)))
                .ok_or_else(|| MetricsError::MissingSpec(t.to_string()))
        })
        .collect()
}

pub fn random_baseline_regression(
    dist: &ClassDistribution,
    specs: &SpecTable,
    attribute: Attribute,
) -> Result<RegressionMetrics, MetricsError> {
    let values = attribute_values(dist, specs, attribute)?;
    let (mut mae, mut mse, mut mape) = (0.0, 0.0, 0.0);
    for &(p_true, a_true) in &values {
        for &(p_guess, a_guess) in &values {
            let w = p_true * p_guess;
            let e = (a_guess - a_true).abs();
            mae += w * e;
            mse += w * e * e;
            mape += w * e / a_true;
        }
    }
    Ok(RegressionMetrics {
        mae,
        rmse: mse.sqrt(),
        mape_pct: 100.0 * mape,
    })
}

/// Baseline for length, width and height pooled into one sample set.
pub fn random_baseline_dimensions(
    dist: &ClassDistribution,
    specs: &SpecTable,
) -> Result<RegressionMetrics, MetricsError> {
    let mut mae = 0.0;
    let mut mse = 0.0;
    let mut mape = 0.0;
    for attr in Attribute::DIMENSIONS {
        let m = random_baseline_regression(dist, specs, attr)?;
        mae += m.mae;
        mse += m.rmse * m.rmse;
        mape += m.mape_pct;
    }
    Ok(RegressionMetrics {
        mae: mae / 3.0,
        rmse: (mse / 3.0).sqrt(),
        mape_pct: mape / 3.0,
    })
}

/// Chance of guessing the exact qualities set of the true type.
pub fn random_baseline_qualities(
    dist: &ClassDistribution,
    specs: &SpecTable,
) -> Result<f64, MetricsError> {
    let sets = dist
        .iter()
        .map(|(t, p)| {
            specs
                .get(t)
                .map(|s| (p, &s.qualities))
                .ok_or_else(|| MetricsError::MissingSpec(t.to_string()))
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(sets
        .iter()
        .flat_map(|(pi, qi)| sets.iter().filter(move |(_, qj)| qj == qi).map(move |(pj, _)| pi * pj))
        .sum())
}

/// Prior probability that the true vehicle carries a mounted weapon.
pub fn mounted_weapon_prior(dist: &ClassDistribution, specs: &SpecTable) -> Result<f64, MetricsError> {
    dist.iter()
        .map(|(t, p)| {
            specs
                .get(t)
                .map(|s| if s.mounted_weapon { p } else { 0.0 })
                .ok_or_else(|| MetricsError::MissingSpec(t.to_string()))
        })
        .sum()
}
