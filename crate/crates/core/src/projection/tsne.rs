//! Exact (O(n²)) t-SNE.

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{ProjectedPoint, ProjectionError};
use crate::model::ExemplarRecord;
use crate::rng::SplitMix64;

/// Maximum accepted deviation of a point's achieved perplexity.
pub const PERPLEXITY_TOLERANCE: f64 = 1e-3;
pub const MAX_BISECTION_STEPS: usize = 50;
pub const MAX_POINTS: usize = 10_000;
pub const MIN_POINTS: usize = 10;
const INIT_STD: f64 = 1e-4;
const MIN_GAIN: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TsneConfig {
    pub perplexity: f64,
    pub iterations: usize,
    pub learning_rate: f64,
    pub momentum_early: f64,
    pub momentum_late: f64,
    /// Iteration at which momentum switches and exaggeration ends.
    pub switch_iteration: usize,
    pub early_exaggeration: f64,
    pub seed: u64,
}

impl Default for TsneConfig {
    fn default() -> Self {
        Self {
            perplexity: 30.0,
            iterations: 1000,
            learning_rate: 200.0,
            momentum_early: 0.5,
            momentum_late: 0.8,
            switch_iteration: 250,
            early_exaggeration: 12.0,
            seed: 0,
        }
    }
}

impl TsneConfig {
    pub fn validate(&self, n: usize) -> Result<(), ProjectionError> {
        let bad = |msg: String| Err(ProjectionError::InvalidConfig(msg));
        if n < MIN_POINTS {
            return Err(ProjectionError::TooFewPoints { n, min: MIN_POINTS });
        }
        if n > MAX_POINTS {
            return bad(format!("exact t-SNE supports at most {MAX_POINTS} points, got {n}"));
        }
        if !(self.perplexity > 1.0 && self.perplexity < n as f64 / 3.0) {
            return bad(format!(
                "perplexity {} must lie in (1, n/3) = (1, {:.4})",
                self.perplexity,
                n as f64 / 3.0
            ));
        }
        if self.iterations < self.switch_iteration || self.switch_iteration < 250 {
            return bad(format!(
                "iterations ({}) must be at least 250 and no fewer than the switch iteration ({})",
                self.iterations, self.switch_iteration
            ));
        }
        if !(self.learning_rate > 0.0 && self.early_exaggeration >= 1.0) {
            return bad("learning rate must be positive and exaggeration at least 1".into());
        }
        Ok(())
    }
}

/// One point's conditional distribution over the other points.
#[derive(Debug, Clone, PartialEq)]
pub struct Calibration {
    pub probs: Vec<f64>,
    /// Precision `1 / (2 sigma²)`.
    pub beta: f64,
    pub perplexity: f64,
}

fn distribution(shifted: &[f64], beta: f64, probs: &mut [f64]) -> f64 {
    let mut z = 0.0;
    for (p, &d) in probs.iter_mut().zip(shifted) {
        *p = (-beta * d).exp();
        z += *p;
    }
    let mut weighted = 0.0;
    for (p, &d) in probs.iter_mut().zip(shifted) {
        *p /= z;
        weighted += *p * d;
    }
    // Shannon entropy in nats, then perplexity.
    (z.ln() + beta * weighted).exp()
}

/// Finds the Gaussian precision whose conditional distribution over
/// `sq_dists` (squared distances to every other point) has the target
/// perplexity. Returns `None` when no precision reaches it.
pub fn calibrate_row(sq_dists: &[f64], perplexity: f64) -> Option<Calibration> {
    if sq_dists.is_empty() {
        return None;
    }
    let min = sq_dists.iter().copied().fold(f64::INFINITY, f64::min);
    let shifted: Vec<f64> = sq_dists.iter().map(|d| d - min).collect();
    let mut probs = vec![0.0; shifted.len()];
    let close = |p: f64| (p - perplexity).abs() <= PERPLEXITY_TOLERANCE;

    // Scale-free starting guess from the mean shifted distance.
    let mean = shifted.iter().sum::<f64>() / shifted.len() as f64;
    let mut beta = if mean > 0.0 { 1.0 / mean } else { 1.0 };
    let mut perp = distribution(&shifted, beta, &mut probs);
    if close(perp) {
        return Some(Calibration { probs, beta, perplexity: perp });
    }

    // Perplexity falls as beta grows; expand until the target is bracketed.
    let (mut lo, mut hi) = (beta, beta);
    let mut bracketed = false;
    for _ in 0..2000 {
        if perp > perplexity {
            lo = beta;
            beta *= 2.0;
        } else {
            hi = beta;
            beta /= 2.0;
        }
        if !beta.is_finite() || beta == 0.0 {
            break;
        }
        let next = distribution(&shifted, beta, &mut probs);
        if close(next) {
            return Some(Calibration { probs, beta, perplexity: next });
        }
        if (next > perplexity) != (perp > perplexity) {
            if next > perplexity {
                lo = beta;
            } else {
                hi = beta;
            }
            bracketed = true;
            break;
        }
        perp = next;
    }
    if !bracketed {
        return None;
    }
    for _ in 0..MAX_BISECTION_STEPS {
        beta = (lo * hi).sqrt();
        perp = distribution(&shifted, beta, &mut probs);
        if close(perp) {
            return Some(Calibration { probs, beta, perplexity: perp });
        }
        if perp > perplexity {
            lo = beta;
        } else {
            hi = beta;
        }
    }
    None
}

fn squared_distances(data: &[Vec<f32>]) -> Vec<f64> {
    let n = data.len();
    let mut d = vec![0.0; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let s: f64 = data[i]
                .iter()
                .zip(&data[j])
                .map(|(a, b)| {
                    let e = f64::from(*a) - f64::from(*b);
                    e * e
                })
                .sum();
            d[i * n + j] = s;
            d[j * n + i] = s;
        }
    }
    d
}

/// Diagnostics recorded during one optimization.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TsneTrace {
    pub achieved_perplexities: Vec<f64>,
    pub p_sum: f64,
    /// Largest `|p_ij - p_ji|`.
    pub p_asymmetry: f64,
    pub p_min: f64,
    /// Sum of the low-dimensional affinities at every iteration.
    pub q_sums: Vec<f64>,
    /// `(iteration, KL(P || Q))` every 50 iterations and at the end.
    pub kl: Vec<(usize, f64)>,
}

impl TsneTrace {
    pub fn kl_at(&self, iteration: usize) -> Option<f64> {
        self.kl.iter().find(|(i, _)| *i == iteration).map(|(_, v)| *v)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TsneOutput {
    /// Row-major `n x 2` coordinates.
    pub coords: Vec<[f64; 2]>,
    pub trace: TsneTrace,
}

/// Symmetrized input affinities, row-major `n x n`.
fn affinities(
    data: &[Vec<f32>],
    ids: &[&str],
    perplexity: f64,
    trace: &mut TsneTrace,
) -> Result<Vec<f64>, ProjectionError> {
    let n = data.len();
    let d = squared_distances(data);
    let mut cond = vec![0.0; n * n];
    let mut row = Vec::with_capacity(n - 1);
    for i in 0..n {
        row.clear();
        row.extend((0..n).filter(|&j| j != i).map(|j| d[i * n + j]));
        let cal = calibrate_row(&row, perplexity).ok_or_else(|| ProjectionError::InfeasiblePerplexity {
            point: ids[i].to_string(),
            perplexity,
        })?;
        trace.achieved_perplexities.push(cal.perplexity);
        let mut it = cal.probs.into_iter();
        for j in (0..n).filter(|&j| j != i) {
            cond[i * n + j] = it.next().expect("row length n - 1");
        }
    }
    let mut p = vec![0.0; n * n];
    let denom = 2.0 * n as f64;
    for i in 0..n {
        for j in 0..n {
            p[i * n + j] = (cond[i * n + j] + cond[j * n + i]) / denom;
        }
    }
    trace.p_sum = p.iter().sum();
    trace.p_min = p.iter().copied().fold(f64::INFINITY, f64::min);
    trace.p_asymmetry = (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .map(|(i, j)| (p[i * n + j] - p[j * n + i]).abs())
        .fold(0.0, f64::max);
    Ok(p)
}

fn kl_divergence(p: &[f64], num: &[f64], z: f64) -> f64 {
    p.iter()
        .zip(num)
        .filter(|(&p, _)| p > 0.0)
        .map(|(&p, &q)| p * (p / (q / z).max(f64::MIN_POSITIVE)).ln())
        .sum()
}

/// Runs t-SNE on raw vectors; `ids` name points in error messages.
pub fn tsne_embed(
    data: &[Vec<f32>],
    ids: &[&str],
    cfg: &TsneConfig,
) -> Result<TsneOutput, ProjectionError> {
    let n = data.len();
    cfg.validate(n)?;
    if ids.len() != n {
        return Err(ProjectionError::InvalidConfig("one id per point is required".into()));
    }
    let mut trace = TsneTrace::default();
    let p = affinities(data, ids, cfg.perplexity, &mut trace)?;

    let mut rng = SplitMix64::derive(cfg.seed, "tsne-init");
    let mut y: Vec<[f64; 2]> = (0..n)
        .map(|_| {
            let a: f64 = StandardNormal.sample(&mut rng);
            let b: f64 = StandardNormal.sample(&mut rng);
            [INIT_STD * a, INIT_STD * b]
        })
        .collect();
    let mut update = vec![[0.0f64; 2]; n];
    let mut gains = vec![[1.0f64; 2]; n];
    let mut num = vec![0.0; n * n];
    let mut grad = vec![[0.0f64; 2]; n];

    for iter in 0..cfg.iterations {
        let early = iter < cfg.switch_iteration;
        let exaggeration = if early { cfg.early_exaggeration } else { 1.0 };
        let momentum = if early { cfg.momentum_early } else { cfg.momentum_late };

        let mut z = 0.0;
        for i in 0..n {
            num[i * n + i] = 0.0;
            for j in (i + 1)..n {
                let dx = y[i][0] - y[j][0];
                let dy = y[i][1] - y[j][1];
                let v = 1.0 / (1.0 + dx * dx + dy * dy);
                num[i * n + j] = v;
                num[j * n + i] = v;
                z += 2.0 * v;
            }
        }
        trace.q_sums.push(num.iter().map(|v| v / z).sum());
        if iter % 50 == 0 {
            trace.kl.push((iter, kl_divergence(&p, &num, z)));
        }

        for i in 0..n {
            let mut g = [0.0; 2];
            for j in 0..n {
                let w = (exaggeration * p[i * n + j] - num[i * n + j] / z) * num[i * n + j];
                g[0] += w * (y[i][0] - y[j][0]);
                g[1] += w * (y[i][1] - y[j][1]);
            }
            grad[i] = [4.0 * g[0], 4.0 * g[1]];
        }

        for i in 0..n {
            for c in 0..2 {
                let gain = &mut gains[i][c];
                if (grad[i][c] > 0.0) != (update[i][c] > 0.0) {
                    *gain += 0.2;
                } else {
                    *gain *= 0.8;
                }
                *gain = gain.max(MIN_GAIN);
                update[i][c] = momentum * update[i][c] - cfg.learning_rate * *gain * grad[i][c];
                y[i][c] += update[i][c];
            }
        }
        let mean = y.iter().fold([0.0; 2], |m, p| [m[0] + p[0], m[1] + p[1]]);
        let mean = [mean[0] / n as f64, mean[1] / n as f64];
        for p in y.iter_mut() {
            p[0] -= mean[0];
            p[1] -= mean[1];
        }
    }

    // Objective at the final layout.
    let mut z = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                let dx = y[i][0] - y[j][0];
                let dy = y[i][1] - y[j][1];
                num[i * n + j] = 1.0 / (1.0 + dx * dx + dy * dy);
                z += num[i * n + j];
            }
        }
    }
    trace.kl.push((cfg.iterations, kl_divergence(&p, &num, z)));
    if let Some(bad) = y.iter().position(|p| !(p[0].is_finite() && p[1].is_finite())) {
        return Err(ProjectionError::NonFinite(ids[bad].to_string()));
    }
    Ok(TsneOutput { coords: y, trace })
}

pub fn tsne_2d_traced(
    records: &[ExemplarRecord],
    cfg: &TsneConfig,
) -> Result<(Vec<ProjectedPoint>, TsneTrace), ProjectionError> {
    let data: Vec<Vec<f32>> = records.iter().map(|r| r.embedding.values().to_vec()).collect();
    let ids: Vec<&str> = records.iter().map(|r| r.id()).collect();
    let out = tsne_embed(&data, &ids, cfg)?;
    let points = records
        .iter()
        .zip(out.coords)
        .map(|(r, [x, y])| ProjectedPoint {
            id: r.id().to_string(),
            target_type: r.target_type().to_string(),
            x,
            y,
        })
        .collect();
    Ok((points, out.trace))
}

pub fn tsne_2d(records: &[ExemplarRecord], cfg: &TsneConfig) -> Result<Vec<ProjectedPoint>, ProjectionError> {
    tsne_2d_traced(records, cfg).map(|(p, _)| p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{generate_synthetic_corpus, SyntheticCorpusConfig};

    fn perplexity_of(probs: &[f64]) -> f64 {
        let h: f64 = probs.iter().filter(|&&p| p > 0.0).map(|&p| -p * p.ln()).sum();
        h.exp()
    }

    #[test]
    fn equidistant_triangle() {
        // Each point of a triangle sees its two neighbors at equal range.
        let cal = calibrate_row(&[1.0, 1.0], 2.0).unwrap();
        assert_eq!(cal.probs, vec![0.5, 0.5]);
        assert!((cal.perplexity - 2.0).abs() < 1e-12);
    }

    #[test]
    fn calibration_hits_target() {
        let mut rng = SplitMix64::new(3);
        for perp in [2.0, 5.0, 12.5] {
            let row: Vec<f64> = (0..60).map(|_| 4.0 * rng.unit_f64()).collect();
            let cal = calibrate_row(&row, perp).unwrap();
            assert!((cal.perplexity - perp).abs() <= PERPLEXITY_TOLERANCE);
            // Independent recomputation from the returned probabilities.
            assert!((perplexity_of(&cal.probs) - perp).abs() <= PERPLEXITY_TOLERANCE);
            assert!((cal.probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn flat_distances_are_infeasible() {
        assert!(calibrate_row(&[2.0; 20], 5.0).is_none());
        assert!(calibrate_row(&[1.0, 2.0, 3.0], 3.5).is_none());
    }

    #[test]
    fn infeasible_point_is_named() {
        let mut data = vec![vec![0.0f32, 0.0]; 12];
        for (i, row) in data.iter_mut().enumerate().skip(1) {
            row[0] = i as f32;
        }
        let flat = vec![vec![1.0f32, 1.0]; 12];
        let ids: Vec<String> = (0..12).map(|i| format!("p{i}")).collect();
        let id_refs: Vec<&str> = ids.iter().map(String::as_str).collect();
        let cfg = TsneConfig {
            perplexity: 3.0,
            iterations: 250,
            ..TsneConfig::default()
        };
        let err = tsne_embed(&flat, &id_refs, &cfg).unwrap_err();
        assert!(matches!(err, ProjectionError::InfeasiblePerplexity { ref point, .. } if point == "p0"));
        assert!(tsne_embed(&data, &id_refs, &cfg).is_ok());
    }

    #[test]
    fn config_validation() {
        let cfg = TsneConfig::default();
        assert!(matches!(cfg.validate(5), Err(ProjectionError::TooFewPoints { .. })));
        assert!(cfg.validate(90).is_err());
        assert!(cfg.validate(91).is_ok());
        let short = TsneConfig {
            iterations: 100,
            ..TsneConfig::default()
        };
        assert!(short.validate(200).is_err());
    }

    #[test]
    fn normalization_and_descent() {
        let cfg = SyntheticCorpusConfig::uniform(3, 20, 8, 10.0, 4);
        let records = generate_synthetic_corpus(&cfg).unwrap();
        let tcfg = TsneConfig {
            perplexity: 8.0,
            iterations: 400,
            seed: 9,
            ..TsneConfig::default()
        };
        let (points, trace) = tsne_2d_traced(&records, &tcfg).unwrap();
        assert!((trace.p_sum - 1.0).abs() < 1e-9);
        assert!(trace.p_asymmetry == 0.0 && trace.p_min >= 0.0);
        assert!(trace.q_sums.iter().all(|s| (s - 1.0).abs() < 1e-9));
        assert!(trace
            .achieved_perplexities
            .iter()
            .all(|p| (p - 8.0).abs() <= PERPLEXITY_TOLERANCE));
        let (k250, kend) = (trace.kl_at(250).unwrap(), trace.kl_at(400).unwrap());
        assert!(kend.is_finite() && kend < k250);
        let mx = points.iter().map(|p| p.x).sum::<f64>() / points.len() as f64;
        let my = points.iter().map(|p| p.y).sum::<f64>() / points.len() as f64;
        assert!(mx.abs() < 1e-6 && my.abs() < 1e-6);
        let (again, _) = tsne_2d_traced(&records, &tcfg).unwrap();
        assert_eq!(points, again);
    }
}
