use nalgebra::{DMatrix, SymmetricEigen};

use super::{ProjectedPoint, ProjectionError};
use crate::model::ExemplarRecord;

/// Relative eigenvalue below which the data counts as having no spread.
const RANK_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct PcaOutput {
    pub coords: Vec<[f64; 2]>,
    /// Top two covariance eigenvalues, descending.
    pub variances: [f64; 2],
    /// Total variance (trace of the covariance).
    pub total_variance: f64,
    /// Unit principal directions, sign-fixed.
    pub components: [Vec<f64>; 2],
}

/// Mean-centered projection onto the top two principal directions. Each
/// direction's sign makes its largest-magnitude loading positive.
pub fn pca_embed(data: &[Vec<f32>]) -> Result<PcaOutput, ProjectionError> {
    let n = data.len();
    if n < 3 {
        return Err(ProjectionError::TooFewPoints { n, min: 3 });
    }
    let d = data[0].len();
    if d == 0 || data.iter().any(|r| r.len() != d) {
        return Err(ProjectionError::InvalidConfig("rows must share a positive dimension".into()));
    }
    let mut mean = vec![0.0; d];
    for row in data {
        for (m, &v) in mean.iter_mut().zip(row) {
            *m += f64::from(v);
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let x = DMatrix::from_fn(n, d, |i, j| f64::from(data[i][j]) - mean[j]);
    let cov = (x.transpose() * &x) / n as f64;
    let total_variance = cov.trace();

    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let top = eig.eigenvalues[order[0]];
    if !(top > RANK_TOLERANCE * total_variance.max(1.0)) {
        return Err(ProjectionError::RankDeficient);
    }

    let component = |slot: usize| -> (Vec<f64>, f64) {
        let Some(&col) = order.get(slot) else {
            return (vec![0.0; d], 0.0);
        };
        let mut v: Vec<f64> = eig.eigenvectors.column(col).iter().copied().collect();
        let lead = v
            .iter()
            .copied()
            .fold(0.0f64, |best, x| if x.abs() > best.abs() { x } else { best });
        if lead < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
        (v, eig.eigenvalues[col].max(0.0))
    };
    let (c1, l1) = component(0);
    let (c2, l2) = component(1);
    let coords = (0..n)
        .map(|i| {
            let row = x.row(i);
            let dot = |c: &[f64]| row.iter().zip(c).map(|(a, b)| a * b).sum::<f64>();
            [dot(&c1), dot(&c2)]
        })
        .collect();
    Ok(PcaOutput {
        coords,
        variances: [l1, l2],
        total_variance,
        components: [c1, c2],
    })
}

pub fn pca_2d(records: &[ExemplarRecord]) -> Result<Vec<ProjectedPoint>, ProjectionError> {
    let data: Vec<Vec<f32>> = records.iter().map(|r| r.embedding.values().to_vec()).collect();
    let out = pca_embed(&data)?;
    Ok(records
        .iter()
        .zip(out.coords)
        .map(|(r, [x, y])| ProjectedPoint {
            id: r.id().to_string(),
            target_type: r.target_type().to_string(),
            x,
            y,
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SplitMix64;

    fn variance(v: impl Iterator<Item = f64> + Clone) -> f64 {
        let n = v.clone().count() as f64;
        let m = v.clone().sum::<f64>() / n;
        v.map(|x| (x - m) * (x - m)).sum::<f64>() / n
    }

    #[test]
    fn collinear_points() {
        let data: Vec<Vec<f32>> = (0..10).map(|i| vec![i as f32, 2.0 * i as f32, -(i as f32)]).collect();
        let out = pca_embed(&data).unwrap();
        assert!(out.coords.iter().all(|p| p[1].abs() < 1e-6));
        assert!(out.variances[1] < 1e-9);
        // First axis carries the whole spread, with the largest loading positive.
        assert!(out.components[0][1] > 0.0);
    }

    #[test]
    fn identical_points_are_rejected() {
        let data = vec![vec![0.5f32, -1.0, 2.0]; 6];
        assert!(matches!(pca_embed(&data), Err(ProjectionError::RankDeficient)));
        assert!(matches!(pca_embed(&data[..2]), Err(ProjectionError::TooFewPoints { .. })));
    }

    #[test]
    fn captured_variance_matches_svd() {
        let mut rng = SplitMix64::new(21);
        for trial in 0..5 {
            let (n, d) = (20 + trial * 7, 3 + trial);
            let data: Vec<Vec<f32>> = (0..n)
                .map(|_| (0..d).map(|j| ((j + 1) as f64 * (rng.unit_f64() - 0.5)) as f32).collect())
                .collect();
            let out = pca_embed(&data).unwrap();
            // Oracle: singular values of the centered data matrix.
            let mut x = DMatrix::from_fn(n, d, |i, j| f64::from(data[i][j]));
            for j in 0..d {
                let m = x.column(j).mean();
                x.column_mut(j).add_scalar_mut(-m);
            }
            let mut s: Vec<f64> = x.svd(false, false).singular_values.iter().map(|v| v * v / n as f64).collect();
            s.sort_by(|a, b| b.total_cmp(a));
            assert!((out.variances[0] + out.variances[1] - s[0] - s[1]).abs() < 1e-8);
            let vx = variance(out.coords.iter().map(|p| p[0]));
            let vy = variance(out.coords.iter().map(|p| p[1]));
            assert!(vx >= vy);
            assert!((vx - s[0]).abs() < 1e-8 && (vy - s[1]).abs() < 1e-8);
        }
    }
}
