use serde::{Deserialize, Serialize};

use super::MetricsError;
use crate::model::Attribute;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionSample {
    pub query_id: String,
    pub predicted: f64,
    pub truth: f64,
    pub attribute: Attribute,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegressionMetrics {
    pub mae: f64,
    pub rmse: f64,
    pub mape_pct: f64,
}

/// MAE, RMSE and MAPE (in percent) over the samples.
pub fn regression_metrics(samples: &[RegressionSample]) -> Result<RegressionMetrics, MetricsError> {
    if samples.is_empty() {
        return Err(MetricsError::Empty);
    }
    if let Some(s) = samples.iter().find(|s| s.truth == 0.0) {
        return Err(MetricsError::ZeroTruth {
            query_id: s.query_id.clone(),
        });
    }
    if let Some(s) = samples.iter().find(|s| !(s.predicted.is_finite() && s.truth.is_finite())) {
        return Err(MetricsError::InvalidInput(format!(
            "{}: non-finite sample",
            s.query_id
        )));
    }
    let n = samples.len() as f64;
    let (abs, sq, pct) = samples.iter().fold((0.0, 0.0, 0.0), |(a, s, p), x| {
        let e = x.predicted - x.truth;
        (a + e.abs(), s + e * e, p + (e / x.truth).abs())
    });
    Ok(RegressionMetrics {
        mae: abs / n,
        rmse: (sq / n).sqrt(),
        mape_pct: 100.0 * pct / n,
    })
}
