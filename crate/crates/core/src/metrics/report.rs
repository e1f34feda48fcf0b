use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::MetricsError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub mean: f64,
    pub runs: Vec<f64>,
}

/// Per-metric means across repeated runs, with the per-run values kept.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub run_count: usize,
    pub rows: BTreeMap<String, MetricRow>,
}

impl EvalReport {
    pub fn mean(&self, metric: &str) -> Option<f64> {
        self.rows.get(metric).map(|r| r.mean)
    }
}

pub fn aggregate_runs(runs: &[BTreeMap<String, f64>]) -> Result<EvalReport, MetricsError> {
    let first = runs.first().ok_or(MetricsError::Empty)?;
    let names: BTreeSet<&String> = first.keys().collect();
    for (i, run) in runs.iter().enumerate().skip(1) {
        let other: BTreeSet<&String> = run.keys().collect();
        if other != names {
            let diff: Vec<&str> = names
                .symmetric_difference(&other)
                .map(|s| s.as_str())
                .collect();
            return Err(MetricsError::MismatchedMetrics(format!(
                "run {i} differs from run 0 on {}",
                diff.join(", ")
            )));
        }
    }
    let rows = names
        .into_iter()
        .map(|name| {
            let values: Vec<f64> = runs.iter().map(|r| r[name]).collect();
            let mean = values.iter().sum::<f64>() / values.len() as f64;
            (name.clone(), MetricRow { mean, runs: values })
        })
        .collect();
    Ok(EvalReport {
        run_count: runs.len(),
        rows,
    })
}

/// A fraction rendered as a percentage with two decimals, e.g. `77.72%`.
pub fn format_percent(fraction: f64) -> String {
    format!("{:.2}%", 100.0 * fraction)
}

/// Four significant figures without exponent notation for ordinary magnitudes.
pub fn format_sig4(value: f64) -> String {
    if value == 0.0 || !value.is_finite() {
        return format!("{value}");
    }
    let magnitude = value.abs().log10().floor() as i32;
    if !(-5..=15).contains(&magnitude) {
        return format!("{value:.3e}");
    }
    let decimals = (3 - magnitude).max(0) as usize;
    let rounded = format!("{value:.decimals$}");
    // Rounding can carry into a new digit (9.9996 -> 10.000); trim it back.
    let reparsed: f64 = rounded.parse().unwrap_or(value);
    let new_mag = reparsed.abs().log10().floor() as i32;
    if new_mag > magnitude && decimals > 0 {
        let decimals = decimals - 1;
        format!("{value:.decimals$}")
    } else {
        rounded
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(pairs: &[(&str, f64)]) -> BTreeMap<String, f64> {
        pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    #[test]
    fn means() {
        let r = aggregate_runs(&[run(&[("acc1", 0.8)]), run(&[("acc1", 0.6)])]).unwrap();
        assert_eq!(r.run_count, 2);
        assert!((r.mean("acc1").unwrap() - 0.7).abs() < 1e-12);
        assert_eq!(r.rows["acc1"].runs, vec![0.8, 0.6]);
        let single = aggregate_runs(&[run(&[("acc1", 0.42)])]).unwrap();
        assert_eq!(single.mean("acc1"), Some(0.42));
    }

    #[test]
    fn mismatched_sets() {
        let runs = [
            run(&[("a", 1.0), ("b", 2.0)]),
            run(&[("a", 1.0), ("b", 2.0)]),
            run(&[("a", 1.0)]),
        ];
        assert!(matches!(aggregate_runs(&runs), Err(MetricsError::MismatchedMetrics(_))));
        assert!(matches!(aggregate_runs(&[]), Err(MetricsError::Empty)));
    }

    #[test]
    fn order_independent() {
        let a = [run(&[("x", 0.1)]), run(&[("x", 0.5)]), run(&[("x", 0.9)])];
        let b = [a[2].clone(), a[0].clone(), a[1].clone()];
        let (ra, rb) = (aggregate_runs(&a).unwrap(), aggregate_runs(&b).unwrap());
        assert!((ra.mean("x").unwrap() - rb.mean("x").unwrap()).abs() < 1e-15);
    }

    #[test]
    fn formatting() {
        assert_eq!(format_percent(0.7772), "77.72%");
        assert_eq!(format_percent(0.00042), "0.04%");
        assert_eq!(format_sig4(0.428), "0.4280");
        assert_eq!(format_sig4(10.41), "10.41");
        assert_eq!(format_sig4(0.26391), "0.2639");
        assert_eq!(format_sig4(1234.56), "1235");
        assert_eq!(format_sig4(9.99961), "10.00");
        assert_eq!(format_sig4(0.0), "0");
    }
}
