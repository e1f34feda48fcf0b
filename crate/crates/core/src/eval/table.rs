use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::{metric_key, EvalError, EvalSummary, SHORT_K};
use crate::metrics::{format_percent, format_sig4};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Column {
    /// The configured generator with retrieval.
    System,
    /// The retrieval-free prior generator.
    Baseline,
    /// Closed-form weighted-random expectation.
    Random,
}

impl Column {
    pub const ALL: [Column; 3] = [Column::System, Column::Baseline, Column::Random];

    pub fn name(self) -> &'static str {
        match self {
            Column::System => "system",
            Column::Baseline => "baseline",
            Column::Random => "random",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MetricKind {
    Percent,
    Error,
}

#[derive(Debug, Clone, Copy)]
pub struct RowSpec {
    pub key: &'static str,
    pub section: &'static str,
    /// `{k}` and `{short}` are replaced by the retrieval depths.
    pub label: &'static str,
    pub kind: MetricKind,
    pub has_baseline: bool,
}

const fn row(key: &'static str, section: &'static str, label: &'static str, kind: MetricKind, has_baseline: bool) -> RowSpec {
    RowSpec {
        key,
        section,
        label,
        kind,
        has_baseline,
    }
}

const PCT: MetricKind = MetricKind::Percent;
const ERR: MetricKind = MetricKind::Error;

pub const ROWS: [RowSpec; 14] = [
    row("acc1", "Retrieval", "Accuracy @ 1-shot", PCT, false),
    row("precision_k", "Retrieval", "Precision @ {k}-shot", PCT, false),
    row("any_k", "Retrieval", "Any Correct @ {k}-shot", PCT, false),
    row("all_short", "Retrieval", "All Correct @ {short}-shot", PCT, false),
    row("all_k", "Retrieval", "All Correct @ {k}-shot", PCT, false),
    row("type", "Vehicle Classification", "Type", PCT, true),
    row("qualities", "Vehicle Classification", "Descriptive Qualities Set", PCT, true),
    row("mounted_weapon", "Vehicle Classification", "Mounted Weapon Detection", PCT, true),
    row("weight_mae", "Vehicle Weight", "MAE (t)", ERR, true),
    row("weight_rmse", "Vehicle Weight", "RMSE (t)", ERR, true),
    row("weight_mape", "Vehicle Weight", "MAPE", PCT, true),
    row("dims_mae", "Vehicle Dimensions", "MAE (m)", ERR, true),
    row("dims_rmse", "Vehicle Dimensions", "RMSE (m)", ERR, true),
    row("dims_mape", "Vehicle Dimensions", "MAPE", PCT, true),
];

fn cell(kind: MetricKind, v: f64) -> String {
    match kind {
        MetricKind::Percent => format_percent(v),
        MetricKind::Error => format_sig4(v),
    }
}

/// The aggregated table as plain text, one section per metric family.
pub fn render_report(summary: &EvalSummary) -> String {
    let cfg = &summary.config;
    let mut out = String::new();
    let seeds: Vec<String> = cfg.seeds.iter().map(u64::to_string).collect();
    let _ = writeln!(out, "Retrieval & visual question answering benchmark");
    let _ = writeln!(
        out,
        "records: {}  runs: {} (seeds {})  split: {}  k: {}  generator: {}",
        summary.record_count,
        summary.report.run_count,
        seeds.join(" "),
        cfg.split_ratio,
        cfg.k,
        summary.generator
    );
    if !cfg.filter.is_empty() {
        let clauses: Vec<String> = cfg.filter.clauses.iter().map(ToString::to_string).collect();
        let _ = writeln!(out, "filter: {}", clauses.join(","));
    }
    let mut section = "";
    for spec in ROWS {
        if spec.section != section {
            section = spec.section;
            let _ = writeln!(out, "\n{section}");
            let _ = writeln!(out, "  {:<30} {:>14} {:>12} {:>12}", "metric", "system (mean)", "baseline", "random");
        }
        let label = spec
            .label
            .replace("{k}", &cfg.k.to_string())
            .replace("{short}", &SHORT_K.to_string());
        let value = |col: Column| {
            if col == Column::Baseline && !spec.has_baseline {
                return "-".to_string();
            }
            summary
                .report
                .mean(&metric_key(spec.key, col))
                .map_or_else(|| "-".to_string(), |v| cell(spec.kind, v))
        };
        let _ = writeln!(
            out,
            "  {:<30} {:>14} {:>12} {:>12}",
            label,
            value(Column::System),
            value(Column::Baseline),
            value(Column::Random)
        );
    }
    let _ = writeln!(out, "\nDiagnostics (mean over runs)");
    for (name, row) in &summary.diagnostics.rows {
        let _ = writeln!(out, "  {:<30} {}", name, format_sig4(row.mean));
    }
    out
}

fn per_run_csv(summary: &EvalSummary) -> String {
    let mut out = String::from("metric");
    for r in &summary.runs {
        let _ = write!(out, ",seed_{}", r.seed);
    }
    out.push_str(",mean\n");
    for (name, row) in summary.report.rows.iter().chain(&summary.diagnostics.rows) {
        out.push_str(name);
        for v in &row.runs {
            let _ = write!(out, ",{v}");
        }
        let _ = writeln!(out, ",{}", row.mean);
    }
    out
}

/// Writes `report.txt`, `report.json`, `runs.csv` and one
/// `predictions-seed{N}.jsonl` per run into `dir`.
pub fn write_outputs(summary: &EvalSummary, dir: &Path) -> Result<Vec<PathBuf>, EvalError> {
    let io = |p: &Path, e: std::io::Error| EvalError::Io(format!("{}: {e}", p.display()));
    fs::create_dir_all(dir).map_err(|e| io(dir, e))?;
    let mut written = Vec::new();
    let mut put = |name: String, body: String| -> Result<(), EvalError> {
        let path = dir.join(name);
        fs::write(&path, body).map_err(|e| io(&path, e))?;
        written.push(path);
        Ok(())
    };
    put("report.txt".into(), render_report(summary))?;
    let json = serde_json::json!({
        "config": summary.config,
        "generator": summary.generator,
        "record_count": summary.record_count,
        "report": summary.report,
        "diagnostics": summary.diagnostics,
    });
    put(
        "report.json".into(),
        serde_json::to_string_pretty(&json).map_err(|e| EvalError::Io(e.to_string()))? + "\n",
    )?;
    put("runs.csv".into(), per_run_csv(summary))?;
    for run in &summary.runs {
        let mut body = String::new();
        for p in &run.predictions {
            body.push_str(&serde_json::to_string(p).map_err(|e| EvalError::Io(e.to_string()))?);
            body.push('\n');
        }
        put(format!("predictions-seed{}.jsonl", run.seed), body)?;
    }
    Ok(written)
}
