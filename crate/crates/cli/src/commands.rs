use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use ragatr_core::eval::{render_report, run_eval, write_outputs};
use ragatr_core::index::{load_snapshot, save_snapshot};
use ragatr_core::ingest::{
    fetch_embeddings, generate_synthetic_corpus, load_embeddings, parse_manifest, parse_vehicle_specs,
    synthetic_vehicle_specs, vehicle_specs_to_string, DatasetManifest, EmbeddingLine, EmbeddingServiceClient,
    ManifestEntry, SyntheticCorpusConfig,
};
use ragatr_core::projection::{export_points, pca_2d, tsne_2d, TsneConfig};
use ragatr_core::rag::{Generator, RemoteGenerator, StubGenerator};
use ragatr_core::{ExemplarRecord, Index, SpecTable};

use crate::config::{parse_filters, RunConfig};
use crate::retrieve::{retrieve, QuerySource};
use crate::service::{self, AppState};
use crate::{CliError, OutputFormat, ProjectArgs, QueryArgs, ServeArgs, SynthArgs};

fn write_out(text: &str) -> Result<(), CliError> {
    let mut out = std::io::stdout().lock();
    out.write_all(text.as_bytes())
        .and_then(|_| out.flush())
        .map_err(|e| CliError::Internal(format!("stdout: {e}")))
}

fn load_records(cfg: &RunConfig) -> Result<Vec<ExemplarRecord>, CliError> {
    cfg.check_embedding_source()?;
    let manifest_path = RunConfig::require(&cfg.manifest_path, "manifest_path")?;
    let manifest = parse_manifest(manifest_path)?;
    let vectors = match (&cfg.embeddings_path, &cfg.embedding_service_endpoint) {
        (Some(path), _) => {
            let ids: BTreeSet<String> = manifest.ids().map(String::from).collect();
            let loaded = load_embeddings(path, &ids)?;
            if !loaded.extra_ids.is_empty() {
                eprintln!(
                    "warning: skipped {} embeddings with no manifest entry",
                    loaded.extra_ids.len()
                );
            }
            loaded.vectors
        }
        (None, Some(endpoint)) => fetch_embeddings(&EmbeddingServiceClient::new(endpoint.clone())?, &manifest)?,
        (None, None) => unreachable!("checked above"),
    };
    Ok(manifest.records(&vectors)?)
}

fn load_specs(path: &Path) -> Result<SpecTable, CliError> {
    Ok(parse_vehicle_specs(path)?)
}

fn build_generator(cfg: &RunConfig, specs: Arc<SpecTable>) -> Result<(Arc<dyn Generator>, String), CliError> {
    match cfg.generator.as_str() {
        "stub" => Ok((Arc::new(StubGenerator::new(specs)), "stub".into())),
        "remote" => {
            let endpoint = RunConfig::require(&cfg.generator_endpoint, "generator_endpoint")?;
            let remote = RemoteGenerator::new(endpoint.clone(), specs)?;
            Ok((Arc::new(remote), format!("remote {endpoint}")))
        }
        other => Err(CliError::Usage(format!(
            "unknown generator {other:?}; expected `stub` or `remote`"
        ))),
    }
}

fn histogram_text(index: &Index) -> String {
    let mut out = String::new();
    for (t, n) in index.class_histogram() {
        let _ = writeln!(out, "  {t}: {n}");
    }
    out
}

pub fn ingest(cfg: &RunConfig) -> Result<(), CliError> {
    let snapshot = RunConfig::require(&cfg.snapshot_path, "snapshot_path")?;
    let records = load_records(cfg)?;
    let index = Index::build(records)?;
    save_snapshot(&index, snapshot)?;
    write_out(&format!(
        "indexed {} records (dim {}) -> {}\n{}",
        index.len(),
        index.dim(),
        snapshot.display(),
        histogram_text(&index)
    ))
}

fn read_vector_file(path: &Path) -> Result<Vec<f32>, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    let trimmed = text.trim();
    if trimmed.starts_with('[') {
        return serde_json::from_str(trimmed).map_err(|e| CliError::Data(format!("{}: {e}", path.display())));
    }
    trimmed
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<f32>().map_err(|e| CliError::Data(format!("{}: {s:?}: {e}", path.display()))))
        .collect()
}

pub fn query(args: &QueryArgs) -> Result<(), CliError> {
    let source = match (&args.vec, &args.vec_file, &args.id) {
        (Some(v), None, None) => QuerySource::Vector(v.clone()),
        (None, Some(p), None) => QuerySource::Vector(read_vector_file(p)?),
        (None, None, Some(id)) => QuerySource::RecordId(id.clone()),
        _ => return Err(CliError::Usage("give exactly one of --vec, --vec-file or --id".into())),
    };
    let index = load_snapshot(&args.snapshot_path)?;
    let filter = parse_filters(&args.filter)?;
    let hits = retrieve(&index, &source, args.k, &filter)?;
    if hits.len() < args.k {
        eprintln!(
            "warning: only {} of {} requested hits match the filter",
            hits.len(),
            args.k
        );
    }
    let mut out = String::new();
    match args.format {
        OutputFormat::Table => {
            let _ = writeln!(out, "{:>4}  {:<24} {:<16} {:>10}", "rank", "id", "type", "score");
            for h in &hits {
                let _ = writeln!(out, "{:>4}  {:<24} {:<16} {:>10.6}", h.rank, h.id, h.target_type, h.score);
            }
        }
        OutputFormat::Lines => {
            for h in &hits {
                let line = serde_json::to_string(h).map_err(|e| CliError::Internal(e.to_string()))?;
                out.push_str(&line);
                out.push('\n');
            }
        }
    }
    write_out(&out)
}

pub fn eval(cfg: &RunConfig) -> Result<(), CliError> {
    let records = load_records(cfg)?;
    let specs = Arc::new(load_specs(RunConfig::require(&cfg.specs_path, "specs_path")?)?);
    let (generator, name) = build_generator(cfg, specs.clone())?;
    let eval_cfg = cfg.eval_config()?;
    let summary = run_eval(&records, &specs, generator.as_ref(), &name, &eval_cfg)?;
    let files = write_outputs(&summary, &cfg.output_dir)?;
    let mut out = render_report(&summary);
    for f in files {
        let _ = writeln!(out, "wrote {}", f.display());
    }
    write_out(&out)
}

pub fn project(args: &ProjectArgs) -> Result<(), CliError> {
    let index = load_snapshot(&args.snapshot_path)?;
    let records = index.records();
    let points = match args.method.as_str() {
        "pca" => pca_2d(&records)?,
        "tsne" => {
            let defaults = TsneConfig::default();
            let cfg = TsneConfig {
                perplexity: args.perplexity.unwrap_or(defaults.perplexity),
                iterations: args.iterations.unwrap_or(defaults.iterations),
                learning_rate: args.learning_rate.unwrap_or(defaults.learning_rate),
                seed: args.seed,
                ..defaults
            };
            cfg.validate(records.len()).map_err(|e| CliError::Usage(e.to_string()))?;
            tsne_2d(&records, &cfg)?
        }
        other => {
            return Err(CliError::Usage(format!(
                "unknown projection method {other:?}; expected `tsne` or `pca`"
            )))
        }
    };
    export_points(&points, &args.out)?;
    write_out(&format!("wrote {} points to {}\n", points.len(), args.out.display()))
}

pub fn serve(args: &ServeArgs, cfg: &RunConfig) -> Result<(), CliError> {
    let snapshot = RunConfig::require(&cfg.snapshot_path, "snapshot_path")?;
    let index = load_snapshot(snapshot)?;
    let answering = match &cfg.specs_path {
        Some(p) => {
            let specs = Arc::new(load_specs(p)?);
            let (generator, _) = build_generator(cfg, specs.clone())?;
            Some((specs, generator))
        }
        None => None,
    };
    let state = AppState::new(index, answering);
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| CliError::Internal(format!("runtime: {e}")))?;
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind((args.host.as_str(), args.port))
            .await
            .map_err(|e| CliError::Data(format!("bind {}:{}: {e}", args.host, args.port)))?;
        let addr = listener
            .local_addr()
            .map_err(|e| CliError::Internal(e.to_string()))?;
        write_out(&format!("listening on http://{addr}\n"))?;
        service::serve(listener, state)
            .await
            .map_err(|e| CliError::Internal(format!("server: {e}")))
    })
}

pub fn synth(args: &SynthArgs) -> Result<(), CliError> {
    let cfg = SyntheticCorpusConfig::uniform(args.classes, args.per_class, args.dim, args.concentration, args.seed);
    let records = generate_synthetic_corpus(&cfg)?;
    let specs = synthetic_vehicle_specs(cfg.class_counts.keys().map(String::as_str), args.seed);
    let dir = &args.out_dir;
    let io = |p: &PathBuf, e: std::io::Error| CliError::Data(format!("{}: {e}", p.display()));
    std::fs::create_dir_all(dir).map_err(|e| io(dir, e))?;

    let manifest = DatasetManifest::new(
        records
            .iter()
            .map(|r| ManifestEntry {
                meta: r.meta.clone(),
                image_path: None,
            })
            .collect(),
    )?;
    let mut embeddings = String::new();
    for r in &records {
        let line = EmbeddingLine {
            id: r.id(),
            vec: r.embedding.values(),
        };
        embeddings.push_str(&serde_json::to_string(&line).map_err(|e| CliError::Internal(e.to_string()))?);
        embeddings.push('\n');
    }
    let files = [
        ("manifest.jsonl", manifest.to_lines()),
        ("embeddings.jsonl", embeddings),
        ("specs.json", vehicle_specs_to_string(&specs) + "\n"),
    ];
    for (name, body) in files {
        let path = dir.join(name);
        std::fs::write(&path, body).map_err(|e| io(&path, e))?;
    }
    write_out(&format!(
        "wrote {} records of {} classes (dim {}) to {}\n",
        records.len(),
        args.classes,
        args.dim,
        dir.display()
    ))
}
