//! Run configuration: a TOML file whose every field can be overridden by a
//! flag of the same name.

use std::path::{Path, PathBuf};

use clap::Args;
use ragatr_core::eval::{EvalConfig, DEFAULT_PARALLELISM, DEFAULT_SEEDS};
use ragatr_core::rag::DEFAULT_K;
use ragatr_core::MetadataFilter;
use serde::Deserialize;

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub manifest_path: Option<PathBuf>,
    pub embeddings_path: Option<PathBuf>,
    pub embedding_service_endpoint: Option<String>,
    pub specs_path: Option<PathBuf>,
    pub snapshot_path: Option<PathBuf>,
    pub split_ratio: f64,
    pub seeds: Vec<u64>,
    pub k: usize,
    /// `stub` or `remote`.
    pub generator: String,
    pub generator_endpoint: Option<String>,
    pub filter: Vec<String>,
    pub output_dir: PathBuf,
    pub parallelism: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            manifest_path: None,
            embeddings_path: None,
            embedding_service_endpoint: None,
            specs_path: None,
            snapshot_path: None,
            split_ratio: 0.5,
            seeds: DEFAULT_SEEDS.to_vec(),
            k: DEFAULT_K,
            generator: "stub".into(),
            generator_endpoint: None,
            filter: Vec::new(),
            output_dir: PathBuf::from("ragatr-out"),
            parallelism: DEFAULT_PARALLELISM,
        }
    }
}

/// Flags shared by the commands that take a run configuration.
#[derive(Debug, Clone, Default, Args)]
pub struct ConfigArgs {
    /// TOML configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub manifest_path: Option<PathBuf>,
    #[arg(long)]
    pub embeddings_path: Option<PathBuf>,
    #[arg(long)]
    pub embedding_service_endpoint: Option<String>,
    #[arg(long)]
    pub specs_path: Option<PathBuf>,
    #[arg(long)]
    pub snapshot_path: Option<PathBuf>,
    #[arg(long)]
    pub split_ratio: Option<f64>,
    /// Comma-separated seed list.
    #[arg(long, value_delimiter = ',')]
    pub seeds: Option<Vec<u64>>,
    #[arg(long)]
    pub k: Option<usize>,
    /// `stub` or `remote`.
    #[arg(long)]
    pub generator: Option<String>,
    #[arg(long)]
    pub generator_endpoint: Option<String>,
    /// Filter clauses such as `depression_deg=15` or `azimuth_deg<=90`; repeatable.
    #[arg(long)]
    pub filter: Option<Vec<String>>,
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
    #[arg(long)]
    pub parallelism: Option<usize>,
}

fn rebase(base: &Path, p: &mut Option<PathBuf>) {
    if let Some(path) = p {
        if path.is_relative() {
            *path = base.join(&*path);
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Usage(format!("config: {e}")))
    }

    /// Reads the file (if any), resolves its relative paths against the
    /// file's directory, then applies flag overrides.
    pub fn resolve(args: &ConfigArgs) -> Result<Self, CliError> {
        let mut cfg = match &args.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
                let mut cfg = Self::from_toml(&text)?;
                let base = path.parent().unwrap_or(Path::new("."));
                rebase(base, &mut cfg.manifest_path);
                rebase(base, &mut cfg.embeddings_path);
                rebase(base, &mut cfg.specs_path);
                rebase(base, &mut cfg.snapshot_path);
                let mut out = Some(cfg.output_dir.clone());
                rebase(base, &mut out);
                cfg.output_dir = out.expect("set above");
                cfg
            }
            None => Self::default(),
        };
        macro_rules! over {
            ($($f:ident),*) => {$(
                if let Some(v) = &args.$f {
                    cfg.$f = Some(v.clone());
                }
            )*};
        }
        over!(manifest_path, embeddings_path, embedding_service_endpoint, specs_path, snapshot_path, generator_endpoint);
        macro_rules! over_plain {
            ($($f:ident),*) => {$(
                if let Some(v) = &args.$f {
                    cfg.$f = v.clone();
                }
            )*};
        }
        over_plain!(split_ratio, seeds, k, generator, filter, output_dir, parallelism);
        Ok(cfg)
    }

    pub fn require<'a, T>(value: &'a Option<T>, name: &str) -> Result<&'a T, CliError> {
        value
            .as_ref()
            .ok_or_else(|| CliError::Usage(format!("missing required setting `{name}`")))
    }

    pub fn metadata_filter(&self) -> Result<MetadataFilter, CliError> {
        parse_filters(&self.filter)
    }

    pub fn check_embedding_source(&self) -> Result<(), CliError> {
        match (&self.embeddings_path, &self.embedding_service_endpoint) {
            (Some(_), None) | (None, Some(_)) => Ok(()),
            (None, None) => Err(CliError::Usage(
                "configure one embedding source: `embeddings_path` or `embedding_service_endpoint`".into(),
            )),
            (Some(_), Some(_)) => Err(CliError::Usage(
                "`embeddings_path` and `embedding_service_endpoint` are mutually exclusive".into(),
            )),
        }
    }

    pub fn eval_config(&self) -> Result<EvalConfig, CliError> {
        Ok(EvalConfig {
            split_ratio: self.split_ratio,
            seeds: self.seeds.clone(),
            k: self.k,
            filter: self.metadata_filter()?,
            parallelism: self.parallelism,
        })
    }
}

pub fn parse_filters(clauses: &[String]) -> Result<MetadataFilter, CliError> {
    clauses.iter().try_fold(MetadataFilter::all(), |acc, text| {
        let more: MetadataFilter = text
            .parse()
            .map_err(|e| CliError::Usage(format!("filter {text:?}: {e}")))?;
        Ok(more.clauses.into_iter().fold(acc, MetadataFilter::and))
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_overrides() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(
            &path,
            "manifest_path = \"m.jsonl\"\nembeddings_path = \"/abs/e.jsonl\"\nseeds = [7, 8]\nk = 3\n",
        )
        .unwrap();
        let args = ConfigArgs {
            config: Some(path),
            k: Some(5),
            filter: Some(vec!["depression_deg=15".into()]),
            ..ConfigArgs::default()
        };
        let cfg = RunConfig::resolve(&args).unwrap();
        assert_eq!(cfg.manifest_path, Some(dir.path().join("m.jsonl")));
        assert_eq!(cfg.embeddings_path, Some(PathBuf::from("/abs/e.jsonl")));
        assert_eq!(cfg.seeds, vec![7, 8]);
        assert_eq!(cfg.k, 5);
        assert_eq!(cfg.split_ratio, 0.5);
        assert_eq!(cfg.metadata_filter().unwrap().clauses.len(), 1);
        cfg.check_embedding_source().unwrap();
    }

    #[test]
    fn rejects_unknown_keys_and_two_sources() {
        assert!(RunConfig::from_toml("bogus = 1").is_err());
        let cfg = RunConfig {
            embeddings_path: Some("a".into()),
            embedding_service_endpoint: Some("http://x".into()),
            ..RunConfig::default()
        };
        assert!(cfg.check_embedding_source().is_err());
        assert!(RunConfig::default().check_embedding_source().is_err());
    }
}
