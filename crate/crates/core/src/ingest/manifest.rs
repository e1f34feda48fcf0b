use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::IngestError;
use crate::model::{EmbeddingVector, ExemplarMeta, ExemplarRecord};

/// One manifest line: exemplar metadata plus an optional image location.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    #[serde(flatten)]
    pub meta: ExemplarMeta,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image_path: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct DatasetManifest {
    pub entries: Vec<ManifestEntry>,
    /// Directory relative image paths resolve against.
    pub base_dir: Option<PathBuf>,
}

impl DatasetManifest {
    pub fn new(entries: Vec<ManifestEntry>) -> Result<Self, IngestError> {
        let mut seen = HashSet::new();
        for (i, e) in entries.iter().enumerate() {
            e.meta.validate().map_err(|err| IngestError::Line {
                line: i + 1,
                reason: err.to_string(),
            })?;
            if !seen.insert(e.meta.id.as_str()) {
                return Err(IngestError::DuplicateId {
                    line: i + 1,
                    id: e.meta.id.clone(),
                });
            }
        }
        Ok(Self {
            entries,
            base_dir: None,
        })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|e| e.meta.id.as_str())
    }

    pub fn image_path(&self, entry: &ManifestEntry) -> Option<PathBuf> {
        let p = entry.image_path.as_ref()?;
        Some(match &self.base_dir {
            Some(base) if p.is_relative() => base.join(p),
            _ => p.clone(),
        })
    }

    /// Joins entries with their vectors, in manifest order.
    pub fn records(
        &self,
        vectors: &BTreeMap<String, EmbeddingVector>,
    ) -> Result<Vec<ExemplarRecord>, IngestError> {
        let missing: Vec<String> = self.ids().filter(|id| !vectors.contains_key(*id)).map(String::from).collect();
        if !missing.is_empty() {
            return Err(IngestError::MissingIds(missing));
        }
        self.entries
            .iter()
            .map(|e| {
                ExemplarRecord::new(e.meta.clone(), vectors[&e.meta.id].clone()).map_err(|err| {
                    IngestError::Vector {
                        id: e.meta.id.clone(),
                        reason: err.to_string(),
                    }
                })
            })
            .collect()
    }

    /// Serializes back to the line format.
    pub fn to_lines(&self) -> String {
        let mut out = String::new();
        for e in &self.entries {
            out.push_str(&serde_json::to_string(e).expect("entry serializes"));
            out.push('\n');
        }
        out
    }
}

/// Parses a manifest: one JSON object per line, blank lines ignored.
pub fn parse_manifest_str(text: &str) -> Result<DatasetManifest, IngestError> {
    let mut entries = Vec::new();
    let mut seen = HashSet::new();
    for (n, line) in text.lines().enumerate() {
        let line_no = n + 1;
        if line.trim().is_empty() {
            continue;
        }
        let entry: ManifestEntry = serde_json::from_str(line).map_err(|e| IngestError::Line {
            line: line_no,
            reason: e.to_string(),
        })?;
        entry.meta.validate().map_err(|e| IngestError::Line {
            line: line_no,
            reason: e.to_string(),
        })?;
        if !seen.insert(entry.meta.id.clone()) {
            return Err(IngestError::DuplicateId {
                line: line_no,
                id: entry.meta.id,
            });
        }
        entries.push(entry);
    }
    Ok(DatasetManifest {
        entries,
        base_dir: None,
    })
}

pub fn parse_manifest(path: impl AsRef<Path>) -> Result<DatasetManifest, IngestError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| IngestError::io(path, e))?;
    let mut manifest = parse_manifest_str(&text)?;
    manifest.base_dir = path.parent().map(Path::to_path_buf);
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;

    const GOOD: &str = r#"{"id":"hb03333","target_type":"2S1","serial":"b01","depression_deg":17,"azimuth_deg":10.2}
{"id":"hb03334","target_type":"T-72","depression_deg":15,"azimuth_deg":355.0,"condition":"clean","image_path":"chips/hb03334.png"}

{"id":"hb03335","target_type":"SLICY","depression_deg":30,"azimuth_deg":0,"source_tag":"mixed"}
"#;

    #[test]
    fn parses_well_formed_lines() {
        let m = parse_manifest_str(GOOD).unwrap();
        assert_eq!(m.len(), 3);
        assert_eq!(m.entries[0].meta.serial.as_deref(), Some("b01"));
        assert_eq!(m.entries[1].meta.condition.as_deref(), Some("clean"));
        assert_eq!(
            m.entries[1].image_path.as_deref(),
            Some(Path::new("chips/hb03334.png"))
        );
        assert_eq!(m.entries[2].meta.source_tag.as_deref(), Some("mixed"));
        let again = parse_manifest_str(&m.to_lines()).unwrap();
        assert_eq!(again, m);
    }

    #[test]
    fn joins_records_in_manifest_order() {
        let m = parse_manifest_str(GOOD).unwrap();
        let mut vectors: BTreeMap<String, EmbeddingVector> = m
            .ids()
            .map(|id| (id.to_string(), EmbeddingVector::new(vec![3.0, 4.0]).unwrap()))
            .collect();
        let records = m.records(&vectors).unwrap();
        let ids: Vec<&str> = records.iter().map(|r| r.id()).collect();
        assert_eq!(ids, ["hb03333", "hb03334", "hb03335"]);
        assert!(records[0].embedding.is_normalized());
        vectors.remove("hb03334");
        assert!(matches!(m.records(&vectors), Err(IngestError::MissingIds(ids)) if ids == ["hb03334"]));
    }

    #[test]
    fn out_of_range_angle_reports_line() {
        let text = GOOD.replace(r#""depression_deg":15"#, r#""depression_deg":95"#);
        match parse_manifest_str(&text) {
            Err(IngestError::Line { line, reason }) => {
                assert_eq!(line, 2);
                assert!(reason.contains("depression_deg"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn duplicate_id_is_named() {
        let text = format!("{GOOD}{}\n", GOOD.lines().next().unwrap());
        match parse_manifest_str(&text) {
            Err(IngestError::DuplicateId { id, line }) => {
                assert_eq!(id, "hb03333");
                assert_eq!(line, 5);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn malformed_line() {
        let err = parse_manifest_str("{\"id\":\"a\"}\n").unwrap_err();
        assert!(matches!(err, IngestError::Line { line: 1, .. }));
        let err = parse_manifest_str("not json").unwrap_err();
        assert!(matches!(err, IngestError::Line { line: 1, .. }));
    }
}
