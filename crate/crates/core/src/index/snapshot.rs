//! Snapshot file format (all integers little-endian):
//!
//! ```text
//! "SRAG" 0x01
//! u32 dim
//! u64 record count
//! per record:
//!   u16 id byte length, id (UTF-8)
//!   dim x f32 embedding components
//!   u32 metadata byte length, metadata (UTF-8, one-line JSON object)
//! ```
//!
//! Metadata keys, in order: `target_type`, `serial`, `depression_deg`,
//! `azimuth_deg`, `condition`, `source_tag`. Absent optionals are omitted.
//! Components are written as stored, so a round trip is bit-identical.

use std::collections::HashSet;
use std::fs;
use std::io::{self, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::Index;
use crate::model::{ExemplarMeta, UNIT_NORM_TOLERANCE};

const MAGIC: &[u8; 4] = b"SRAG";
const VERSION: u8 = 0x01;

#[derive(Debug, Error)]
pub enum SnapshotError {
    #[error("bad magic")]
    BadMagic,
    #[error("unsupported snapshot version {0}")]
    UnsupportedVersion(u8),
    #[error("unexpected end of file")]
    UnexpectedEof,
    #[error("dimension inconsistency: {0}")]
    Dimension(String),
    #[error("record {index}: invalid metadata: {reason}")]
    Metadata { index: u64, reason: String },
    #[error("record {index}: id is not valid UTF-8")]
    InvalidId { index: u64 },
    #[error("duplicate record id {0:?} in snapshot")]
    DuplicateId(String),
    #[error("{0} trailing bytes after the last record")]
    TrailingBytes(usize),
    #[error("record id {0:?} is longer than 65535 bytes")]
    IdTooLong(String),
    #[error("snapshot contains no records")]
    Empty,
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Serialize, Deserialize)]
struct StoredMeta<'a> {
    #[serde(borrow)]
    target_type: std::borrow::Cow<'a, str>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    serial: Option<String>,
    depression_deg: f64,
    azimuth_deg: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    condition: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    source_tag: Option<String>,
}

pub fn write_snapshot<W: Write>(index: &Index, mut w: W) -> Result<(), SnapshotError> {
    w.write_all(MAGIC)?;
    w.write_all(&[VERSION])?;
    w.write_all(&(index.dim() as u32).to_le_bytes())?;
    w.write_all(&(index.len() as u64).to_le_bytes())?;
    for (meta, row) in index.iter() {
        let id = meta.id.as_bytes();
        let id_len = u16::try_from(id.len()).map_err(|_| SnapshotError::IdTooLong(meta.id.clone()))?;
        w.write_all(&id_len.to_le_bytes())?;
        w.write_all(id)?;
        for &c in row {
            w.write_all(&c.to_le_bytes())?;
        }
        let stored = StoredMeta {
            target_type: meta.target_type.as_str().into(),
            serial: meta.serial.clone(),
            depression_deg: meta.depression_deg,
            azimuth_deg: meta.azimuth_deg,
            condition: meta.condition.clone(),
            source_tag: meta.source_tag.clone(),
        };
        let json = serde_json::to_vec(&stored).expect("metadata serializes");
        w.write_all(&(json.len() as u32).to_le_bytes())?;
        w.write_all(&json)?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_snapshot(index: &Index, path: impl AsRef<Path>) -> Result<(), SnapshotError> {
    let mut buf = Vec::with_capacity(17 + index.len() * (index.dim() * 4 + 96));
    write_snapshot(index, &mut buf)?;
    // Write beside the target and rename so readers never see a torn file.
    let path = path.as_ref();
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    fs::write(&tmp, buf)?;
    fs::rename(&tmp, path).inspect_err(|_| {
        let _ = fs::remove_file(&tmp);
    })?;
    Ok(())
}

pub fn load_snapshot(path: impl AsRef<Path>) -> Result<Index, SnapshotError> {
    read_snapshot(&fs::read(path)?)
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], SnapshotError> {
        let end = self.pos.checked_add(n).ok_or(SnapshotError::UnexpectedEof)?;
        let out = self.buf.get(self.pos..end).ok_or(SnapshotError::UnexpectedEof)?;
        self.pos = end;
        Ok(out)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N], SnapshotError> {
        Ok(self.take(N)?.try_into().expect("length checked"))
    }

    fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }
}

pub fn read_snapshot(bytes: &[u8]) -> Result<Index, SnapshotError> {
    let mut cur = Cursor { buf: bytes, pos: 0 };
    if cur.take(4).map_err(|_| SnapshotError::BadMagic)? != MAGIC {
        return Err(SnapshotError::BadMagic);
    }
    let [version] = cur.array::<1>()?;
    if version != VERSION {
        return Err(SnapshotError::UnsupportedVersion(version));
    }
    let dim = u32::from_le_bytes(cur.array()?) as usize;
    if dim == 0 {
        return Err(SnapshotError::Dimension("header dimension is zero".into()));
    }
    let count = u64::from_le_bytes(cur.array()?);
    if count == 0 {
        return Err(SnapshotError::Empty);
    }
    // Each record needs at least its fixed-size parts.
    let min_record = 2 + dim * 4 + 4;
    if (cur.remaining() as u128) < u128::from(count) * min_record as u128 {
        return Err(SnapshotError::UnexpectedEof);
    }

    let mut index = Index {
        dim,
        metas: Vec::with_capacity(count as usize),
        vectors: Vec::with_capacity(count as usize * dim),
        positions: Default::default(),
    };
    let mut seen = HashSet::with_capacity(count as usize);
    let mut row = vec![0f32; dim];
    for i in 0..count {
        let id_len = u16::from_le_bytes(cur.array()?) as usize;
        let id = std::str::from_utf8(cur.take(id_len)?)
            .map_err(|_| SnapshotError::InvalidId { index: i })?
            .to_string();
        for c in row.iter_mut() {
            *c = f32::from_le_bytes(cur.array()?);
        }
        let norm: f64 = crate::model::dot(&row, &row).sqrt();
        if !row.iter().all(|c| c.is_finite()) || (norm - 1.0).abs() > UNIT_NORM_TOLERANCE {
            return Err(SnapshotError::Dimension(format!(
                "record {id:?} embedding is not a unit vector of dimension {dim}"
            )));
        }
        let meta_len = u32::from_le_bytes(cur.array()?) as usize;
        let raw = cur.take(meta_len)?;
        let stored: StoredMeta<'_> =
            serde_json::from_slice(raw).map_err(|e| SnapshotError::Metadata {
                index: i,
                reason: e.to_string(),
            })?;
        let meta = ExemplarMeta {
            id,
            target_type: stored.target_type.into_owned(),
            serial: stored.serial,
            depression_deg: stored.depression_deg,
            azimuth_deg: stored.azimuth_deg,
            condition: stored.condition,
            source_tag: stored.source_tag,
        };
        meta.validate().map_err(|e| SnapshotError::Metadata {
            index: i,
            reason: e.to_string(),
        })?;
        if !seen.insert(meta.id.clone()) {
            return Err(SnapshotError::DuplicateId(meta.id));
        }
        index.push_raw(meta, &row);
    }
    if cur.remaining() > 0 {
        return Err(SnapshotError::TrailingBytes(cur.remaining()));
    }
    Ok(index)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::index::MetadataFilter;
    use crate::model::{EmbeddingVector, ExemplarRecord};

    fn small_index() -> Index {
        let rec = |id: &str, serial: Option<&str>, v: [f32; 3]| {
            ExemplarRecord::new(
                ExemplarMeta {
                    id: id.into(),
                    target_type: "BMP-2".into(),
                    serial: serial.map(Into::into),
                    depression_deg: 17.0,
                    azimuth_deg: 271.33,
                    condition: None,
                    source_tag: Some("mixed".into()),
                },
                EmbeddingVector::new(v.to_vec()).unwrap(),
            )
            .unwrap()
        };
        Index::build(vec![
            rec("a", Some("9563"), [1.0, 2.0, 3.0]),
            rec("b", None, [0.3, -0.1, 0.7]),
        ])
        .unwrap()
    }

    fn bytes_of(index: &Index) -> Vec<u8> {
        let mut buf = Vec::new();
        write_snapshot(index, &mut buf).unwrap();
        buf
    }

    #[test]
    fn layout_is_exact() {
        let idx = small_index();
        let buf = bytes_of(&idx);
        assert_eq!(&buf[..5], b"SRAG\x01");
        assert_eq!(u32::from_le_bytes(buf[5..9].try_into().unwrap()), 3);
        assert_eq!(u64::from_le_bytes(buf[9..17].try_into().unwrap()), 2);
        assert_eq!(u16::from_le_bytes(buf[17..19].try_into().unwrap()), 1);
        assert_eq!(buf[19], b'a');
        let comps: Vec<f32> = (0..3)
            .map(|i| f32::from_le_bytes(buf[20 + 4 * i..24 + 4 * i].try_into().unwrap()))
            .collect();
        assert_eq!(comps, idx.embedding("a").unwrap());
        let meta_len = u32::from_le_bytes(buf[32..36].try_into().unwrap()) as usize;
        let meta = std::str::from_utf8(&buf[36..36 + meta_len]).unwrap();
        assert_eq!(
            meta,
            r#"{"target_type":"BMP-2","serial":"9563","depression_deg":17.0,"azimuth_deg":271.33,"source_tag":"mixed"}"#
        );
    }

    #[test]
    fn round_trip_bit_identical() {
        let idx = small_index();
        let back = read_snapshot(&bytes_of(&idx)).unwrap();
        assert_eq!(back.metas, idx.metas);
        let bits = |i: &Index| i.vectors.iter().map(|c| c.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&back), bits(&idx));
        assert_eq!(bytes_of(&back), bytes_of(&idx));
        let query = EmbeddingVector::new(vec![0.2, 0.1, 0.9]).unwrap();
        assert_eq!(
            back.knn(&query, 2, &MetadataFilter::all()).unwrap(),
            idx.knn(&query, 2, &MetadataFilter::all()).unwrap()
        );
    }

    #[test]
    fn bad_magic() {
        let mut buf = bytes_of(&small_index());
        buf[0] = b'X';
        let err = read_snapshot(&buf).unwrap_err();
        assert!(matches!(err, SnapshotError::BadMagic));
        assert_eq!(err.to_string(), "bad magic");
        assert!(matches!(read_snapshot(b"SR"), Err(SnapshotError::BadMagic)));
    }

    #[test]
    fn truncated() {
        let buf = bytes_of(&small_index());
        for cut in [6, 12, 20, buf.len() - 1] {
            let err = read_snapshot(&buf[..cut]).unwrap_err();
            assert!(matches!(err, SnapshotError::UnexpectedEof), "cut {cut}: {err}");
            assert_eq!(err.to_string(), "unexpected end of file");
        }
    }

    #[test]
    fn other_corruptions_are_distinct() {
        let mut buf = bytes_of(&small_index());
        buf[4] = 2;
        assert!(matches!(read_snapshot(&buf), Err(SnapshotError::UnsupportedVersion(2))));

        let mut buf = bytes_of(&small_index());
        buf[5..9].copy_from_slice(&0u32.to_le_bytes());
        assert!(matches!(read_snapshot(&buf), Err(SnapshotError::Dimension(_))));

        // Header claims dim 2 while records carry 3 components.
        let mut buf = bytes_of(&small_index());
        buf[5..9].copy_from_slice(&2u32.to_le_bytes());
        assert!(read_snapshot(&buf).is_err());

        let mut buf = bytes_of(&small_index());
        buf.push(0);
        assert!(matches!(read_snapshot(&buf), Err(SnapshotError::TrailingBytes(1))));
    }
}
