//! Versioned model archive.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! offset  size  field
//! 0       8     magic  b"PRODCLS\0"
//! 8       4     format version (u32), currently 1
//! 12      8     metadata length M in bytes (u64)
//! 20      M     metadata, UTF-8 JSON
//! 20+M    8     array payload length L in f64 elements (u64)
//! 28+M    8*L   array payload, IEEE-754 binary64 values
//! ```
//!
//! Large numeric arrays inside the metadata are written as
//! `{"offset": o, "len": n}` references into the payload; everything else is
//! plain JSON.

use std::cell::RefCell;
use std::io::Write;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::classifiers::Model;
use crate::corpus::LabelDictionary;
use crate::embeddings::Vectorizer;
use crate::error::{Error, Result};
use crate::pipeline::PipelineConfig;

pub const MAGIC: &[u8; 8] = b"PRODCLS\0";
pub const FORMAT_VERSION: u32 = 1;

thread_local! {
    static WRITE_BLOB: RefCell<Option<Vec<f64>>> = const { RefCell::new(None) };
    static READ_BLOB: RefCell<Option<Vec<f64>>> = const { RefCell::new(None) };
}

/// `#[serde(with = "crate::archive::blob")]` for `Vec<f64>` fields that
/// belong in the binary payload. Outside an archive the field is an ordinary
/// JSON array.
pub mod blob {
    use super::{READ_BLOB, WRITE_BLOB};
    use serde::de::Error as _;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    struct BlobRef {
        offset: u64,
        len: u64,
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Stored {
        Ref(BlobRef),
        Inline(Vec<f64>),
    }

    pub fn serialize<S: Serializer>(values: &[f64], s: S) -> Result<S::Ok, S::Error> {
        let reference = WRITE_BLOB.with(|b| {
            b.borrow_mut().as_mut().map(|blob| {
                let offset = blob.len() as u64;
                blob.extend_from_slice(values);
                BlobRef {
                    offset,
                    len: values.len() as u64,
                }
            })
        });
        match reference {
            Some(r) => r.serialize(s),
            None => values.serialize(s),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
        match Stored::deserialize(d)? {
            Stored::Inline(v) => Ok(v),
            Stored::Ref(r) => READ_BLOB.with(|b| {
                let guard = b.borrow();
                let blob = guard
                    .as_ref()
                    .ok_or_else(|| D::Error::custom("array reference outside an archive"))?;
                let start = r.offset as usize;
                let end = start
                    .checked_add(r.len as usize)
                    .filter(|&e| e <= blob.len())
                    .ok_or_else(|| D::Error::custom("array reference out of bounds"))?;
                Ok(blob[start..end].to_vec())
            }),
        }
    }
}

/// Encodes any serializable value in the archive container format.
pub fn encode<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    WRITE_BLOB.with(|b| *b.borrow_mut() = Some(Vec::new()));
    let meta = serde_json::to_vec(value);
    let blob = WRITE_BLOB.with(|b| b.borrow_mut().take()).unwrap_or_default();
    let meta = meta.map_err(|e| Error::Archive(format!("encode metadata: {e}")))?;

    let mut out = Vec::with_capacity(28 + meta.len() + 8 * blob.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(meta.len() as u64).to_le_bytes());
    out.extend_from_slice(&meta);
    out.extend_from_slice(&(blob.len() as u64).to_le_bytes());
    for v in &blob {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

fn read_u64(bytes: &[u8], at: usize) -> Result<u64> {
    bytes
        .get(at..at + 8)
        .map(|s| u64::from_le_bytes(s.try_into().unwrap()))
        .ok_or_else(|| Error::Archive("truncated archive".into()))
}

/// Splits an archive into its version, JSON metadata and array payload.
pub fn parse_container(bytes: &[u8]) -> Result<(u32, &[u8], Vec<f64>)> {
    if bytes.len() < 12 || &bytes[..8] != MAGIC {
        return Err(Error::Archive("not a model archive (bad magic)".into()));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
    let meta_len = read_u64(bytes, 12)? as usize;
    let meta_end = 20usize
        .checked_add(meta_len)
        .filter(|&e| e <= bytes.len())
        .ok_or_else(|| Error::Archive("truncated metadata".into()))?;
    let meta = &bytes[20..meta_end];
    let n = read_u64(bytes, meta_end)? as usize;
    let start = meta_end + 8;
    let payload = bytes
        .get(start..start + n.saturating_mul(8).min(bytes.len()))
        .filter(|p| p.len() == n * 8)
        .ok_or_else(|| Error::Archive("truncated array payload".into()))?;
    let blob = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok((version, meta, blob))
}

pub fn decode<T: DeserializeOwned>(bytes: &[u8]) -> Result<T> {
    let (version, meta, blob) = parse_container(bytes)?;
    if version != FORMAT_VERSION {
        return Err(Error::Archive(format!(
            "unsupported archive version {version} (this build reads version {FORMAT_VERSION})"
        )));
    }
    READ_BLOB.with(|b| *b.borrow_mut() = Some(blob));
    let value = serde_json::from_slice(meta);
    READ_BLOB.with(|b| *b.borrow_mut() = None);
    value.map_err(|e| Error::Archive(format!("decode metadata: {e}")))
}

/// Writes `bytes` to `path` through a temporary file in the same directory,
/// so the target is either complete or absent.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(path, e))?;
    tmp.as_file().sync_all().map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

/// Everything needed to classify raw product names.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelArchive {
    pub format_version: u32,
    pub labels: LabelDictionary,
    pub vectorizer: Vectorizer,
    pub model: Model,
    pub config: PipelineConfig,
}

impl ModelArchive {
    pub fn new(
        labels: LabelDictionary,
        vectorizer: Vectorizer,
        model: Model,
        config: PipelineConfig,
    ) -> Self {
        ModelArchive {
            format_version: FORMAT_VERSION,
            labels,
            vectorizer,
            model,
            config,
        }
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        encode(self)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        decode(bytes)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, &self.to_bytes()?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Debug, PartialEq, Serialize, Deserialize)]
    struct Holder {
        name: String,
        #[serde(with = "blob")]
        a: Vec<f64>,
        #[serde(with = "blob")]
        b: Vec<f64>,
    }

    #[test]
    fn blob_fields_go_to_payload() {
        let h = Holder {
            name: "x".into(),
            a: vec![1.5, -0.0, f64::MIN_POSITIVE],
            b: vec![std::f64::consts::PI],
        };
        let bytes = encode(&h).unwrap();
        let (version, meta, payload) = parse_container(&bytes).unwrap();
        assert_eq!(version, FORMAT_VERSION);
        assert_eq!(payload.len(), 4);
        let meta = std::str::from_utf8(meta).unwrap();
        assert!(meta.contains("\"offset\":3"), "{meta}");
        let back: Holder = decode(&bytes).unwrap();
        assert_eq!(back, h);
        assert!(back.a[1].is_sign_negative());
    }

    #[test]
    fn inline_json_still_works() {
        let h = Holder {
            name: "y".into(),
            a: vec![0.1],
            b: vec![],
        };
        let json = serde_json::to_string(&h).unwrap();
        assert!(json.contains("[0.1]"));
        let back: Holder = serde_json::from_str(&json).unwrap();
        assert_eq!(back, h);
    }

    #[test]
    fn rejects_bad_magic_version_and_truncation() {
        let h = Holder {
            name: "z".into(),
            a: vec![1.0, 2.0],
            b: vec![],
        };
        let mut bytes = encode(&h).unwrap();
        assert!(decode::<Holder>(&bytes[..bytes.len() - 3]).is_err());
        bytes[8] = 9;
        let err = decode::<Holder>(&bytes).unwrap_err();
        assert!(err.to_string().contains("unsupported archive version 9"));
        assert!(decode::<Holder>(b"garbage!garbage!").is_err());
    }
}
