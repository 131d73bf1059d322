//! The `CLAPEMB1` binary layout and its TOML sidecar manifest.
//!
//! Binary, all integers little-endian:
//!
//! ```text
//! magic    8 bytes   "CLAPEMB1"
//! dim      u32
//! count    u64
//! count x record:
//!   id_len   u16
//!   id       id_len bytes, UTF-8
//!   language u8      index into the manifest's `languages`
//!   split    u8      0 = train, 1 = test
//!   label    u8      0 = non-abusive, 1 = abusive
//!   vector   dim x f32
//! ```
//!
//! The sidecar lives next to the store at `<store path>.manifest.toml`:
//!
//! ```toml
//! format = "CLAPEMB1"
//! version = 1
//! dim = 512
//! count = 11775
//! store_hash = "9f0c..."            # FNV-1a 64 of the binary file, hex
//! languages = ["Bengali", "Hindi"]
//!
//! [prompts]                          # optional, prototype stores only
//! "0" = "This audio does not contain hate speech"
//! "1" = "This audio contains hate speech"
//!
//! [metadata]                         # optional free-form strings
//! checkpoint = "laion/clap-htsat-unfused"
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::store::{EmbeddingRecord, EmbeddingStore, Split};
use crate::error::{Error, Result};
use crate::veccore::fnv1a64;

pub const STORE_MAGIC: &[u8; 8] = b"CLAPEMB1";
pub const MANIFEST_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format: String,
    pub version: u32,
    pub dim: usize,
    pub count: u64,
    pub store_hash: String,
    pub languages: Vec<String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub prompts: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub metadata: BTreeMap<String, String>,
}

pub fn manifest_path(store_path: &Path) -> PathBuf {
    let mut s = store_path.as_os_str().to_owned();
    s.push(".manifest.toml");
    PathBuf::from(s)
}

pub fn encode(store: &EmbeddingStore) -> Result<Vec<u8>> {
    let dim = u32::try_from(store.dim()).map_err(|_| Error::InvalidDimension("dim exceeds u32".into()))?;
    let mut out = Vec::with_capacity(20 + store.len() * (8 + 4 * store.dim()));
    out.extend_from_slice(STORE_MAGIC);
    out.extend_from_slice(&dim.to_le_bytes());
    out.extend_from_slice(&(store.len() as u64).to_le_bytes());
    for r in store.records() {
        let id = r.id.as_bytes();
        let len = u16::try_from(id.len())
            .map_err(|_| Error::Malformed(format!("id of {} bytes is too long", id.len())))?;
        out.extend_from_slice(&len.to_le_bytes());
        out.extend_from_slice(id);
        out.push(r.language);
        out.push(r.split.code());
        out.push(r.label);
        for x in &r.vector {
            out.extend_from_slice(&x.to_le_bytes());
        }
    }
    Ok(out)
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(Error::TruncatedFile(format!("while reading {what} at byte {}", self.pos)));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self, what: &str) -> Result<u8> {
        Ok(self.take(1, what)?[0])
    }
}

/// Decodes a binary store, validating language indices against `languages`.
pub fn decode(bytes: &[u8], languages: Vec<String>) -> Result<EmbeddingStore> {
    let mut cur = Cursor { bytes, pos: 0 };
    let magic = cur.take(8, "magic").map_err(|_| Error::BadMagic { expected: "CLAPEMB1" })?;
    if magic != STORE_MAGIC {
        return Err(Error::BadMagic { expected: "CLAPEMB1" });
    }
    let dim = u32::from_le_bytes(cur.take(4, "dim")?.try_into().unwrap()) as usize;
    let count = u64::from_le_bytes(cur.take(8, "count")?.try_into().unwrap());
    let mut records = Vec::new();
    for _ in 0..count {
        let len = u16::from_le_bytes(cur.take(2, "id length")?.try_into().unwrap()) as usize;
        let id = std::str::from_utf8(cur.take(len, "id")?)
            .map_err(|e| Error::Malformed(format!("record id is not UTF-8: {e}")))?
            .to_string();
        let language = cur.u8("language")?;
        let split = Split::from_code(cur.u8("split")?)?;
        let label = cur.u8("label")?;
        let raw = cur.take(4 * dim, "vector")?;
        let vector = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        records.push(EmbeddingRecord {
            id,
            language,
            split,
            label,
            vector,
        });
    }
    if cur.pos != bytes.len() {
        return Err(Error::Malformed(format!(
            "{} trailing bytes after {count} records",
            bytes.len() - cur.pos
        )));
    }
    EmbeddingStore::new(dim, languages, records)
}

pub fn store_hash(bytes: &[u8]) -> String {
    format!("{:016x}", fnv1a64(bytes))
}

pub fn build_manifest(store: &EmbeddingStore, bytes: &[u8]) -> Manifest {
    Manifest {
        format: "CLAPEMB1".into(),
        version: MANIFEST_VERSION,
        dim: store.dim(),
        count: store.len() as u64,
        store_hash: store_hash(bytes),
        languages: store.languages().to_vec(),
        prompts: store.prompts().iter().map(|(k, v)| (k.to_string(), v.clone())).collect(),
        metadata: store.metadata().clone(),
    }
}

/// Writes the binary store and its sidecar manifest. Returns the store hash.
pub fn write_store(store: &EmbeddingStore, path: &Path) -> Result<String> {
    let bytes = encode(store)?;
    let manifest = build_manifest(store, &bytes);
    let text = toml::to_string(&manifest).map_err(|e| Error::Manifest(e.to_string()))?;
    fs::write(path, &bytes)?;
    fs::write(manifest_path(path), text)?;
    Ok(manifest.store_hash)
}

pub fn read_manifest(path: &Path) -> Result<Manifest> {
    let mpath = manifest_path(path);
    let text = fs::read_to_string(&mpath)
        .map_err(|e| Error::Manifest(format!("cannot read {}: {e}", mpath.display())))?;
    let m: Manifest = toml::from_str(&text).map_err(|e| Error::Manifest(e.to_string()))?;
    if m.format != "CLAPEMB1" {
        return Err(Error::Manifest(format!("unsupported format {:?}", m.format)));
    }
    if m.version != MANIFEST_VERSION {
        return Err(Error::Manifest(format!("unsupported version {}", m.version)));
    }
    Ok(m)
}

/// Reads and validates a store plus its manifest. Returns the store and its
/// content hash.
pub fn read_store_with_hash(path: &Path) -> Result<(EmbeddingStore, String)> {
    let bytes = fs::read(path)?;
    let manifest = read_manifest(path)?;
    let mut store = decode(&bytes, manifest.languages.clone())?;
    if store.dim() != manifest.dim || store.len() as u64 != manifest.count {
        return Err(Error::Manifest(format!(
            "manifest declares dim {} count {}, file has dim {} count {}",
            manifest.dim,
            manifest.count,
            store.dim(),
            store.len()
        )));
    }
    let hash = store_hash(&bytes);
    if hash != manifest.store_hash {
        return Err(Error::Manifest(format!(
            "store hash {hash} does not match manifest {}",
            manifest.store_hash
        )));
    }
    let prompts = manifest
        .prompts
        .iter()
        .map(|(k, v)| {
            let class = k
                .parse::<u8>()
                .ok()
                .filter(|c| *c <= 1)
                .ok_or_else(|| Error::Manifest(format!("prompt key {k:?} is not a class id")))?;
            Ok((class, v.clone()))
        })
        .collect::<Result<BTreeMap<_, _>>>()?;
    store = store.with_prompts(prompts);
    store.set_metadata(manifest.metadata);
    Ok((store, hash))
}

pub fn read_store(path: &Path) -> Result<EmbeddingStore> {
    Ok(read_store_with_hash(path)?.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> EmbeddingStore {
        EmbeddingStore::new(
            2,
            vec!["Hindi".into(), "Tamil".into()],
            vec![
                EmbeddingRecord {
                    id: "a".into(),
                    language: 0,
                    split: Split::Train,
                    label: 1,
                    vector: vec![0.6, 0.8],
                },
                EmbeddingRecord {
                    id: "b".into(),
                    language: 1,
                    split: Split::Test,
                    label: 0,
                    vector: vec![-1.0, 0.0],
                },
            ],
        )
        .unwrap()
    }

    #[test]
    fn layout_is_bit_exact() {
        let bytes = encode(&tiny()).unwrap();
        assert_eq!(&bytes[..8], b"CLAPEMB1");
        assert_eq!(&bytes[8..12], &2u32.to_le_bytes());
        assert_eq!(&bytes[12..20], &2u64.to_le_bytes());
        assert_eq!(&bytes[20..22], &1u16.to_le_bytes());
        assert_eq!(bytes[22], b'a');
        assert_eq!(&bytes[23..26], &[0, 0, 1]);
        assert_eq!(&bytes[26..30], &0.6f32.to_le_bytes());
        assert_eq!(bytes.len(), 20 + 2 * (2 + 1 + 3 + 8));
    }

    #[test]
    fn bad_magic() {
        let mut bytes = encode(&tiny()).unwrap();
        bytes[..8].copy_from_slice(b"XXXXXXXX");
        assert!(matches!(decode(&bytes, vec![]), Err(Error::BadMagic { .. })));
        assert!(matches!(decode(b"CLAP", vec![]), Err(Error::BadMagic { .. })));
    }

    #[test]
    fn truncation_and_trailing_bytes() {
        let langs = vec!["Hindi".to_string(), "Tamil".to_string()];
        let bytes = encode(&tiny()).unwrap();
        for cut in [12, 20, 25, bytes.len() - 1] {
            assert!(
                matches!(decode(&bytes[..cut], langs.clone()), Err(Error::TruncatedFile(_))),
                "cut {cut}"
            );
        }
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(matches!(decode(&extra, langs), Err(Error::Malformed(_))));
    }

    #[test]
    fn duplicate_ids_rejected() {
        let mut bytes = encode(&tiny()).unwrap();
        // rename "b" to "a"
        let pos = bytes.iter().rposition(|&b| b == b'b').unwrap();
        bytes[pos] = b'a';
        assert!(matches!(
            decode(&bytes, vec!["Hindi".into(), "Tamil".into()]),
            Err(Error::DuplicateId(_))
        ));
    }

    #[test]
    fn language_index_out_of_table() {
        let bytes = encode(&tiny()).unwrap();
        assert!(matches!(decode(&bytes, vec!["Hindi".into()]), Err(Error::Malformed(_))));
    }

    #[test]
    fn file_round_trip_with_prompts() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.emb");
        let mut prompts = BTreeMap::new();
        prompts.insert(0, "This audio does not contain hate speech".to_string());
        prompts.insert(1, "This audio contains hate speech".to_string());
        let store = tiny().with_prompts(prompts).with_metadata("source", "unit");
        let hash = write_store(&store, &path).unwrap();
        let (back, h2) = read_store_with_hash(&path).unwrap();
        assert_eq!(back, store);
        assert_eq!(hash, h2);
    }

    #[test]
    fn empty_store_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("e.emb");
        let store = EmbeddingStore::new(512, vec![], vec![]).unwrap();
        write_store(&store, &path).unwrap();
        assert_eq!(read_store(&path).unwrap(), store);
    }

    #[test]
    fn tampered_store_fails_hash_check() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.emb");
        write_store(&tiny(), &path).unwrap();
        let mut bytes = fs::read(&path).unwrap();
        let n = bytes.len();
        bytes[n - 1] ^= 1;
        fs::write(&path, bytes).unwrap();
        assert!(matches!(read_store(&path), Err(Error::Manifest(_))));
    }
}
