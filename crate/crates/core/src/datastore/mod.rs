//! Embedding persistence, few-shot support sampling and synthetic data.

mod format;
mod store;
mod support;
mod synth;

pub use format::{
    build_manifest, decode, encode, manifest_path, read_manifest, read_store, read_store_with_hash,
    store_hash, write_store, Manifest, STORE_MAGIC,
};
pub use store::{EmbeddingRecord, EmbeddingStore, Split};
pub use support::{sample_support, Clamp, SupportSet};
pub use synth::{make_synthetic, synthetic_draw, synthetic_prototypes, RawSample, SyntheticDraw, SyntheticSpec};
