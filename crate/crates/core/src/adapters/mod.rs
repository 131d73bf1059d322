//! Projection-only adaptation: a small trainable head on top of frozen
//! embeddings, trained with the supervised contrastive loss.

mod head;
mod io;
mod optim;
mod train;

pub use head::{init_head, Activation, Layer, ProjectionHead};
pub use io::{decode_head, encode_head, read_head, write_head, HEAD_MAGIC};
pub use optim::{AdamW, AdamWConfig};
pub use train::{adapt_store, train_projection, BatchMode, TrainConfig, TrainReport};

use std::borrow::Cow;

use crate::datastore::EmbeddingStore;
use crate::error::Result;

/// The map applied to a store before classification. A zero-shot support
/// set yields [`Adapter::Identity`], i.e. the frozen embeddings.
#[derive(Clone, Debug, PartialEq)]
pub enum Adapter {
    Identity,
    Head(ProjectionHead),
}

impl Adapter {
    pub fn apply<'a>(&self, store: &'a EmbeddingStore) -> Result<Cow<'a, EmbeddingStore>> {
        match self {
            Adapter::Identity => Ok(Cow::Borrowed(store)),
            Adapter::Head(h) => Ok(Cow::Owned(adapt_store(h, store)?)),
        }
    }

    /// Maps one vector; the identity leaves it untouched.
    pub fn project(&self, v: &[f32]) -> Result<Vec<f32>> {
        match self {
            Adapter::Identity => Ok(v.to_vec()),
            Adapter::Head(h) => h.project(v),
        }
    }
}

/// Fits an adapter on a support set: identity when the support is empty,
/// otherwise a freshly initialized head trained with `cfg`.
pub fn fit_adapter(
    input_dim: usize,
    support_x: &[Vec<f32>],
    support_y: &[u8],
    cfg: &TrainConfig,
    init_seed: u64,
) -> Result<(Adapter, Option<TrainReport>)> {
    if support_x.is_empty() {
        return Ok((Adapter::Identity, None));
    }
    let hidden = cfg.hidden_dim.unwrap_or(input_dim);
    let head = init_head(input_dim, hidden, cfg.output_dim, init_seed)?;
    let (trained, report) = train_projection(&head, support_x, support_y, cfg)?;
    Ok((Adapter::Head(trained), Some(report)))
}
