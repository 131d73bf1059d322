use crate::datastore::EmbeddingStore;
use crate::error::{Error, Result};
use crate::veccore::{cosine_sim, l2_normalize};

/// Normalized text embedding standing in for one class.
#[derive(Clone, Debug, PartialEq)]
pub struct PromptPrototype {
    pub class_id: u8,
    pub text: String,
    pub embedding: Vec<f32>,
}

/// One prototype per class, indexed by class id.
#[derive(Clone, Debug, PartialEq)]
pub struct PrototypePair {
    pub prototypes: [PromptPrototype; 2],
}

impl PrototypePair {
    pub fn new(a: PromptPrototype, b: PromptPrototype) -> Result<Self> {
        let (zero, one) = match (a.class_id, b.class_id) {
            (0, 1) => (a, b),
            (1, 0) => (b, a),
            (x, y) => {
                return Err(Error::Malformed(format!(
                    "prototype pair needs classes 0 and 1, got {x} and {y}"
                )))
            }
        };
        if zero.embedding.len() != one.embedding.len() {
            return Err(Error::DimensionMismatch {
                expected: zero.embedding.len(),
                got: one.embedding.len(),
            });
        }
        let unit = |p: PromptPrototype| -> Result<PromptPrototype> {
            Ok(PromptPrototype {
                embedding: l2_normalize(&p.embedding)?,
                ..p
            })
        };
        Ok(Self {
            prototypes: [unit(zero)?, unit(one)?],
        })
    }

    /// Reads a prototype store: exactly one record per class, with prompt
    /// texts bound to class ids in the manifest.
    pub fn from_store(store: &EmbeddingStore) -> Result<Self> {
        let mut found: [Option<PromptPrototype>; 2] = [None, None];
        for r in store.records() {
            let slot = &mut found[r.label as usize];
            if slot.is_some() {
                return Err(Error::Malformed(format!("more than one prototype for class {}", r.label)));
            }
            *slot = Some(PromptPrototype {
                class_id: r.label,
                text: store.prompts().get(&r.label).cloned().unwrap_or_else(|| r.id.clone()),
                embedding: r.vector.clone(),
            });
        }
        match found {
            [Some(a), Some(b)] => Self::new(a, b),
            _ => Err(Error::Malformed("prototype store needs one record per class".into())),
        }
    }

    pub fn dim(&self) -> usize {
        self.prototypes[0].embedding.len()
    }
}

/// `argmax_c sim(z, p_c)`; exact ties go to class 0.
pub fn zero_shot_predict(z_audio: &[f32], prototypes: &PrototypePair) -> Result<u8> {
    if z_audio.len() != prototypes.dim() {
        return Err(Error::DimensionMismatch {
            expected: prototypes.dim(),
            got: z_audio.len(),
        });
    }
    let s0 = cosine_sim(z_audio, &prototypes.prototypes[0].embedding)?;
    let s1 = cosine_sim(z_audio, &prototypes.prototypes[1].embedding)?;
    Ok(if s1 > s0 { 1 } else { 0 })
}
