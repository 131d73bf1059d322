//! Gaussian-cluster embedding stores for desk-scale verification.
//!
//! Each (language, class) cluster is an isotropic unit-variance Gaussian in
//! `dim` dimensions around `offset[language] + sign(class) * separation/2 * e`,
//! where `e` is a random unit direction shared by all languages and each
//! language offset is a random unit direction orthogonal to `e`, scaled by
//! `language_offset_scale`. Vectors are L2-normalized on output.

use serde::{Deserialize, Serialize};

use super::store::{EmbeddingRecord, EmbeddingStore, Split};
use crate::error::{Error, Result};
use crate::veccore::{l2_normalize, Rng};

const LANGUAGE_NAMES: [&str; 10] = [
    "Bengali",
    "Bhojpuri",
    "Gujarati",
    "Haryanvi",
    "Hindi",
    "Kannada",
    "Malayalam",
    "Odia",
    "Punjabi",
    "Tamil",
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticSpec {
    pub languages: usize,
    pub dim: usize,
    pub per_class_train: usize,
    pub per_class_test: usize,
    /// Distance between class means, in within-cluster standard deviations.
    pub class_separation: f64,
    pub language_offset_scale: f64,
    pub label_noise: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            languages: 10,
            dim: 16,
            per_class_train: 40,
            per_class_test: 40,
            class_separation: 2.0,
            language_offset_scale: 1.0,
            label_noise: 0.0,
            seed: 0,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidSpec(m.to_string()));
        if self.dim < 2 {
            return bad("dim must be at least 2");
        }
        if self.languages == 0 || self.languages > 256 {
            return bad("languages must be in 1..=256");
        }
        if self.per_class_train == 0 || self.per_class_test == 0 {
            return bad("per-class counts must be at least 1");
        }
        if !(self.class_separation >= 0.0 && self.class_separation.is_finite()) {
            return bad("class_separation must be finite and non-negative");
        }
        if !(self.language_offset_scale >= 0.0 && self.language_offset_scale.is_finite()) {
            return bad("language_offset_scale must be finite and non-negative");
        }
        if !(0.0..1.0).contains(&self.label_noise) {
            return bad("label_noise must be in [0, 1)");
        }
        Ok(())
    }

    pub fn language_names(&self) -> Vec<String> {
        if self.languages <= LANGUAGE_NAMES.len() {
            LANGUAGE_NAMES[..self.languages].iter().map(|s| s.to_string()).collect()
        } else {
            (0..self.languages).map(|i| format!("lang{i:03}")).collect()
        }
    }
}

/// Pre-normalization draw, exposed for checking the generator itself.
#[derive(Clone, Debug)]
pub struct SyntheticDraw {
    pub class_direction: Vec<f64>,
    /// `means[language][class]`
    pub means: Vec<[Vec<f64>; 2]>,
    /// Raw samples with their generating (language, class) cluster.
    pub samples: Vec<RawSample>,
}

#[derive(Clone, Debug)]
pub struct RawSample {
    pub id: String,
    pub language: u8,
    pub cluster_class: u8,
    pub label: u8,
    pub split: Split,
    pub vector: Vec<f64>,
}

fn random_unit(rng: &mut Rng, dim: usize, orthogonal_to: Option<&[f64]>) -> Vec<f64> {
    loop {
        let mut v: Vec<f64> = (0..dim).map(|_| rng.normal()).collect();
        if let Some(e) = orthogonal_to {
            let p: f64 = v.iter().zip(e).map(|(a, b)| a * b).sum();
            v.iter_mut().zip(e).for_each(|(a, b)| *a -= p * b);
        }
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-6 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

/// Whether the `i`-th of `total` cluster members goes to the test split.
/// Spreads `n_test` test members evenly through the cluster.
fn is_test(i: usize, n_test: usize, total: usize) -> bool {
    (i + 1) * n_test / total > i * n_test / total
}

pub fn synthetic_draw(spec: &SyntheticSpec) -> Result<SyntheticDraw> {
    spec.validate()?;
    let mut rng = Rng::derived(spec.seed, "synthetic");
    let dim = spec.dim;
    let e = random_unit(&mut rng, dim, None);
    let half = spec.class_separation / 2.0;

    let mut means = Vec::with_capacity(spec.languages);
    for _ in 0..spec.languages {
        let g = random_unit(&mut rng, dim, Some(&e));
        let offset: Vec<f64> = g.iter().map(|x| x * spec.language_offset_scale).collect();
        let mean = |sign: f64| -> Vec<f64> {
            offset.iter().zip(&e).map(|(o, d)| o + sign * half * d).collect()
        };
        means.push([mean(-1.0), mean(1.0)]);
    }

    let names = spec.language_names();
    let total = spec.per_class_train + spec.per_class_test;
    let mut samples = Vec::with_capacity(spec.languages * 2 * total);
    for (lang, name) in names.iter().enumerate() {
        for class in 0..=1u8 {
            for i in 0..total {
                let vector: Vec<f64> = means[lang][class as usize]
                    .iter()
                    .map(|m| m + rng.normal())
                    .collect();
                let flip = rng.next_f64() < spec.label_noise;
                samples.push(RawSample {
                    id: format!("{name}-{class}-{i:04}"),
                    language: lang as u8,
                    cluster_class: class,
                    label: if flip { 1 - class } else { class },
                    split: if is_test(i, spec.per_class_test, total) {
                        Split::Test
                    } else {
                        Split::Train
                    },
                    vector,
                });
            }
        }
    }
    Ok(SyntheticDraw {
        class_direction: e,
        means,
        samples,
    })
}

pub fn make_synthetic(spec: &SyntheticSpec) -> Result<EmbeddingStore> {
    let draw = synthetic_draw(spec)?;
    let records = draw
        .samples
        .into_iter()
        .map(|s| {
            let raw: Vec<f32> = s.vector.iter().map(|&x| x as f32).collect();
            Ok(EmbeddingRecord {
                id: s.id,
                language: s.language,
                split: s.split,
                label: s.label,
                vector: l2_normalize(&raw)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    EmbeddingStore::new(spec.dim, spec.language_names(), records)
}

/// Prompt-prototype store matching a synthetic spec: class `c` is represented
/// by the unit vector `±e` pointing at its side of the class axis.
pub fn synthetic_prototypes(spec: &SyntheticSpec) -> Result<EmbeddingStore> {
    let draw = synthetic_draw(spec)?;
    let records = (0..=1u8)
        .map(|class| {
            let sign = if class == 1 { 1.0 } else { -1.0 };
            let v: Vec<f32> = draw.class_direction.iter().map(|x| (sign * x) as f32).collect();
            Ok(EmbeddingRecord {
                id: format!("prompt-{class}"),
                language: 0,
                split: Split::Train,
                label: class,
                vector: l2_normalize(&v)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let prompts = [
        (0u8, "This audio does not contain hate speech".to_string()),
        (1u8, "This audio contains hate speech".to_string()),
    ]
    .into();
    Ok(EmbeddingStore::new(spec.dim, vec!["prompt".into()], records)?.with_prompts(prompts))
}
