use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::store::{EmbeddingStore, Split};
use crate::error::{Error, Result};
use crate::veccore::Rng;

/// A (language, class) cell that had fewer than `k` train examples.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Clamp {
    pub language: String,
    pub class: u8,
    pub available: usize,
}

/// `k` train-split examples per class per language.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SupportSet {
    pub k: usize,
    pub seed: u64,
    /// language -> class -> record ids, in store order.
    pub selections: BTreeMap<String, BTreeMap<u8, Vec<String>>>,
    pub clamped: Vec<Clamp>,
}

impl SupportSet {
    pub fn empty(seed: u64) -> Self {
        Self {
            k: 0,
            seed,
            selections: BTreeMap::new(),
            clamped: Vec::new(),
        }
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.selections
            .values()
            .flat_map(|by_class| by_class.values())
            .flatten()
            .map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.ids().count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Embeddings and labels of the selected records, in selection order.
    pub fn gather(&self, store: &EmbeddingStore) -> Result<(Vec<Vec<f32>>, Vec<u8>)> {
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for id in self.ids() {
            let r = store
                .get(id)
                .ok_or_else(|| Error::Malformed(format!("support id {id:?} missing from store")))?;
            xs.push(r.vector.clone());
            ys.push(r.label);
        }
        Ok((xs, ys))
    }
}

/// Samples `k` train records per class for each of `languages`, uniformly and
/// without replacement.
///
/// Each (language, class) cell draws from its own stream derived from `seed`
/// and the cell name, so the selection for one language does not depend on
/// which other languages are requested. Cells with fewer than `k` eligible
/// records contribute all of them and are listed in `clamped`.
pub fn sample_support(
    store: &EmbeddingStore,
    k: usize,
    seed: u64,
    languages: &BTreeSet<String>,
) -> Result<SupportSet> {
    let mut indices = Vec::with_capacity(languages.len());
    for name in languages {
        indices.push((name.clone(), store.language_index(name)?));
    }
    let mut set = SupportSet {
        k,
        ..SupportSet::empty(seed)
    };
    if k == 0 {
        return Ok(set);
    }
    for (name, lang) in indices {
        let mut by_class = BTreeMap::new();
        for class in 0..=1u8 {
            let eligible: Vec<usize> = store
                .records()
                .iter()
                .enumerate()
                .filter(|(_, r)| r.split == Split::Train && r.language == lang && r.label == class)
                .map(|(i, _)| i)
                .collect();
            let mut chosen: Vec<usize> = if eligible.len() <= k {
                if eligible.len() < k {
                    set.clamped.push(Clamp {
                        language: name.clone(),
                        class,
                        available: eligible.len(),
                    });
                }
                eligible
            } else {
                let mut rng = Rng::derived(seed, &format!("support/{name}/{class}"));
                rng.sample_indices(eligible.len(), k)
                    .into_iter()
                    .map(|j| eligible[j])
                    .collect()
            };
            chosen.sort_unstable();
            by_class.insert(
                class,
                chosen.into_iter().map(|i| store.records()[i].id.clone()).collect(),
            );
        }
        set.selections.insert(name, by_class);
    }
    Ok(set)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datastore::{make_synthetic, SyntheticSpec};

    fn store() -> EmbeddingStore {
        make_synthetic(&SyntheticSpec {
            languages: 10,
            dim: 4,
            per_class_train: 6,
            per_class_test: 3,
            ..SyntheticSpec::default()
        })
        .unwrap()
    }

    fn all_languages(s: &EmbeddingStore) -> BTreeSet<String> {
        s.languages().iter().cloned().collect()
    }

    #[test]
    fn zero_shot_support_is_empty() {
        let s = store();
        let set = sample_support(&s, 0, 1, &all_languages(&s)).unwrap();
        assert!(set.selections.is_empty());
        assert!(set.is_empty());
    }

    #[test]
    fn one_shot_ten_languages_gives_twenty() {
        let s = store();
        let set = sample_support(&s, 1, 1, &all_languages(&s)).unwrap();
        assert_eq!(set.len(), 20);
        assert!(set.clamped.is_empty());
    }

    #[test]
    fn deterministic_and_train_only() {
        let s = store();
        let langs = all_languages(&s);
        let a = sample_support(&s, 3, 9, &langs).unwrap();
        assert_eq!(a, sample_support(&s, 3, 9, &langs).unwrap());
        assert_ne!(a, sample_support(&s, 3, 10, &langs).unwrap());
        for id in a.ids() {
            assert_eq!(s.get(id).unwrap().split, Split::Train);
        }
        let mut ids: Vec<&str> = a.ids().collect();
        ids.sort_unstable();
        ids.dedup();
        assert_eq!(ids.len(), a.len());
    }

    #[test]
    fn selection_independent_of_other_languages() {
        let s = store();
        let all = sample_support(&s, 2, 5, &all_languages(&s)).unwrap();
        let one: BTreeSet<String> = [s.languages()[3].clone()].into();
        let single = sample_support(&s, 2, 5, &one).unwrap();
        assert_eq!(single.selections[&s.languages()[3]], all.selections[&s.languages()[3]]);
    }

    #[test]
    fn clamps_when_short() {
        let s = store();
        let langs = all_languages(&s);
        let set = sample_support(&s, 50, 1, &langs).unwrap();
        assert_eq!(set.len(), 10 * 2 * 6);
        assert_eq!(set.clamped.len(), 20);
        assert!(set.clamped.iter().all(|c| c.available == 6));
    }

    #[test]
    fn unknown_language() {
        let s = store();
        let langs: BTreeSet<String> = ["Klingon".to_string()].into();
        assert!(matches!(sample_support(&s, 1, 1, &langs), Err(Error::UnknownLanguage(_))));
    }
}
