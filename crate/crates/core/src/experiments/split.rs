use std::collections::BTreeSet;

use super::config::{ExperimentConfig, Setting};
use crate::datastore::{sample_support, EmbeddingStore, Split, SupportSet};
use crate::error::{Error, Result, Stage};

/// Record positions for one experiment. Support positions are a subset of
/// the train positions.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SplitPlan {
    pub setting: Setting,
    pub target_language: String,
    pub train: Vec<usize>,
    pub test: Vec<usize>,
    pub support: Vec<usize>,
    /// Languages whose train records feed the classifiers and the support.
    pub train_languages: BTreeSet<String>,
}

/// Monolingual trains on the target only, cross-lingual on every language,
/// leave-one-language-out on every language but the target. The test side
/// is always the target's test split.
pub fn build_split(setting: Setting, target_language: &str, store: &EmbeddingStore) -> Result<SplitPlan> {
    let target = store.language_index(target_language)?;
    let keep = |lang: u8| match setting {
        Setting::Monolingual => lang == target,
        Setting::Crosslingual => true,
        Setting::Lolo => lang != target,
    };
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (i, r) in store.records().iter().enumerate() {
        match r.split {
            Split::Train if keep(r.language) => train.push(i),
            Split::Test if r.language == target => test.push(i),
            _ => {}
        }
    }
    if train.is_empty() {
        return Err(Error::EmptySplit(format!("{setting} train side for {target_language}")));
    }
    if test.is_empty() {
        return Err(Error::EmptySplit(format!("{target_language} has no test records")));
    }
    let train_languages = store
        .languages()
        .iter()
        .enumerate()
        .filter(|(i, _)| keep(*i as u8))
        .map(|(_, l)| l.clone())
        .collect();
    Ok(SplitPlan {
        setting,
        target_language: target_language.to_string(),
        train,
        test,
        support: Vec::new(),
        train_languages,
    })
}

/// Split plus the k-shot support drawn from the train languages.
pub fn plan_experiment(cfg: &ExperimentConfig, store: &EmbeddingStore) -> Result<(SplitPlan, SupportSet)> {
    let mut plan = build_split(cfg.setting, &cfg.target_language, store).map_err(Error::at(Stage::Split))?;
    let support = sample_support(store, cfg.shot, cfg.support_seed(), &plan.train_languages)
        .map_err(Error::at(Stage::Support))?;
    plan.support = support
        .ids()
        .map(|id| store.position(id).expect("sampled ids come from the store"))
        .collect();
    plan.support.sort_unstable();
    Ok((plan, support))
}

impl SplitPlan {
    fn ids<'a>(store: &'a EmbeddingStore, idx: &[usize]) -> BTreeSet<&'a str> {
        idx.iter().map(|&i| store.records()[i].id.as_str()).collect()
    }

    pub fn train_ids<'a>(&self, store: &'a EmbeddingStore) -> BTreeSet<&'a str> {
        Self::ids(store, &self.train)
    }

    pub fn test_ids<'a>(&self, store: &'a EmbeddingStore) -> BTreeSet<&'a str> {
        Self::ids(store, &self.test)
    }

    pub fn support_ids<'a>(&self, store: &'a EmbeddingStore) -> BTreeSet<&'a str> {
        Self::ids(store, &self.support)
    }

    /// Train and test are disjoint, support lies inside train, and under
    /// leave-one-language-out nothing on the train side carries the target.
    pub fn check_leakage(&self, store: &EmbeddingStore) -> Result<()> {
        let train = self.train_ids(store);
        let test = self.test_ids(store);
        let support = self.support_ids(store);
        if let Some(id) = train.intersection(&test).next() {
            return Err(Error::Leakage(format!("{id} is in both train and test")));
        }
        if let Some(id) = support.difference(&train).next() {
            return Err(Error::Leakage(format!("support id {id} is not a train id")));
        }
        if let Some(id) = support.intersection(&test).next() {
            return Err(Error::Leakage(format!("support id {id} is a test id")));
        }
        for &i in &self.test {
            let r = &store.records()[i];
            if r.split != Split::Test || store.language_name(r) != self.target_language {
                return Err(Error::Leakage(format!("test id {} is not a target test record", r.id)));
            }
        }
        if self.setting == Setting::Lolo {
            for &i in self.train.iter().chain(&self.support) {
                let r = &store.records()[i];
                if store.language_name(r) == self.target_language {
                    return Err(Error::Leakage(format!("target-language id {} on the train side", r.id)));
                }
            }
        }
        Ok(())
    }
}
