use std::collections::{BTreeMap, HashMap};
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{ClassifierMode, ClassifierTrain, ExperimentConfig, Setting, Strategy, STANDARD_SHOTS};
use super::records::ResultRecord;
use super::run::{evaluate_cell, identity_outcome, wanted, CellEval, ClassifierOutcome, EvaluationResult, ExperimentData};
use crate::adapters::TrainConfig;
use crate::classify::{ClassifierKind, MlpConfig, SvmParams};
use crate::error::{Error, ErrorKind, Result};
use crate::veccore::fnv1a64;

/// The cross product of cells plus the settings shared by all of them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    /// Empty means every language in the store.
    pub languages: Vec<String>,
    pub shots: Vec<usize>,
    pub settings: Vec<Setting>,
    pub strategies: Vec<Strategy>,
    pub classifier: ClassifierMode,
    pub classifier_train: ClassifierTrain,
    /// Defaults to 0, or the smallest swept shot when 0 is not swept.
    pub selection_shot: Option<usize>,
    pub master_seed: u64,
    pub custom_shots: bool,
    pub train: TrainConfig,
    pub svm: SvmParams,
    pub mlp: MlpConfig,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            languages: Vec::new(),
            shots: STANDARD_SHOTS.to_vec(),
            settings: vec![Setting::Crosslingual, Setting::Lolo],
            strategies: vec![Strategy::Frozen, Strategy::ProjectionOnly],
            classifier: ClassifierMode::Auto,
            classifier_train: ClassifierTrain::Full,
            selection_shot: None,
            master_seed: 0,
            custom_shots: false,
            train: TrainConfig::default(),
            svm: SvmParams::default(),
            mlp: MlpConfig::default(),
        }
    }
}

impl SweepConfig {
    pub fn selection_shot(&self) -> Result<usize> {
        match self.selection_shot {
            Some(s) if self.shots.contains(&s) => Ok(s),
            Some(s) => Err(Error::InvalidConfig(format!("selection shot {s} is not among the swept shots"))),
            None if self.shots.contains(&0) => Ok(0),
            None => self
                .shots
                .iter()
                .copied()
                .min()
                .ok_or_else(|| Error::InvalidConfig("no shots to sweep".into())),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.shots.is_empty() || self.settings.is_empty() || self.strategies.is_empty() {
            return Err(Error::InvalidConfig("sweep axes must be non-empty".into()));
        }
        self.selection_shot()?;
        Ok(())
    }

    /// Languages to sweep, in store order.
    pub fn resolved_languages(&self, data: &ExperimentData) -> Result<Vec<String>> {
        let all = data.base().languages();
        if self.languages.is_empty() {
            return Ok(all.to_vec());
        }
        for l in &self.languages {
            data.base().language_index(l)?;
        }
        Ok(all.iter().filter(|l| self.languages.contains(l)).cloned().collect())
    }

    pub fn cell(&self, setting: Setting, language: &str, shot: usize, strategy: Strategy) -> Result<ExperimentConfig> {
        Ok(ExperimentConfig {
            setting,
            target_language: language.to_string(),
            shot,
            strategy,
            classifier: self.classifier,
            classifier_train: self.classifier_train,
            selection_shot: self.selection_shot()?,
            master_seed: self.master_seed,
            custom_shots: self.custom_shots,
            train: self.train.clone(),
            svm: self.svm.clone(),
            mlp: self.mlp.clone(),
        })
    }

    /// Cells in canonical order: setting, language, strategy, shot.
    pub fn cells(&self, data: &ExperimentData) -> Result<Vec<ExperimentConfig>> {
        self.validate()?;
        let mut shots = self.shots.clone();
        shots.sort_unstable();
        shots.dedup();
        let mut out = Vec::new();
        for &setting in &self.settings {
            for lang in self.resolved_languages(data)? {
                for &strategy in &self.strategies {
                    for &shot in &shots {
                        out.push(self.cell(setting, &lang, shot, strategy)?);
                    }
                }
            }
        }
        Ok(out)
    }

    /// FNV-1a over the fully resolved configuration.
    pub fn config_hash(&self) -> String {
        format!("{:016x}", fnv1a64(format!("{self:?}").as_bytes()))
    }
}

/// One sweep cell: its configuration and either a result or the error.
#[derive(Clone, Debug)]
pub struct CellResult {
    pub config: ExperimentConfig,
    pub outcome: std::result::Result<EvaluationResult, CellFailure>,
}

/// A failed cell's message and the class of its error.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CellFailure {
    pub message: String,
    pub kind: ErrorKind,
}

impl fmt::Display for CellFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<Error> for CellFailure {
    fn from(e: Error) -> Self {
        Self {
            message: e.to_string(),
            kind: e.kind(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct ResultTable {
    pub config_hash: String,
    pub store_hash: String,
    pub cells: Vec<CellResult>,
}

impl ResultTable {
    pub fn records(&self) -> Vec<ResultRecord> {
        self.cells
            .iter()
            .map(|c| ResultRecord::from_cell(c, &self.config_hash, &self.store_hash))
            .collect()
    }

    pub fn failures(&self) -> impl Iterator<Item = &CellResult> {
        self.cells.iter().filter(|c| c.outcome.is_err())
    }
}

fn pool(jobs: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))
}

/// Runs every cell on `jobs` threads. Each cell derives its own seeds, so
/// the table does not depend on `jobs` or scheduling order. Failed cells
/// are recorded rather than aborting the sweep.
pub fn sweep(cfg: &SweepConfig, data: &ExperimentData, jobs: usize) -> Result<ResultTable> {
    let cells = cfg.cells(data)?;
    let pool = pool(jobs)?;
    let want = wanted(cfg.classifier);

    // Frozen-embedding classifiers depend only on (setting, language).
    let mut shared: Vec<ExperimentConfig> = Vec::new();
    if cfg.classifier_train == ClassifierTrain::Full {
        let mut seen = std::collections::HashSet::new();
        for c in cells.iter().filter(|c| c.uses_identity()) {
            if seen.insert((c.setting, c.target_language.clone())) {
                shared.push(c.clone());
            }
        }
    }
    let cache: HashMap<(Setting, String), ClassifierOutcome> = pool.install(|| {
        shared
            .par_iter()
            .filter_map(|c| {
                identity_outcome(c, data)
                    .ok()
                    .map(|o| ((c.setting, c.target_language.clone()), o))
            })
            .collect()
    });

    let evals: Vec<Result<CellEval>> = pool.install(|| {
        cells
            .par_iter()
            .map(|c| evaluate_cell(c, data, want, cache.get(&(c.setting, c.target_language.clone()))))
            .collect()
    });

    let selection = cfg.selection_shot()?;
    let mut anchors: BTreeMap<(Setting, &str, Strategy), ClassifierKind> = BTreeMap::new();
    for e in evals.iter().flatten() {
        if e.config.shot == selection {
            if let Some(k) = e.outcome.preferred() {
                anchors.insert((e.config.setting, e.config.target_language.as_str(), e.config.strategy), k);
            }
        }
    }
    let anchors: BTreeMap<_, _> = anchors
        .into_iter()
        .map(|((s, l, st), k)| ((s, l.to_string(), st), k))
        .collect();

    let cells = cells
        .into_iter()
        .zip(evals)
        .map(|(config, eval)| {
            let outcome = eval.and_then(|e| {
                let chosen = match cfg.classifier {
                    ClassifierMode::Svm => ClassifierKind::Svm,
                    ClassifierMode::Mlp => ClassifierKind::Mlp,
                    ClassifierMode::Auto => anchors
                        .get(&(config.setting, config.target_language.clone(), config.strategy))
                        .copied()
                        .or_else(|| e.outcome.preferred())
                        .expect("auto trains both classifiers"),
                };
                e.resolve(chosen)
            });
            CellResult {
                config,
                outcome: outcome.map_err(CellFailure::from),
            }
        })
        .collect();

    Ok(ResultTable {
        config_hash: cfg.config_hash(),
        store_hash: data.store_hash().to_string(),
        cells,
    })
}
