use std::borrow::Cow;
use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use super::config::{ClassifierMode, ClassifierTrain, ExperimentConfig, Setting, Strategy};
use super::metrics::Metrics;
use super::split::{plan_experiment, SplitPlan};
use crate::adapters::{fit_adapter, Adapter, TrainReport};
use crate::classify::{
    prefer, train_mlp, train_svm, zero_shot_predict, Classifier, ClassifierKind, MlpConfig, PrototypePair,
};
use crate::datastore::{encode, store_hash, Clamp, EmbeddingStore, Split, SupportSet};
use crate::error::{Error, Result, Stage};
use crate::veccore::{derive_seed, fnv1a64};

/// The base store plus any externally fine-tuned stores.
#[derive(Clone, Debug)]
pub struct ExperimentData {
    base: EmbeddingStore,
    base_hash: String,
    /// Keyed by shot and, for leave-one-language-out, the held-out language.
    ft: BTreeMap<(usize, Option<String>), EmbeddingStore>,
}

impl ExperimentData {
    pub fn new(base: EmbeddingStore) -> Result<Self> {
        let hash = store_hash(&encode(&base)?);
        Ok(Self::with_hash(base, hash))
    }

    pub fn with_hash(base: EmbeddingStore, base_hash: String) -> Self {
        Self {
            base,
            base_hash,
            ft: BTreeMap::new(),
        }
    }

    pub fn base(&self) -> &EmbeddingStore {
        &self.base
    }

    pub fn store_hash(&self) -> &str {
        &self.base_hash
    }

    /// Registers a fine-tuned store for `shot`. Stores adapted without a
    /// language serve leave-one-language-out cells for that language.
    pub fn add_ft_store(&mut self, shot: usize, held_out: Option<String>, store: EmbeddingStore) -> Result<()> {
        if shot == 0 {
            return Err(Error::InvalidConfig("a 0-shot fine-tuned store is the base store".into()));
        }
        if !self.base.same_layout(&store) {
            return Err(Error::Malformed(format!(
                "fine-tuned store for shot {shot} does not match the base store's records"
            )));
        }
        if let Some(lang) = &held_out {
            self.base.language_index(lang)?;
        }
        self.ft.insert((shot, held_out), store);
        Ok(())
    }

    pub fn ft_keys(&self) -> impl Iterator<Item = &(usize, Option<String>)> {
        self.ft.keys()
    }

    /// The external store serving a projection_ft cell.
    pub fn ft_store(&self, cfg: &ExperimentConfig) -> Result<&EmbeddingStore> {
        let held_out = (cfg.setting == Setting::Lolo).then(|| cfg.target_language.clone());
        self.ft.get(&(cfg.shot, held_out.clone())).ok_or_else(|| {
            Error::InvalidConfig(match held_out {
                Some(l) => format!("no fine-tuned store for shot {} adapted without {l}", cfg.shot),
                None => format!("no fine-tuned store for shot {}", cfg.shot),
            })
        })
    }
}

/// How the embeddings were transformed before classification.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AdaptationKind {
    Identity,
    Head,
    /// The support had no two samples of one class, so no head was trained.
    SkippedNoPositives,
    External,
}

impl AdaptationKind {
    pub fn as_str(self) -> &'static str {
        match self {
            AdaptationKind::Identity => "identity",
            AdaptationKind::Head => "head",
            AdaptationKind::SkippedNoPositives => "skipped_no_positives",
            AdaptationKind::External => "external",
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Timings {
    pub adaptation: Duration,
    pub classifiers: Duration,
    pub total: Duration,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SvmOutcome {
    pub metrics: Metrics,
    pub converged: bool,
}

/// Scores of whichever classifiers were trained for a cell.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ClassifierOutcome {
    pub svm: Option<SvmOutcome>,
    pub mlp: Option<Metrics>,
}

impl ClassifierOutcome {
    pub fn metrics(&self, kind: ClassifierKind) -> Option<Metrics> {
        match kind {
            ClassifierKind::Svm => self.svm.map(|s| s.metrics),
            ClassifierKind::Mlp => self.mlp,
        }
    }

    /// The local choice: the only classifier trained, or the better one.
    pub fn preferred(&self) -> Option<ClassifierKind> {
        match (self.svm, self.mlp) {
            (Some(s), Some(m)) => Some(prefer(s.metrics.macro_f1, m.macro_f1)),
            (Some(_), None) => Some(ClassifierKind::Svm),
            (None, Some(_)) => Some(ClassifierKind::Mlp),
            (None, None) => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvaluationResult {
    pub config: ExperimentConfig,
    pub chosen_classifier: ClassifierKind,
    pub macro_f1: f64,
    pub accuracy: f64,
    pub per_class_f1: [f64; 2],
    pub classifiers: ClassifierOutcome,
    pub adaptation: AdaptationKind,
    pub adaptation_loss: Option<f64>,
    pub support_clamps: Vec<Clamp>,
    pub n_train: usize,
    pub n_test: usize,
    pub n_support: usize,
    /// FNV-1a over the ordered test ids.
    pub test_fingerprint: u64,
    pub timings: Timings,
}

/// A cell evaluated before the classifier choice is fixed.
#[derive(Clone, Debug)]
pub(crate) struct CellEval {
    pub config: ExperimentConfig,
    pub outcome: ClassifierOutcome,
    pub adaptation: AdaptationKind,
    pub adaptation_loss: Option<f64>,
    pub support_clamps: Vec<Clamp>,
    pub n_train: usize,
    pub n_test: usize,
    pub n_support: usize,
    pub test_fingerprint: u64,
    pub timings: Timings,
}

impl CellEval {
    pub(crate) fn resolve(self, chosen: ClassifierKind) -> Result<EvaluationResult> {
        let m = self.outcome.metrics(chosen).ok_or_else(|| {
            Error::InvalidConfig(format!("classifier {chosen} was not trained for this cell"))
        })?;
        Ok(EvaluationResult {
            config: self.config,
            chosen_classifier: chosen,
            macro_f1: m.macro_f1,
            accuracy: m.accuracy,
            per_class_f1: m.per_class_f1,
            classifiers: self.outcome,
            adaptation: self.adaptation,
            adaptation_loss: self.adaptation_loss,
            support_clamps: self.support_clamps,
            n_train: self.n_train,
            n_test: self.n_test,
            n_support: self.n_support,
            test_fingerprint: self.test_fingerprint,
            timings: self.timings,
        })
    }
}

/// Which classifiers a mode trains: (svm, mlp).
pub(crate) fn wanted(mode: ClassifierMode) -> (bool, bool) {
    match mode {
        ClassifierMode::Svm => (true, false),
        ClassifierMode::Mlp => (false, true),
        ClassifierMode::Auto => (true, true),
    }
}

/// A cell's embeddings: a source store and the map applied to it.
pub struct Adaptation<'a> {
    pub source: &'a EmbeddingStore,
    pub kind: AdaptationKind,
    pub adapter: Adapter,
    pub report: Option<TrainReport>,
}

impl Adaptation<'_> {
    /// Adapted vectors and labels of the records at `positions`.
    pub fn gather(&self, positions: &[usize]) -> Result<(Vec<Vec<f32>>, Vec<u8>)> {
        positions
            .iter()
            .map(|&i| {
                let r = &self.source.records()[i];
                Ok((self.adapter.project(&r.vector)?, r.label))
            })
            .collect::<Result<Vec<_>>>()
            .map(|v| v.into_iter().unzip())
    }

    /// The whole adapted store.
    pub fn store(&self) -> Result<Cow<'_, EmbeddingStore>> {
        self.adapter.apply(self.source)
    }
}

fn has_positive_pair(labels: &[u8]) -> bool {
    let ones = labels.iter().filter(|&&l| l == 1).count();
    ones >= 2 || labels.len() - ones >= 2
}

/// Applies the cell's strategy to the base store.
pub fn adapt<'a>(
    cfg: &ExperimentConfig,
    data: &'a ExperimentData,
    support: &SupportSet,
) -> Result<Adaptation<'a>> {
    let base = data.base();
    let identity = |kind| Adaptation {
        source: base,
        kind,
        adapter: Adapter::Identity,
        report: None,
    };
    if cfg.uses_identity() {
        return Ok(identity(AdaptationKind::Identity));
    }
    match cfg.strategy {
        Strategy::Frozen => unreachable!("frozen cells use the identity"),
        Strategy::ProjectionFt => Ok(Adaptation {
            source: data.ft_store(cfg)?,
            kind: AdaptationKind::External,
            adapter: Adapter::Identity,
            report: None,
        }),
        Strategy::ProjectionOnly => {
            let (xs, ys) = support.gather(base)?;
            if !has_positive_pair(&ys) {
                return Ok(identity(AdaptationKind::SkippedNoPositives));
            }
            let mut train = cfg.train.clone();
            train.seed = cfg.batch_seed();
            let (adapter, report) = fit_adapter(base.dim(), &xs, &ys, &train, cfg.head_seed())?;
            Ok(Adaptation {
                source: base,
                kind: AdaptationKind::Head,
                adapter,
                report,
            })
        }
    }
}

pub(crate) fn test_fingerprint(store: &EmbeddingStore, plan: &SplitPlan) -> u64 {
    let mut joined = String::new();
    for &i in &plan.test {
        joined.push_str(&store.records()[i].id);
        joined.push('\n');
    }
    fnv1a64(joined.as_bytes())
}

/// Trains the requested classifiers on the plan's training side and scores
/// them on its test side.
fn classify(
    cfg: &ExperimentConfig,
    adapted: &Adaptation<'_>,
    plan: &SplitPlan,
    (want_svm, want_mlp): (bool, bool),
) -> Result<ClassifierOutcome> {
    let train_idx = match cfg.classifier_train {
        ClassifierTrain::Full => &plan.train,
        ClassifierTrain::Support => &plan.support,
    };
    if train_idx.is_empty() {
        return Err(Error::EmptySplit(format!(
            "no {} records to train classifiers",
            cfg.classifier_train
        )))
        .map_err(Error::at(Stage::Classifier));
    }
    let (xs, ys) = adapted.gather(train_idx).map_err(Error::at(Stage::Adaptation))?;
    let (tx, ty) = adapted.gather(&plan.test).map_err(Error::at(Stage::Adaptation))?;
    let score = |model: &Classifier| -> Result<Metrics> {
        let preds = tx.iter().map(|x| model.predict(x)).collect::<Result<Vec<u8>>>()?;
        Metrics::compute(&preds, &ty)
    };
    let mut out = ClassifierOutcome::default();
    if want_svm {
        let m = train_svm(&xs, &ys, &cfg.svm).map_err(Error::at(Stage::Classifier))?;
        let converged = m.converged;
        let metrics = score(&Classifier::Svm(m)).map_err(Error::at(Stage::Evaluation))?;
        out.svm = Some(SvmOutcome { metrics, converged });
    }
    if want_mlp {
        let mlp_cfg = MlpConfig {
            seed: derive_seed(cfg.classifier_seed(), "mlp"),
            ..cfg.mlp.clone()
        };
        let m = train_mlp(&xs, &ys, &mlp_cfg).map_err(Error::at(Stage::Classifier))?;
        out.mlp = Some(score(&Classifier::Mlp(m)).map_err(Error::at(Stage::Evaluation))?);
    }
    Ok(out)
}

/// Runs one cell. `cached` supplies classifier scores for identity cells
/// whose classifiers were already trained on the same embeddings.
pub(crate) fn evaluate_cell(
    cfg: &ExperimentConfig,
    data: &ExperimentData,
    want: (bool, bool),
    cached: Option<&ClassifierOutcome>,
) -> Result<CellEval> {
    let start = Instant::now();
    cfg.validate()?;
    let (plan, support) = plan_experiment(cfg, data.base())?;
    plan.check_leakage(data.base()).map_err(Error::at(Stage::Split))?;

    let t = Instant::now();
    let adapted = adapt(cfg, data, &support).map_err(Error::at(Stage::Adaptation))?;
    let adaptation_time = t.elapsed();

    let t = Instant::now();
    let reuse = cached.filter(|_| adapted.kind == AdaptationKind::Identity && cfg.classifier_train == ClassifierTrain::Full);
    let outcome = match reuse {
        Some(c) => *c,
        None => classify(cfg, &adapted, &plan, want)?,
    };
    Ok(CellEval {
        config: cfg.clone(),
        outcome,
        adaptation: adapted.kind,
        adaptation_loss: adapted.report.as_ref().map(|r| r.final_loss),
        support_clamps: support.clamped.clone(),
        n_train: plan.train.len(),
        n_test: plan.test.len(),
        n_support: plan.support.len(),
        test_fingerprint: test_fingerprint(data.base(), &plan),
        timings: Timings {
            adaptation: adaptation_time,
            classifiers: t.elapsed(),
            total: start.elapsed(),
        },
    })
}

/// Classifier scores on the frozen embeddings for (setting, language).
pub(crate) fn identity_outcome(cfg: &ExperimentConfig, data: &ExperimentData) -> Result<ClassifierOutcome> {
    let (plan, _) = plan_experiment(cfg, data.base())?;
    let identity = Adaptation {
        source: data.base(),
        kind: AdaptationKind::Identity,
        adapter: Adapter::Identity,
        report: None,
    };
    classify(cfg, &identity, &plan, wanted(cfg.classifier))
}

/// Runs one experiment end to end. Under [`ClassifierMode::Auto`] the
/// classifier is chosen from the cell at `selection_shot`.
pub fn run_experiment(cfg: &ExperimentConfig, data: &ExperimentData) -> Result<EvaluationResult> {
    let want = wanted(cfg.classifier);
    let cell = evaluate_cell(cfg, data, want, None)?;
    let chosen = match cfg.classifier {
        ClassifierMode::Svm => ClassifierKind::Svm,
        ClassifierMode::Mlp => ClassifierKind::Mlp,
        ClassifierMode::Auto => {
            let local = cell.outcome.preferred().expect("auto trains both classifiers");
            if cfg.shot == cfg.selection_shot {
                local
            } else {
                // An anchor cell that cannot run (e.g. no support at shot 0
                // under support-trained classifiers) leaves the local choice.
                let anchor = ExperimentConfig {
                    shot: cfg.selection_shot,
                    ..cfg.clone()
                };
                evaluate_cell(&anchor, data, want, None)
                    .ok()
                    .and_then(|a| a.outcome.preferred())
                    .unwrap_or(local)
            }
        }
    };
    cell.resolve(chosen)
}

/// Zero-shot prompt classification of the target language's test records.
pub fn evaluate_zero_shot(store: &EmbeddingStore, prototypes: &PrototypePair, target_language: &str) -> Result<Metrics> {
    let lang = store.language_index(target_language)?;
    let mut preds = Vec::new();
    let mut golds = Vec::new();
    for r in store.records() {
        if r.language == lang && r.split == Split::Test {
            preds.push(zero_shot_predict(&r.vector, prototypes)?);
            golds.push(r.label);
        }
    }
    if golds.is_empty() {
        return Err(Error::EmptySplit(format!("{target_language} has no test records")));
    }
    Metrics::compute(&preds, &golds)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datastore::{make_synthetic, synthetic_prototypes, SyntheticSpec};

    fn data(separation: f64) -> ExperimentData {
        let spec = SyntheticSpec {
            languages: 3,
            per_class_train: 12,
            per_class_test: 20,
            class_separation: separation,
            seed: 4,
            ..Default::default()
        };
        ExperimentData::new(make_synthetic(&spec).unwrap()).unwrap()
    }

    fn quick(setting: Setting, shot: usize, strategy: Strategy) -> ExperimentConfig {
        let mut c = ExperimentConfig::new(setting, "Gujarati", shot, strategy);
        c.mlp.max_epochs = 30;
        c.train.epochs = 10;
        c
    }

    #[test]
    fn zero_shot_projection_equals_frozen() {
        let d = data(2.0);
        let a = run_experiment(&quick(Setting::Crosslingual, 0, Strategy::ProjectionOnly), &d).unwrap();
        let b = run_experiment(&quick(Setting::Crosslingual, 0, Strategy::Frozen), &d).unwrap();
        assert_eq!(a.classifiers, b.classifiers);
        assert_eq!(a.macro_f1, b.macro_f1);
        assert_eq!(a.adaptation, AdaptationKind::Identity);
    }

    #[test]
    fn frozen_ignores_shot() {
        let d = data(2.0);
        let a = run_experiment(&quick(Setting::Lolo, 0, Strategy::Frozen), &d).unwrap();
        let b = run_experiment(&quick(Setting::Lolo, 5, Strategy::Frozen), &d).unwrap();
        assert_eq!(a.classifiers, b.classifiers);
        assert_eq!(a.chosen_classifier, b.chosen_classifier);
    }

    #[test]
    fn rerun_is_identical() {
        let d = data(2.0);
        let cfg = quick(Setting::Crosslingual, 5, Strategy::ProjectionOnly);
        let a = run_experiment(&cfg, &d).unwrap();
        let b = run_experiment(&cfg, &d).unwrap();
        assert_eq!(a.adaptation, AdaptationKind::Head);
        assert_eq!(a.classifiers, b.classifiers);
        assert_eq!(a.adaptation_loss.map(f64::to_bits), b.adaptation_loss.map(f64::to_bits));
    }

    #[test]
    fn single_pair_support_skips_adaptation() {
        let d = data(2.0);
        let r = run_experiment(&quick(Setting::Monolingual, 1, Strategy::ProjectionOnly), &d).unwrap();
        assert_eq!(r.adaptation, AdaptationKind::SkippedNoPositives);
        assert_eq!(r.n_support, 2);
    }

    #[test]
    fn support_trained_classifiers_need_support() {
        let d = data(2.0);
        let mut cfg = quick(Setting::Monolingual, 0, Strategy::Frozen);
        cfg.classifier_train = ClassifierTrain::Support;
        let err = run_experiment(&cfg, &d).unwrap_err();
        assert!(matches!(err, Error::Stage { stage: Stage::Classifier, .. }), "{err}");
        cfg.shot = 5;
        let r = run_experiment(&cfg, &d).unwrap();
        assert_eq!(r.n_support, 10);
    }

    #[test]
    fn ft_store_must_match_layout() {
        let mut d = data(2.0);
        let other = make_synthetic(&SyntheticSpec { languages: 2, ..Default::default() }).unwrap();
        assert!(d.add_ft_store(5, None, other).is_err());
        let same = d.base().clone();
        d.add_ft_store(5, None, same).unwrap();
        let r = run_experiment(&quick(Setting::Crosslingual, 5, Strategy::ProjectionFt), &d).unwrap();
        assert_eq!(r.adaptation, AdaptationKind::External);
        let err = run_experiment(&quick(Setting::Lolo, 5, Strategy::ProjectionFt), &d).unwrap_err();
        assert!(matches!(err, Error::Stage { stage: Stage::Adaptation, .. }));
    }

    #[test]
    fn errors_name_their_stage() {
        let d = data(2.0);
        let mut cfg = quick(Setting::Lolo, 0, Strategy::Frozen);
        cfg.target_language = "Klingon".into();
        let err = run_experiment(&cfg, &d).unwrap_err();
        assert!(err.to_string().starts_with("split failed"), "{err}");
    }

    #[test]
    fn zero_shot_on_separated_data() {
        let spec = SyntheticSpec {
            languages: 2,
            class_separation: 6.0,
            language_offset_scale: 0.0,
            ..Default::default()
        };
        let store = make_synthetic(&spec).unwrap();
        let protos = PrototypePair::from_store(&synthetic_prototypes(&spec).unwrap()).unwrap();
        let m = evaluate_zero_shot(&store, &protos, "Bengali").unwrap();
        assert!(m.accuracy >= 95.0, "{m:?}");
    }
}
