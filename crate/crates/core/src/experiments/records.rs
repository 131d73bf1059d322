//! Delimited result files. Every row carries the hash of the sweep
//! configuration and of the base store it was computed from.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::{Setting, Strategy};
use super::sweep::CellResult;
use crate::classify::ClassifierKind;
use crate::error::{Error, Result};

pub const STATUS_OK: &str = "ok";

fn ok() -> String {
    STATUS_OK.to_string()
}

/// One row of a results file. Only setting, language, shot, strategy,
/// macro_f1 and accuracy are required when reading hand-written files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    #[serde(default)]
    pub config_hash: String,
    #[serde(default)]
    pub store_hash: String,
    pub setting: Setting,
    pub language: String,
    pub shot: usize,
    pub strategy: Strategy,
    #[serde(default)]
    pub classifier: Option<ClassifierKind>,
    pub macro_f1: Option<f64>,
    pub accuracy: Option<f64>,
    #[serde(default)]
    pub f1_class0: Option<f64>,
    #[serde(default)]
    pub f1_class1: Option<f64>,
    #[serde(default)]
    pub svm_macro_f1: Option<f64>,
    #[serde(default)]
    pub svm_accuracy: Option<f64>,
    #[serde(default)]
    pub mlp_macro_f1: Option<f64>,
    #[serde(default)]
    pub mlp_accuracy: Option<f64>,
    #[serde(default)]
    pub svm_converged: Option<bool>,
    #[serde(default)]
    pub adaptation: Option<String>,
    #[serde(default)]
    pub n_train: Option<usize>,
    #[serde(default)]
    pub n_test: Option<usize>,
    #[serde(default)]
    pub n_support: Option<usize>,
    /// `language:class:available` entries joined by `;`.
    #[serde(default)]
    pub clamps: String,
    #[serde(default = "ok")]
    pub status: String,
}

impl ResultRecord {
    pub fn from_cell(cell: &CellResult, config_hash: &str, store_hash: &str) -> Self {
        let c = &cell.config;
        let mut rec = ResultRecord {
            config_hash: config_hash.to_string(),
            store_hash: store_hash.to_string(),
            setting: c.setting,
            language: c.target_language.clone(),
            shot: c.shot,
            strategy: c.strategy,
            classifier: None,
            macro_f1: None,
            accuracy: None,
            f1_class0: None,
            f1_class1: None,
            svm_macro_f1: None,
            svm_accuracy: None,
            mlp_macro_f1: None,
            mlp_accuracy: None,
            svm_converged: None,
            adaptation: None,
            n_train: None,
            n_test: None,
            n_support: None,
            clamps: String::new(),
            status: ok(),
        };
        match &cell.outcome {
            Err(e) => rec.status = format!("error: {e}"),
            Ok(r) => {
                rec.classifier = Some(r.chosen_classifier);
                rec.macro_f1 = Some(r.macro_f1);
                rec.accuracy = Some(r.accuracy);
                rec.f1_class0 = Some(r.per_class_f1[0]);
                rec.f1_class1 = Some(r.per_class_f1[1]);
                if let Some(s) = r.classifiers.svm {
                    rec.svm_macro_f1 = Some(s.metrics.macro_f1);
                    rec.svm_accuracy = Some(s.metrics.accuracy);
                    rec.svm_converged = Some(s.converged);
                }
                if let Some(m) = r.classifiers.mlp {
                    rec.mlp_macro_f1 = Some(m.macro_f1);
                    rec.mlp_accuracy = Some(m.accuracy);
                }
                rec.adaptation = Some(r.adaptation.as_str().to_string());
                rec.n_train = Some(r.n_train);
                rec.n_test = Some(r.n_test);
                rec.n_support = Some(r.n_support);
                rec.clamps = r
                    .support_clamps
                    .iter()
                    .map(|c| format!("{}:{}:{}", c.language, c.class, c.available))
                    .collect::<Vec<_>>()
                    .join(";");
            }
        }
        rec
    }

    pub fn is_ok(&self) -> bool {
        self.status == STATUS_OK && self.macro_f1.is_some() && self.accuracy.is_some()
    }

    /// (classifier, macro-F1, accuracy) for each classifier scored in this
    /// row, falling back to the chosen one.
    pub fn per_classifier(&self) -> Vec<(Option<ClassifierKind>, f64, f64)> {
        let mut out = Vec::new();
        if let (Some(f), Some(a)) = (self.svm_macro_f1, self.svm_accuracy) {
            out.push((Some(ClassifierKind::Svm), f, a));
        }
        if let (Some(f), Some(a)) = (self.mlp_macro_f1, self.mlp_accuracy) {
            out.push((Some(ClassifierKind::Mlp), f, a));
        }
        if out.is_empty() {
            if let (Some(f), Some(a)) = (self.macro_f1, self.accuracy) {
                out.push((self.classifier, f, a));
            }
        }
        out
    }
}

pub fn write_records<W: Write>(records: &[ResultRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_records<R: Read>(input: R) -> Result<Vec<ResultRecord>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let mut out = Vec::new();
    for row in rdr.deserialize() {
        out.push(row?);
    }
    Ok(out)
}

pub fn write_records_file(records: &[ResultRecord], path: &Path) -> Result<()> {
    write_records(records, std::fs::File::create(path)?)
}

pub fn read_records_file(path: &Path) -> Result<Vec<ResultRecord>> {
    read_records(std::fs::File::open(path)?)
}

/// Fails unless every row that names a store names the same one.
pub fn check_store_hashes(records: &[ResultRecord]) -> Result<Option<String>> {
    let mut seen: Option<&str> = None;
    for r in records.iter().filter(|r| !r.store_hash.is_empty()) {
        match seen {
            None => seen = Some(&r.store_hash),
            Some(h) if h != r.store_hash => {
                return Err(Error::StoreHashMismatch(h.to_string(), r.store_hash.clone()))
            }
            _ => {}
        }
    }
    Ok(seen.map(str::to_string))
}
