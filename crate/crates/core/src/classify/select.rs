use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::experiments::EvaluationResult;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassifierKind {
    Svm,
    Mlp,
}

impl ClassifierKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ClassifierKind::Svm => "svm",
            ClassifierKind::Mlp => "mlp",
        }
    }
}

impl std::fmt::Display for ClassifierKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for ClassifierKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "svm" => Ok(ClassifierKind::Svm),
            "mlp" => Ok(ClassifierKind::Mlp),
            other => Err(Error::InvalidConfig(format!("unknown classifier '{other}'"))),
        }
    }
}

/// Higher macro-F1 wins; ties go to the SVM.
pub fn prefer(svm_macro_f1: f64, mlp_macro_f1: f64) -> ClassifierKind {
    if mlp_macro_f1 > svm_macro_f1 {
        ClassifierKind::Mlp
    } else {
        ClassifierKind::Svm
    }
}

/// Picks between an SVM run and an MLP run of the same cell.
pub fn select_classifier(svm: &EvaluationResult, mlp: &EvaluationResult) -> Result<ClassifierKind> {
    if svm.test_fingerprint != mlp.test_fingerprint {
        return Err(Error::MismatchedSplit);
    }
    Ok(prefer(svm.macro_f1, mlp.macro_f1))
}
