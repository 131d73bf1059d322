//! Zero-shot prompt classification and the two downstream classifiers.

mod io;
mod mlp;
mod select;
mod svm;
mod zero_shot;

pub use io::{
    decode_mlp, decode_svm, encode_mlp, encode_svm, read_mlp, read_svm, write_mlp, write_svm, MLP_MAGIC,
    SVM_MAGIC,
};
pub use mlp::{predict_mlp, train_mlp, MlpConfig, MlpModel};
pub use select::{prefer, select_classifier, ClassifierKind};
pub use svm::{predict_svm, rbf, scale_gamma, train_svm, Gamma, SvmModel, SvmParams};
pub use zero_shot::{zero_shot_predict, PromptPrototype, PrototypePair};

use crate::error::Result;

/// A trained binary classifier of either kind.
#[derive(Clone, Debug, PartialEq)]
pub enum Classifier {
    Svm(SvmModel),
    Mlp(MlpModel),
}

impl Classifier {
    pub fn kind(&self) -> ClassifierKind {
        match self {
            Classifier::Svm(_) => ClassifierKind::Svm,
            Classifier::Mlp(_) => ClassifierKind::Mlp,
        }
    }

    pub fn predict(&self, x: &[f32]) -> Result<u8> {
        match self {
            Classifier::Svm(m) => predict_svm(m, x),
            Classifier::Mlp(m) => predict_mlp(m, x),
        }
    }
}
