use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::adapters::TrainConfig;
use crate::classify::{MlpConfig, SvmParams};
use crate::error::{Error, Result};
use crate::veccore::{derive_seed, fnv1a64};

/// Shot sizes accepted without `custom_shots`.
pub const STANDARD_SHOTS: [usize; 6] = [0, 1, 5, 10, 25, 50];

macro_rules! named_enum {
    ($(#[$m:meta])* $name:ident { $($(#[$vm:meta])* $variant:ident => $text:literal),+ $(,)? }) => {
        $(#[$m])*
        #[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        pub enum $name {
            $($(#[$vm])* #[serde(rename = $text)] $variant),+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn as_str(self) -> &'static str {
                match self {
                    $($name::$variant => $text),+
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $name {
            type Err = Error;

            fn from_str(s: &str) -> Result<Self> {
                match s {
                    $($text => Ok($name::$variant),)+
                    other => Err(Error::InvalidConfig(format!(
                        concat!("unknown ", stringify!($name), " '{}'"),
                        other
                    ))),
                }
            }
        }
    };
}

named_enum! {
    /// Which languages train the classifiers and adaptation.
    Setting {
        Monolingual => "monolingual",
        Crosslingual => "crosslingual",
        Lolo => "lolo",
    }
}

named_enum! {
    Strategy {
        Frozen => "frozen",
        ProjectionOnly => "projection_only",
        /// Externally fine-tuned embeddings, one store per shot.
        ProjectionFt => "projection_ft",
    }
}

named_enum! {
    ClassifierMode {
        Svm => "svm",
        Mlp => "mlp",
        /// Train both; pick per (language, setting) at the selection shot.
        Auto => "auto",
    }
}

named_enum! {
    /// Training data for the downstream classifiers.
    ClassifierTrain {
        Full => "full",
        Support => "support",
    }
}

/// One cell of a sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub setting: Setting,
    pub target_language: String,
    pub shot: usize,
    pub strategy: Strategy,
    pub classifier: ClassifierMode,
    pub classifier_train: ClassifierTrain,
    /// Shot whose result fixes the classifier under [`ClassifierMode::Auto`].
    pub selection_shot: usize,
    pub master_seed: u64,
    pub custom_shots: bool,
    pub train: TrainConfig,
    pub svm: SvmParams,
    pub mlp: MlpConfig,
}

impl ExperimentConfig {
    pub fn new(setting: Setting, target_language: impl Into<String>, shot: usize, strategy: Strategy) -> Self {
        Self {
            setting,
            target_language: target_language.into(),
            shot,
            strategy,
            classifier: ClassifierMode::Auto,
            classifier_train: ClassifierTrain::Full,
            selection_shot: 0,
            master_seed: 0,
            custom_shots: false,
            train: TrainConfig::default(),
            svm: SvmParams::default(),
            mlp: MlpConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.custom_shots {
            for s in [self.shot, self.selection_shot] {
                if !STANDARD_SHOTS.contains(&s) {
                    return Err(Error::InvalidConfig(format!(
                        "shot {s} is not one of {STANDARD_SHOTS:?}; enable custom shots to allow it"
                    )));
                }
            }
        }
        self.train.validate()?;
        self.mlp.validate()
    }

    /// `master_seed ⊕ FNV-1a(setting|language|shot|strategy)`.
    pub fn cell_seed(&self) -> u64 {
        let key = format!(
            "{}|{}|{}|{}",
            self.setting, self.target_language, self.shot, self.strategy
        );
        self.master_seed ^ fnv1a64(key.as_bytes())
    }

    pub fn support_seed(&self) -> u64 {
        derive_seed(self.cell_seed(), "support")
    }

    pub fn head_seed(&self) -> u64 {
        derive_seed(self.cell_seed(), "head")
    }

    pub fn batch_seed(&self) -> u64 {
        derive_seed(self.cell_seed(), "batches")
    }

    /// Depends on setting and language only, so cells that see the same
    /// embeddings train the same classifiers.
    pub fn classifier_seed(&self) -> u64 {
        let key = format!("{}|{}", self.setting, self.target_language);
        derive_seed(self.master_seed ^ fnv1a64(key.as_bytes()), "classifier")
    }

    /// Whether this cell classifies the unadapted embeddings.
    pub fn uses_identity(&self) -> bool {
        self.shot == 0 || self.strategy == Strategy::Frozen
    }
}
