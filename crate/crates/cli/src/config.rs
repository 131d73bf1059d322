//! Config file overlay. The file is TOML with two optional tables:
//!
//! ```toml
//! [synth]            # synthetic store generator
//! dim = 16
//! class_separation = 6.0
//!
//! [experiment]       # shared by adapt, run and sweep
//! shots = [0, 5, 25]
//! settings = ["crosslingual", "lolo"]
//! classifier = "svm"
//! master_seed = 7
//!
//! [experiment.train] # projection head
//! epochs = 50
//! learning_rate = 1e-4
//! hidden_dim = 256
//!
//! [experiment.svm]
//! c = 1.0
//! gamma = "scale"
//!
//! [experiment.mlp]
//! hidden = 100
//! ```
//!
//! Unknown keys are rejected. Command-line flags take precedence.

use std::fmt::Debug;
use std::fs;
use std::path::Path;

use clapshot_core::datastore::SyntheticSpec;
use clapshot_core::experiments::SweepConfig;
use clapshot_core::Error;
use serde::{Deserialize, Serialize};

use crate::args::{ExperimentArgs, SynthArgs};
use crate::error::CliResult;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConfigFile {
    pub synth: SyntheticSpec,
    pub experiment: SweepConfig,
}

impl ConfigFile {
    pub fn load(path: Option<&Path>) -> CliResult<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = fs::read_to_string(path)
            .map_err(|e| Error::InvalidConfig(format!("cannot read {}: {e}", path.display())))?;
        let cfg = toml::from_str(&text).map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))?;
        Ok(cfg)
    }
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

pub fn overlay_synth(spec: &mut SyntheticSpec, a: &SynthArgs) {
    set(&mut spec.languages, a.languages);
    set(&mut spec.dim, a.dim);
    set(&mut spec.per_class_train, a.per_class_train);
    set(&mut spec.per_class_test, a.per_class_test);
    set(&mut spec.class_separation, a.separation);
    set(&mut spec.language_offset_scale, a.language_offset);
    set(&mut spec.label_noise, a.label_noise);
    set(&mut spec.seed, a.seed);
}

pub fn overlay_experiment(cfg: &mut SweepConfig, a: &ExperimentArgs) {
    set(&mut cfg.master_seed, a.seed);
    set(&mut cfg.classifier, a.classifier);
    set(&mut cfg.classifier_train, a.classifier_train);
    if a.selection_shot.is_some() {
        cfg.selection_shot = a.selection_shot;
    }
    cfg.custom_shots |= a.custom_shots;
    set(&mut cfg.train.epochs, a.epochs);
    set(&mut cfg.train.learning_rate, a.learning_rate);
    set(&mut cfg.train.temperature, a.temperature);
    if a.hidden_dim.is_some() {
        cfg.train.hidden_dim = a.hidden_dim;
    }
    set(&mut cfg.train.warmup_epochs, a.warmup_epochs);
}

/// The resolved configuration as TOML, or its debug form when TOML cannot
/// hold a value (integers above `i64::MAX`).
pub fn render_config<T: Serialize + Debug>(value: &T) -> String {
    toml::to_string(value).unwrap_or_else(|_| format!("{value:#?}\n"))
}

pub fn log_config<T: Serialize + Debug>(what: &str, value: &T) {
    eprintln!("resolved {what} config:");
    for line in render_config(value).lines() {
        eprintln!("  {line}");
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clapshot_core::experiments::{ClassifierMode, Setting};

    #[test]
    fn module_example_parses() {
        let doc = include_str!("config.rs");
        let start = doc.find("//! ```toml").unwrap();
        let body: String = doc[start..]
            .lines()
            .skip(1)
            .take_while(|l| !l.starts_with("//! ```"))
            .map(|l| l.trim_start_matches("//!").trim_start())
            .collect::<Vec<_>>()
            .join("\n");
        let cfg: ConfigFile = toml::from_str(&body).unwrap();
        assert_eq!(cfg.synth.dim, 16);
        assert_eq!(cfg.experiment.classifier, ClassifierMode::Svm);
        assert_eq!(cfg.experiment.train.hidden_dim, Some(256));
        assert_eq!(cfg.experiment.settings, vec![Setting::Crosslingual, Setting::Lolo]);
    }

    #[test]
    fn flags_override_file_values() {
        let mut cfg: ConfigFile = toml::from_str("[experiment]\nmaster_seed = 3\nclassifier = \"mlp\"\n").unwrap();
        let args = ExperimentArgs {
            seed: Some(9),
            ..Default::default()
        };
        overlay_experiment(&mut cfg.experiment, &args);
        assert_eq!(cfg.experiment.master_seed, 9);
        assert_eq!(cfg.experiment.classifier, ClassifierMode::Mlp);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(toml::from_str::<ConfigFile>("[experiment]\nshots_typo = [1]\n").is_err());
        assert!(toml::from_str::<ConfigFile>("[other]\n").is_err());
    }

    #[test]
    fn huge_seeds_still_render() {
        let mut cfg = SweepConfig::default();
        cfg.master_seed = u64::MAX;
        assert!(render_config(&cfg).contains("18446744073709551615"));
    }
}
