use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use clapshot_core::experiments::{ClassifierMode, ClassifierTrain, Setting, Strategy};

#[derive(Debug, Parser)]
#[command(
    name = "clapshot",
    version,
    about = "Few-shot contrastive adaptation and cross-lingual evaluation over precomputed audio-text embeddings"
)]
pub struct Cli {
    /// TOML file with optional [synth] and [experiment] tables. Flags override
    /// values from the file; unset values fall back to built-in defaults.
    #[arg(long, global = true, env = "CLAPSHOT_CONFIG", value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Print the resolved configuration and plan, then exit without running.
    #[arg(long, global = true)]
    pub dry_run: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic Gaussian-cluster embedding store.
    Synth(SynthArgs),
    /// Build a store from a records CSV plus a vector matrix, or validate and
    /// re-emit an extractor-produced store.
    Ingest(IngestArgs),
    /// Train a projection head for one cell and write the adapted store and head.
    Adapt(AdaptArgs),
    /// Evaluate a single experiment cell.
    Run(RunArgs),
    /// Evaluate the full setting x language x strategy x shot grid.
    Sweep(SweepArgs),
    /// Render summary, appendix and delta tables from result files.
    Report(ReportArgs),
    /// Score prompt-prototype zero-shot classification per language.
    Zeroshot(ZeroShotArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Output store path; the manifest is written next to it.
    #[arg(long, value_name = "PATH")]
    pub out: PathBuf,
    /// Also write a two-record prompt-prototype store here.
    #[arg(long, value_name = "PATH")]
    pub prototypes: Option<PathBuf>,
    /// Number of languages [default: 10]
    #[arg(long)]
    pub languages: Option<usize>,
    /// Embedding dimension [default: 16]
    #[arg(long)]
    pub dim: Option<usize>,
    /// Train records per (language, class) [default: 40]
    #[arg(long)]
    pub per_class_train: Option<usize>,
    /// Test records per (language, class) [default: 40]
    #[arg(long)]
    pub per_class_test: Option<usize>,
    /// Distance between class means in within-cluster standard deviations [default: 2.0]
    #[arg(long)]
    pub separation: Option<f64>,
    /// Scale of the per-language offset [default: 1.0]
    #[arg(long)]
    pub language_offset: Option<f64>,
    /// Probability of flipping each label [default: 0.0]
    #[arg(long)]
    pub label_noise: Option<f64>,
    /// Generator seed [default: 0]
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// Output store path.
    #[arg(long, value_name = "PATH")]
    pub out: PathBuf,
    /// CSV with header `id,language,split,label`, one row per record.
    #[arg(long, value_name = "CSV", requires = "vectors", conflicts_with = "store")]
    pub records: Option<PathBuf>,
    /// Headerless CSV of floats, row i holding the vector of record i.
    #[arg(long, value_name = "CSV", requires = "records")]
    pub vectors: Option<PathBuf>,
    /// Existing store (e.g. extractor output) to validate and re-emit.
    #[arg(long, value_name = "PATH")]
    pub store: Option<PathBuf>,
    /// Language table order; defaults to sorted unique names from the records.
    #[arg(long, value_delimiter = ',')]
    pub languages: Option<Vec<String>>,
    /// L2-normalize every vector.
    #[arg(long)]
    pub normalize: bool,
    /// Prompt text bound to class 0 (non-abusive).
    #[arg(long, value_name = "TEXT")]
    pub prompt0: Option<String>,
    /// Prompt text bound to class 1 (abusive).
    #[arg(long, value_name = "TEXT")]
    pub prompt1: Option<String>,
}

/// `SHOT=PATH` or `SHOT:LANG=PATH`. The language form marks a store whose
/// adaptation held that language out, for leave-one-language-out cells.
#[derive(Clone, Debug, PartialEq)]
pub struct FtStoreSpec {
    pub shot: usize,
    pub held_out: Option<String>,
    pub path: PathBuf,
}

impl FromStr for FtStoreSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (key, path) = s.split_once('=').ok_or("expected SHOT[:LANG]=PATH")?;
        let (shot, held_out) = match key.split_once(':') {
            Some((shot, lang)) if !lang.is_empty() => (shot, Some(lang.to_string())),
            Some(_) => return Err("empty language after ':'".into()),
            None => (key, None),
        };
        let shot = shot.parse().map_err(|_| format!("bad shot {shot:?}"))?;
        if path.is_empty() {
            return Err("empty path".into());
        }
        Ok(Self {
            shot,
            held_out,
            path: path.into(),
        })
    }
}

/// Options shared by every command that evaluates or adapts.
#[derive(Debug, Default, Args)]
pub struct ExperimentArgs {
    /// Master seed [default: 0]
    #[arg(long)]
    pub seed: Option<u64>,
    /// svm, mlp or auto [default: auto]
    #[arg(long)]
    pub classifier: Option<ClassifierMode>,
    /// Train downstream classifiers on the full train split or on the support set only [default: full]
    #[arg(long)]
    pub classifier_train: Option<ClassifierTrain>,
    /// Shot whose classifier choice auto mode reuses for every shot [default: 0, or the smallest swept shot]
    #[arg(long)]
    pub selection_shot: Option<usize>,
    /// Allow shots outside 0, 1, 5, 10, 25, 50.
    #[arg(long)]
    pub custom_shots: bool,
    /// Head training epochs [default: 50]
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Head learning rate [default: 0.0001]
    #[arg(long)]
    pub learning_rate: Option<f64>,
    /// Contrastive temperature [default: 0.07]
    #[arg(long)]
    pub temperature: Option<f64>,
    /// Head hidden width [default: the embedding dimension]
    #[arg(long)]
    pub hidden_dim: Option<usize>,
    /// Linear warmup epochs [default: 0]
    #[arg(long)]
    pub warmup_epochs: Option<usize>,
    /// Externally adapted store for projection_ft cells, as SHOT=PATH or
    /// SHOT:LANG=PATH (LANG held out, used by LOLO). Repeatable.
    #[arg(long, value_name = "SPEC")]
    pub ft_store: Vec<FtStoreSpec>,
}

#[derive(Debug, Args)]
pub struct CellArgs {
    /// Input store.
    #[arg(long, value_name = "PATH")]
    pub store: PathBuf,
    /// monolingual, crosslingual or lolo
    #[arg(long, default_value = "crosslingual")]
    pub setting: Setting,
    /// Target language.
    #[arg(long)]
    pub language: String,
    /// Support examples per class per language.
    #[arg(long, default_value_t = 0)]
    pub shot: usize,
}

#[derive(Debug, Args)]
pub struct AdaptArgs {
    #[command(flatten)]
    pub cell: CellArgs,
    /// Where to write the adapted store.
    #[arg(long, value_name = "PATH")]
    pub out_store: PathBuf,
    /// Where to write the trained head.
    #[arg(long, value_name = "PATH")]
    pub out_head: PathBuf,
    #[command(flatten)]
    pub exp: ExperimentArgs,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub cell: CellArgs,
    /// frozen, projection_only or projection_ft
    #[arg(long, default_value = "projection_only")]
    pub strategy: Strategy,
    /// Write the result record as CSV here.
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub exp: ExperimentArgs,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Input store.
    #[arg(long, value_name = "PATH")]
    pub store: PathBuf,
    /// Directory for results.csv, best.csv, means.csv, delta.csv, curves.csv and results.txt.
    #[arg(long, value_name = "DIR")]
    pub out_dir: PathBuf,
    /// Comma-separated target languages [default: all languages in the store]
    #[arg(long, value_delimiter = ',')]
    pub languages: Option<Vec<String>>,
    /// Comma-separated shots [default: 0,1,5,10,25,50]
    #[arg(long, value_delimiter = ',')]
    pub shots: Option<Vec<usize>>,
    /// Comma-separated settings [default: crosslingual,lolo]
    #[arg(long, value_delimiter = ',')]
    pub settings: Option<Vec<Setting>>,
    /// Comma-separated strategies [default: frozen,projection_only]
    #[arg(long, value_delimiter = ',')]
    pub strategies: Option<Vec<Strategy>>,
    /// Worker threads; results do not depend on it.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    #[command(flatten)]
    pub exp: ExperimentArgs,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// One or more results CSV files; rows are merged.
    #[arg(required = true, value_name = "RESULTS")]
    pub results: Vec<PathBuf>,
    /// CSV with columns `language,macro_f1` shown as an extra column.
    #[arg(long, value_name = "CSV")]
    pub reference: Option<PathBuf>,
    /// Column title for the reference values.
    #[arg(long, default_value = "Reference")]
    pub reference_title: String,
    /// Also list every record.
    #[arg(long)]
    pub all_rows: bool,
    /// Write the report here instead of stdout.
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ZeroShotArgs {
    /// Audio embedding store.
    #[arg(long, value_name = "PATH")]
    pub store: PathBuf,
    /// Prompt-prototype store with one record per class.
    #[arg(long, value_name = "PATH")]
    pub prototypes: PathBuf,
    /// Comma-separated languages [default: all languages in the store]
    #[arg(long, value_delimiter = ',')]
    pub languages: Option<Vec<String>>,
    /// Write per-language metrics as CSV here.
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}
