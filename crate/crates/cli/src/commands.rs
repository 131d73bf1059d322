use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::time::Instant;

use clapshot_core::adapters::{write_head, Adapter};
use clapshot_core::classify::PrototypePair;
use clapshot_core::datastore::{
    make_synthetic, read_store, read_store_with_hash, synthetic_prototypes, write_store, EmbeddingRecord,
    EmbeddingStore, Split,
};
use clapshot_core::experiments::{
    adapt, best_rows, check_store_hashes, evaluate_zero_shot, paired_lolo_delta, plan_experiment, read_records_file,
    render_appendix, render_delta, render_records, render_summary, run_experiment, shot_curves, mean_rows, sweep,
    write_records_file, write_tagged_csv, CellFailure, CellResult, ExperimentConfig, ExperimentData, ResultRecord,
    ResultTable, Strategy, SweepConfig,
};
use clapshot_core::veccore::{fnv1a64, l2_normalize};
use clapshot_core::{Error, ErrorKind};
use serde::{Deserialize, Serialize};

use crate::args::{AdaptArgs, CellArgs, ExperimentArgs, IngestArgs, ReportArgs, RunArgs, SweepArgs, SynthArgs, ZeroShotArgs};
use crate::config::{log_config, overlay_experiment, overlay_synth, render_config, ConfigFile};
use crate::error::{usage, CliError, CliResult};

pub fn synth(file: ConfigFile, a: &SynthArgs, dry_run: bool) -> CliResult<()> {
    let mut spec = file.synth;
    overlay_synth(&mut spec, a);
    log_config("synth", &spec);
    spec.validate()?;
    if dry_run {
        println!(
            "would write {} records of dim {} to {}",
            spec.languages * 2 * (spec.per_class_train + spec.per_class_test),
            spec.dim,
            a.out.display()
        );
        return Ok(());
    }
    let store = make_synthetic(&spec)?;
    let hash = write_store(&store, &a.out)?;
    println!("wrote {} ({} records, store hash {hash})", a.out.display(), store.len());
    if let Some(p) = &a.prototypes {
        let protos = synthetic_prototypes(&spec)?;
        let hash = write_store(&protos, p)?;
        println!("wrote {} (prototypes, store hash {hash})", p.display());
    }
    Ok(())
}

#[derive(Debug, Deserialize)]
struct IngestRow {
    id: String,
    language: String,
    split: String,
    label: u8,
}

fn read_matrix(path: &Path) -> CliResult<Vec<Vec<f32>>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(Error::from)?;
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(Error::from)?;
        let row = rec
            .iter()
            .map(|x| {
                x.parse::<f32>()
                    .map_err(|_| Error::Malformed(format!("{} row {}: bad number {x:?}", path.display(), i + 1)))
            })
            .collect::<Result<Vec<_>, _>>()?;
        rows.push(row);
    }
    Ok(rows)
}

pub fn ingest(a: &IngestArgs, dry_run: bool) -> CliResult<()> {
    let mut store = match (&a.records, &a.vectors, &a.store) {
        (Some(records), Some(vectors), None) => {
            let mut rdr = csv::ReaderBuilder::new()
                .trim(csv::Trim::All)
                .from_path(records)
                .map_err(Error::from)?;
            let rows: Vec<IngestRow> = rdr.deserialize().collect::<Result<_, _>>().map_err(Error::from)?;
            let matrix = read_matrix(vectors)?;
            if rows.len() != matrix.len() {
                return Err(Error::LengthMismatch {
                    left: rows.len(),
                    right: matrix.len(),
                }
                .into());
            }
            let languages = match &a.languages {
                Some(l) => l.clone(),
                None => rows
                    .iter()
                    .map(|r| r.language.clone())
                    .collect::<BTreeSet<_>>()
                    .into_iter()
                    .collect(),
            };
            let dim = matrix.first().map_or(0, Vec::len);
            let records = rows
                .into_iter()
                .zip(matrix)
                .map(|(r, vector)| {
                    let language = languages
                        .iter()
                        .position(|l| *l == r.language)
                        .ok_or_else(|| Error::UnknownLanguage(r.language.clone()))?;
                    let language = u8::try_from(language)
                        .map_err(|_| Error::InvalidConfig("at most 256 languages".into()))?;
                    if r.label > 1 {
                        return Err(Error::Malformed(format!("record {}: label {} is not 0 or 1", r.id, r.label)));
                    }
                    Ok(EmbeddingRecord {
                        id: r.id,
                        language,
                        split: r.split.parse::<Split>()?,
                        label: r.label,
                        vector,
                    })
                })
                .collect::<Result<Vec<_>, Error>>()?;
            EmbeddingStore::new(dim, languages, records)?
        }
        (None, None, Some(path)) => read_store(path)?,
        _ => return Err(usage("ingest needs either --records with --vectors, or --store")),
    };
    if a.normalize {
        store = store.map_vectors(store.dim(), |v| l2_normalize(v))?;
    }
    let mut prompts = store.prompts().clone();
    for (class, text) in [(0u8, &a.prompt0), (1u8, &a.prompt1)] {
        if let Some(t) = text {
            prompts.insert(class, t.clone());
        }
    }
    let store = store.with_prompts(prompts);
    if dry_run {
        println!(
            "would write {} records of dim {} over {} languages to {}",
            store.len(),
            store.dim(),
            store.languages().len(),
            a.out.display()
        );
        return Ok(());
    }
    let hash = write_store(&store, &a.out)?;
    println!("wrote {} ({} records, store hash {hash})", a.out.display(), store.len());
    Ok(())
}

fn load_data(store: &Path, ft: &[crate::args::FtStoreSpec]) -> CliResult<ExperimentData> {
    let (base, hash) = read_store_with_hash(store)?;
    let mut data = ExperimentData::with_hash(base, hash);
    for f in ft {
        let s = read_store(&f.path)?;
        data.add_ft_store(f.shot, f.held_out.clone(), s)?;
    }
    Ok(data)
}

/// Resolves one cell against the file config and flags.
fn cell_config(file: ConfigFile, cell: &CellArgs, strategy: Strategy, exp: &ExperimentArgs) -> CliResult<ExperimentConfig> {
    let mut sweep_cfg = file.experiment;
    overlay_experiment(&mut sweep_cfg, exp);
    let selection = sweep_cfg.selection_shot.unwrap_or(0);
    sweep_cfg.shots = vec![cell.shot, selection];
    sweep_cfg.selection_shot = Some(selection);
    let cfg = sweep_cfg.cell(cell.setting, &cell.language, cell.shot, strategy)?;
    cfg.validate()?;
    Ok(cfg)
}

fn cell_hash(cfg: &ExperimentConfig) -> String {
    format!("{:016x}", fnv1a64(format!("{cfg:?}").as_bytes()))
}

fn describe_plan(cfg: &ExperimentConfig, data: &ExperimentData) -> String {
    let head = format!(
        "{} {} {} {}-shot",
        cfg.setting, cfg.target_language, cfg.strategy, cfg.shot
    );
    match plan_experiment(cfg, data.base()) {
        Ok((plan, support)) => {
            let mut line = format!(
                "{head}: train {} test {} support {}",
                plan.train.len(),
                plan.test.len(),
                support.len()
            );
            if cfg.strategy == Strategy::ProjectionFt && !cfg.uses_identity() && data.ft_store(cfg).is_err() {
                line.push_str(" (no external store)");
            }
            line
        }
        Err(e) => format!("{head}: {e}"),
    }
}

pub fn adapt_cmd(file: ConfigFile, a: &AdaptArgs, dry_run: bool) -> CliResult<()> {
    let cfg = cell_config(file, &a.cell, Strategy::ProjectionOnly, &a.exp)?;
    log_config("experiment", &cfg);
    let data = load_data(&a.cell.store, &[])?;
    if dry_run {
        println!("{}", describe_plan(&cfg, &data));
        return Ok(());
    }
    if cfg.shot == 0 {
        return Err(usage("adapt needs --shot of at least 1"));
    }
    let (plan, support) = plan_experiment(&cfg, data.base())?;
    plan.check_leakage(data.base())?;
    let adapted = adapt(&cfg, &data, &support)?;
    let Adapter::Head(head) = &adapted.adapter else {
        return Err(Error::InvalidConfig(format!(
            "no head was trained ({}): the support set has no same-class pair",
            adapted.kind.as_str()
        ))
        .into());
    };
    let store = adapted
        .store()?
        .into_owned()
        .with_metadata("adapted_from", data.store_hash())
        .with_metadata("config_hash", cell_hash(&cfg));
    let hash = write_store(&store, &a.out_store)?;
    write_head(head, &a.out_head)?;
    if let Some(r) = &adapted.report {
        eprintln!(
            "trained {} epochs on {} support records, epoch loss {:.4} -> {:.4}, final support loss {:.4}",
            r.loss_per_epoch.len(),
            support.len(),
            r.loss_per_epoch.first().copied().unwrap_or(f64::NAN),
            r.loss_per_epoch.last().copied().unwrap_or(f64::NAN),
            r.final_loss
        );
    }
    println!(
        "wrote {} (store hash {hash}) and {}",
        a.out_store.display(),
        a.out_head.display()
    );
    Ok(())
}

pub fn run_cmd(file: ConfigFile, a: &RunArgs, dry_run: bool) -> CliResult<()> {
    let cfg = cell_config(file, &a.cell, a.strategy, &a.exp)?;
    log_config("experiment", &cfg);
    let data = load_data(&a.cell.store, &a.exp.ft_store)?;
    if dry_run {
        println!("{}", describe_plan(&cfg, &data));
        return Ok(());
    }
    let result = run_experiment(&cfg, &data)?;
    eprintln!("finished in {:.2?}", result.timings.total);
    let cell = CellResult {
        config: cfg.clone(),
        outcome: Ok(result),
    };
    let record = ResultRecord::from_cell(&cell, &cell_hash(&cfg), data.store_hash());
    print!("{}", render_records(std::slice::from_ref(&record)));
    if let Some(out) = &a.out {
        write_records_file(&[record], out)?;
    }
    Ok(())
}

/// Summary, appendix, delta and optional full listing for a set of records.
fn render_report(
    records: &[ResultRecord],
    reference: Option<(&str, &BTreeMap<String, f64>)>,
    all_rows: bool,
) -> String {
    let mut out = String::new();
    let configs: BTreeSet<&str> = records.iter().map(|r| r.config_hash.as_str()).filter(|h| !h.is_empty()).collect();
    let stores: BTreeSet<&str> = records.iter().map(|r| r.store_hash.as_str()).filter(|h| !h.is_empty()).collect();
    let join = |s: &BTreeSet<&str>| if s.is_empty() { "-".to_string() } else { s.iter().copied().collect::<Vec<_>>().join(",") };
    let _ = writeln!(out, "# config_hash {}", join(&configs));
    let _ = writeln!(out, "# store_hash {}", join(&stores));
    out.push('\n');

    let best = best_rows(records);
    out.push_str(&render_summary(&best, reference));
    out.push_str(&render_appendix(&best));
    let (deltas, unmatched) = paired_lolo_delta(&best);
    if !deltas.is_empty() {
        out.push_str("LOLO minus cross-lingual, best macro-F1\n");
        out.push_str(&render_delta(&deltas));
        out.push('\n');
    }
    if !unmatched.is_empty() && !deltas.is_empty() {
        let _ = writeln!(out, "no delta for: {}\n", unmatched.join(", "));
    }
    let failed: Vec<&ResultRecord> = records.iter().filter(|r| !r.is_ok()).collect();
    if !failed.is_empty() {
        let _ = writeln!(out, "{} failed cell(s):", failed.len());
        for r in failed {
            let _ = writeln!(out, "  {} {} {} {}-shot: {}", r.setting, r.language, r.strategy, r.shot, r.status);
        }
        out.push('\n');
    }
    if all_rows {
        out.push_str("All cells\n");
        out.push_str(&render_records(records));
    }
    out
}

fn write_sweep_outputs(dir: &Path, table: &ResultTable, cfg: &SweepConfig) -> CliResult<()> {
    fs::create_dir_all(dir)?;
    let records = table.records();
    let tags = [
        ("config_hash", table.config_hash.as_str()),
        ("store_hash", table.store_hash.as_str()),
    ];
    write_records_file(&records, &dir.join("results.csv"))?;
    let best = best_rows(&records);
    write_tagged_csv(&best, &tags, fs::File::create(dir.join("best.csv"))?)?;
    write_tagged_csv(&mean_rows(&best), &tags, fs::File::create(dir.join("means.csv"))?)?;
    let (deltas, _) = paired_lolo_delta(&best);
    write_tagged_csv(&deltas, &tags, fs::File::create(dir.join("delta.csv"))?)?;
    write_tagged_csv(&shot_curves(&records), &tags, fs::File::create(dir.join("curves.csv"))?)?;
    fs::write(dir.join("results.txt"), render_report(&records, None, true))?;
    let config = format!("# config_hash = \"{}\"\n{}", table.config_hash, render_config(cfg));
    fs::write(dir.join("config.toml"), config)?;
    Ok(())
}

pub fn sweep_cmd(file: ConfigFile, a: &SweepArgs, dry_run: bool) -> CliResult<()> {
    let mut cfg = file.experiment;
    overlay_experiment(&mut cfg, &a.exp);
    if let Some(l) = &a.languages {
        cfg.languages = l.clone();
    }
    if let Some(s) = &a.shots {
        cfg.shots = s.clone();
    }
    if let Some(s) = &a.settings {
        cfg.settings = s.clone();
    }
    if let Some(s) = &a.strategies {
        cfg.strategies = s.clone();
    }
    if a.jobs == 0 {
        return Err(usage("--jobs must be at least 1"));
    }
    log_config("sweep", &cfg);
    eprintln!("config hash {}", cfg.config_hash());
    let data = load_data(&a.store, &a.exp.ft_store)?;
    let cells = cfg.cells(&data)?;
    for c in &cells {
        c.validate()?;
    }
    if dry_run {
        println!("{} cells, config hash {}", cells.len(), cfg.config_hash());
        for c in &cells {
            println!("  {}", describe_plan(c, &data));
        }
        return Ok(());
    }
    let start = Instant::now();
    let table = sweep(&cfg, &data, a.jobs)?;
    write_sweep_outputs(&a.out_dir, &table, &cfg)?;
    eprintln!(
        "{} cells in {:.2?}, outputs in {}",
        table.cells.len(),
        start.elapsed(),
        a.out_dir.display()
    );
    let failures: Vec<&CellFailure> = table.failures().filter_map(|c| c.outcome.as_ref().err()).collect();
    for (c, f) in table.failures().zip(&failures) {
        eprintln!(
            "failed: {} {} {} {}-shot: {f}",
            c.config.setting, c.config.target_language, c.config.strategy, c.config.shot
        );
    }
    if !failures.is_empty() {
        let kind = if failures.iter().any(|f| f.kind == ErrorKind::Numeric) {
            ErrorKind::Numeric
        } else {
            ErrorKind::Data
        };
        return Err(CliError::Cells {
            failed: failures.len(),
            kind,
        });
    }
    Ok(())
}

#[derive(Debug, Deserialize)]
struct ReferenceRow {
    language: String,
    macro_f1: f64,
}

pub fn report_cmd(a: &ReportArgs) -> CliResult<()> {
    let mut records = Vec::new();
    for p in &a.results {
        records.extend(read_records_file(p)?);
    }
    check_store_hashes(&records)?;
    let reference = match &a.reference {
        Some(p) => {
            let mut rdr = csv::ReaderBuilder::new()
                .trim(csv::Trim::All)
                .from_path(p)
                .map_err(Error::from)?;
            let mut m = BTreeMap::new();
            for row in rdr.deserialize::<ReferenceRow>() {
                let row = row.map_err(Error::from)?;
                m.insert(row.language, row.macro_f1);
            }
            Some(m)
        }
        None => None,
    };
    let text = render_report(
        &records,
        reference.as_ref().map(|m| (a.reference_title.as_str(), m)),
        a.all_rows,
    );
    match &a.out {
        Some(p) => fs::write(p, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct ZeroShotRow {
    language: String,
    macro_f1: f64,
    accuracy: f64,
    f1_class0: f64,
    f1_class1: f64,
}

pub fn zeroshot_cmd(a: &ZeroShotArgs, dry_run: bool) -> CliResult<()> {
    let (store, hash) = read_store_with_hash(&a.store)?;
    let protos = PrototypePair::from_store(&read_store(&a.prototypes)?)?;
    if protos.dim() != store.dim() {
        return Err(Error::DimensionMismatch {
            expected: store.dim(),
            got: protos.dim(),
        }
        .into());
    }
    let languages = match &a.languages {
        Some(l) => l.clone(),
        None => store.languages().to_vec(),
    };
    if dry_run {
        println!("would score {} language(s): {}", languages.len(), languages.join(", "));
        return Ok(());
    }
    let mut rows = Vec::new();
    for lang in &languages {
        let m = evaluate_zero_shot(&store, &protos, lang)?;
        rows.push(ZeroShotRow {
            language: lang.clone(),
            macro_f1: m.macro_f1,
            accuracy: m.accuracy,
            f1_class0: m.per_class_f1[0],
            f1_class1: m.per_class_f1[1],
        });
    }
    let mut table = vec![vec!["Language".to_string(), "Macro-F1".into(), "Accuracy".into()]];
    for r in &rows {
        table.push(vec![r.language.clone(), format!("{:.2}", r.macro_f1), format!("{:.2}", r.accuracy)]);
    }
    print!("{}", clapshot_core::experiments::align(&table));
    if let Some(out) = &a.out {
        write_tagged_csv(&rows, &[("store_hash", hash.as_str())], fs::File::create(out)?)?;
    }
    Ok(())
}
