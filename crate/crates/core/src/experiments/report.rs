//! Aggregates over result records: best rows per language, unweighted
//! means, leave-one-language-out deltas, mean shot curves, and the aligned
//! text tables built from them.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write;

use serde::Serialize;

use super::config::{Setting, Strategy};
use super::records::ResultRecord;
use crate::classify::ClassifierKind;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BestRow {
    pub setting: Setting,
    pub language: String,
    pub strategy: Strategy,
    pub shot: usize,
    pub classifier: Option<ClassifierKind>,
    pub macro_f1: f64,
    pub accuracy: f64,
    /// Best over shot and classifier together.
    pub joint_shot: usize,
    pub joint_classifier: Option<ClassifierKind>,
    pub joint_macro_f1: f64,
    pub joint_accuracy: f64,
}

/// Higher macro-F1, then higher accuracy, then the smaller shot.
fn better(a: (f64, f64, usize), b: (f64, f64, usize)) -> bool {
    match a.0.partial_cmp(&b.0).unwrap_or(Ordering::Equal) {
        Ordering::Greater => true,
        Ordering::Less => false,
        Ordering::Equal => match a.1.partial_cmp(&b.1).unwrap_or(Ordering::Equal) {
            Ordering::Greater => true,
            Ordering::Less => false,
            Ordering::Equal => a.2 < b.2,
        },
    }
}

type GroupKey = (Setting, String, Strategy);

/// Groups successful rows by (setting, language, strategy), keeping the
/// order in which languages first appear.
fn groups(records: &[ResultRecord]) -> Vec<(GroupKey, Vec<&ResultRecord>)> {
    let mut order: Vec<GroupKey> = Vec::new();
    let mut map: BTreeMap<GroupKey, Vec<&ResultRecord>> = BTreeMap::new();
    for r in records.iter().filter(|r| r.is_ok()) {
        let key = (r.setting, r.language.clone(), r.strategy);
        if !map.contains_key(&key) {
            order.push(key.clone());
        }
        map.entry(key).or_default().push(r);
    }
    order
        .into_iter()
        .map(|k| {
            let v = map.remove(&k).unwrap();
            (k, v)
        })
        .collect()
}

/// The best row per (setting, language, strategy), ranked by macro-F1 with
/// accuracy as tie-breaker, then the smaller shot.
pub fn best_rows(records: &[ResultRecord]) -> Vec<BestRow> {
    groups(records)
        .into_iter()
        .map(|((setting, language, strategy), rows)| {
            let mut best = rows[0];
            for &r in &rows[1..] {
                let key = |x: &ResultRecord| (x.macro_f1.unwrap(), x.accuracy.unwrap(), x.shot);
                if better(key(r), key(best)) {
                    best = r;
                }
            }
            let mut joint: Option<(usize, Option<ClassifierKind>, f64, f64)> = None;
            for &r in &rows {
                for (kind, f, a) in r.per_classifier() {
                    if joint.map_or(true, |(s, _, jf, ja)| better((f, a, r.shot), (jf, ja, s))) {
                        joint = Some((r.shot, kind, f, a));
                    }
                }
            }
            let (joint_shot, joint_classifier, joint_macro_f1, joint_accuracy) = joint.expect("non-empty group");
            BestRow {
                setting,
                language,
                strategy,
                shot: best.shot,
                classifier: best.classifier,
                macro_f1: best.macro_f1.unwrap(),
                accuracy: best.accuracy.unwrap(),
                joint_shot,
                joint_classifier,
                joint_macro_f1,
                joint_accuracy,
            }
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MeanRow {
    pub setting: Setting,
    pub strategy: Strategy,
    pub languages: usize,
    pub mean_macro_f1: f64,
}

/// Unweighted mean of the per-language best macro-F1.
pub fn mean_rows(best: &[BestRow]) -> Vec<MeanRow> {
    let mut acc: BTreeMap<(Setting, Strategy), (usize, f64)> = BTreeMap::new();
    for b in best {
        let e = acc.entry((b.setting, b.strategy)).or_default();
        e.0 += 1;
        e.1 += b.macro_f1;
    }
    acc.into_iter()
        .map(|((setting, strategy), (n, sum))| MeanRow {
            setting,
            strategy,
            languages: n,
            mean_macro_f1: sum / n as f64,
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DeltaRow {
    pub language: String,
    pub strategy: Strategy,
    pub lolo_macro_f1: f64,
    pub crosslingual_macro_f1: f64,
    /// LOLO minus cross-lingual.
    pub delta: f64,
}

/// LOLO minus cross-lingual best macro-F1 per (language, strategy).
/// Every pair present under one setting must be present under the other.
pub fn lolo_delta(best: &[BestRow]) -> Result<Vec<DeltaRow>> {
    let find = |setting: Setting, lang: &str, strategy: Strategy| {
        best.iter()
            .find(|b| b.setting == setting && b.language == lang && b.strategy == strategy)
    };
    let mut out = Vec::new();
    let mut done = std::collections::HashSet::new();
    for b in best.iter().filter(|b| b.setting != Setting::Monolingual) {
        if !done.insert((b.language.clone(), b.strategy)) {
            continue;
        }
        let missing = |s: Setting| Error::MissingCounterpart(format!("{} {} under {s}", b.language, b.strategy));
        let lolo = find(Setting::Lolo, &b.language, b.strategy).ok_or_else(|| missing(Setting::Lolo))?;
        let cross =
            find(Setting::Crosslingual, &b.language, b.strategy).ok_or_else(|| missing(Setting::Crosslingual))?;
        out.push(DeltaRow {
            language: b.language.clone(),
            strategy: b.strategy,
            lolo_macro_f1: lolo.macro_f1,
            crosslingual_macro_f1: cross.macro_f1,
            delta: lolo.macro_f1 - cross.macro_f1,
        });
    }
    Ok(out)
}

/// Deltas over the (language, strategy) pairs present under both settings,
/// plus a description of each pair that has only one side.
pub fn paired_lolo_delta(best: &[BestRow]) -> (Vec<DeltaRow>, Vec<String>) {
    let has = |setting: Setting, b: &BestRow| {
        best.iter()
            .any(|o| o.setting == setting && o.language == b.language && o.strategy == b.strategy)
    };
    let mut unmatched = Vec::new();
    let mut paired = Vec::new();
    for b in best.iter().filter(|b| b.setting != Setting::Monolingual) {
        if has(Setting::Lolo, b) && has(Setting::Crosslingual, b) {
            paired.push(b.clone());
        } else {
            unmatched.push(format!("{} {} ({} only)", b.language, b.strategy, b.setting));
        }
    }
    let deltas = lolo_delta(&paired).expect("every kept pair has both sides");
    (deltas, unmatched)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CurvePoint {
    pub setting: Setting,
    pub strategy: Strategy,
    pub shot: usize,
    pub languages: usize,
    pub mean_macro_f1: f64,
}

/// Mean macro-F1 across languages at each shot.
pub fn shot_curves(records: &[ResultRecord]) -> Vec<CurvePoint> {
    let mut acc: BTreeMap<(Setting, Strategy, usize), (usize, f64)> = BTreeMap::new();
    for r in records.iter().filter(|r| r.is_ok()) {
        let e = acc.entry((r.setting, r.strategy, r.shot)).or_default();
        e.0 += 1;
        e.1 += r.macro_f1.unwrap();
    }
    acc.into_iter()
        .map(|((setting, strategy, shot), (n, sum))| CurvePoint {
            setting,
            strategy,
            shot,
            languages: n,
            mean_macro_f1: sum / n as f64,
        })
        .collect()
}

pub fn write_csv<T: Serialize, W: Write>(rows: &[T], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Like [`write_csv`], with constant leading columns such as the config
/// and store hashes.
pub fn write_tagged_csv<T: Serialize, W: Write>(rows: &[T], tags: &[(&str, &str)], out: W) -> Result<()> {
    let mut buf = Vec::new();
    write_csv(rows, &mut buf)?;
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).from_reader(buf.as_slice());
    let mut w = csv::Writer::from_writer(out);
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let lead = tags.iter().map(|(k, v)| if i == 0 { *k } else { *v });
        w.write_record(lead.chain(rec.iter()))?;
    }
    w.flush()?;
    Ok(())
}

/// `"83.65 (5-shot)"`.
pub fn format_cell(macro_f1: f64, shot: usize) -> String {
    format!("{macro_f1:.2} ({shot}-shot)")
}

pub fn strategy_title(s: Strategy) -> &'static str {
    match s {
        Strategy::Frozen => "Frozen",
        Strategy::ProjectionOnly => "Projection-only",
        Strategy::ProjectionFt => "Projection+FT",
    }
}

pub fn setting_title(s: Setting) -> &'static str {
    match s {
        Setting::Monolingual => "Monolingual",
        Setting::Crosslingual => "Cross-lingual",
        Setting::Lolo => "Leave-one-language-out",
    }
}

/// Left-aligns the first column and right-aligns the rest.
pub fn align(rows: &[Vec<String>]) -> String {
    let cols = rows.iter().map(Vec::len).max().unwrap_or(0);
    let widths: Vec<usize> = (0..cols)
        .map(|c| rows.iter().filter_map(|r| r.get(c)).map(|s| s.chars().count()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for r in rows {
        let mut line = String::new();
        for (c, cell) in r.iter().enumerate() {
            if c == 0 {
                let _ = write!(line, "{cell:<w$}", w = widths[0]);
            } else {
                let _ = write!(line, "  {cell:>w$}", w = widths[c]);
            }
        }
        out.push_str(line.trim_end());
        out.push('\n');
    }
    out
}

fn languages_in_order(best: &[BestRow]) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for b in best {
        if !out.contains(&b.language) {
            out.push(b.language.clone());
        }
    }
    out
}

/// One table per setting: rows are languages, columns are strategies, and
/// each cell is the best macro-F1 with its shot. `reference` adds a leading
/// column of externally reported scores per language.
pub fn render_summary(best: &[BestRow], reference: Option<(&str, &BTreeMap<String, f64>)>) -> String {
    let languages = languages_in_order(best);
    let means = mean_rows(best);
    let mut out = String::new();
    let settings: Vec<Setting> = Setting::ALL.iter().copied().filter(|s| best.iter().any(|b| b.setting == *s)).collect();
    for setting in settings {
        let strategies: Vec<Strategy> = Strategy::ALL
            .iter()
            .copied()
            .filter(|st| best.iter().any(|b| b.setting == setting && b.strategy == *st))
            .collect();
        let mut rows = Vec::new();
        let mut header = vec!["Language".to_string()];
        if let Some((title, _)) = reference {
            header.push(title.to_string());
        }
        header.extend(strategies.iter().map(|s| strategy_title(*s).to_string()));
        rows.push(header);
        for lang in &languages {
            if !best.iter().any(|b| b.setting == setting && &b.language == lang) {
                continue;
            }
            let mut row = vec![lang.clone()];
            if let Some((_, values)) = reference {
                row.push(values.get(lang).map_or("--".to_string(), |v| format!("{v:.2}")));
            }
            for st in &strategies {
                let cell = best
                    .iter()
                    .find(|b| b.setting == setting && &b.language == lang && b.strategy == *st)
                    .map_or("--".to_string(), |b| format_cell(b.macro_f1, b.shot));
                row.push(cell);
            }
            rows.push(row);
        }
        let mut mean = vec!["Mean".to_string()];
        if reference.is_some() {
            mean.push(String::new());
        }
        for st in &strategies {
            let m = means.iter().find(|m| m.setting == setting && m.strategy == *st);
            mean.push(m.map_or("--".to_string(), |m| format!("{:.2}", m.mean_macro_f1)));
        }
        rows.push(mean);
        let _ = writeln!(out, "{} macro-F1 (%), best shot per language", setting_title(setting));
        out.push_str(&align(&rows));
        out.push('\n');
    }
    out
}

/// One table per (setting, strategy) listing each language's best row.
pub fn render_appendix(best: &[BestRow]) -> String {
    let mut out = String::new();
    for setting in Setting::ALL {
        for strategy in Strategy::ALL {
            let rows_here: Vec<&BestRow> = best
                .iter()
                .filter(|b| b.setting == *setting && b.strategy == *strategy)
                .collect();
            if rows_here.is_empty() {
                continue;
            }
            let mut rows = vec![vec![
                "Language".to_string(),
                "Macro-F1".to_string(),
                "Accuracy".to_string(),
                "Best shot".to_string(),
                "Classifier".to_string(),
            ]];
            for b in rows_here {
                rows.push(vec![
                    b.language.clone(),
                    format!("{:.2}", b.macro_f1),
                    format!("{:.2}", b.accuracy),
                    format!("{}-shot", b.shot),
                    b.classifier.map_or("--".to_string(), |k| k.to_string()),
                ]);
            }
            let _ = writeln!(out, "{}, {}", setting_title(*setting), strategy_title(*strategy));
            out.push_str(&align(&rows));
            out.push('\n');
        }
    }
    out
}

pub fn render_delta(deltas: &[DeltaRow]) -> String {
    let mut rows = vec![vec![
        "Language".to_string(),
        "Strategy".to_string(),
        "LOLO".to_string(),
        "Cross".to_string(),
        "Delta".to_string(),
    ]];
    for d in deltas {
        rows.push(vec![
            d.language.clone(),
            strategy_title(d.strategy).to_string(),
            format!("{:.2}", d.lolo_macro_f1),
            format!("{:.2}", d.crosslingual_macro_f1),
            format!("{:+.2}", d.delta),
        ]);
    }
    align(&rows)
}

/// Every cell of a results file as an aligned table.
pub fn render_records(records: &[ResultRecord]) -> String {
    let mut rows = vec![
        ["Setting", "Language", "Strategy", "Shot", "Classifier", "Macro-F1", "Accuracy", "Status"]
            .iter()
            .map(|s| s.to_string())
            .collect::<Vec<_>>(),
    ];
    let pct = |v: Option<f64>| v.map_or("--".to_string(), |x| format!("{x:.2}"));
    for r in records {
        rows.push(vec![
            r.setting.to_string(),
            r.language.clone(),
            r.strategy.to_string(),
            r.shot.to_string(),
            r.classifier.map_or("--".to_string(), |k| k.to_string()),
            pct(r.macro_f1),
            pct(r.accuracy),
            r.status.clone(),
        ]);
    }
    align(&rows)
}
