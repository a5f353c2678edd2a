//! The four subcommands. Each reads its inputs, writes only below the
//! configured output directory and returns a summary for the caller.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use log::{info, warn};
use serde::{Deserialize, Serialize};

use kanodrift::aggregator::{build_design_matrix, count_and_filter, parse_exclusions, pole_labels, write_design_csv};
use kanodrift::corpus::{filter_credible, load_reviews, split, write_reviews, ReviewFormat, ReviewRecord};
use kanodrift::extractor::{extract_all, AffordanceMention};
use kanodrift::kano::{
    classify_all, compare_windows, read_coefficients_csv, write_categorization_csv, write_transition_csv, KanoPoint,
    KanoThresholds, TransitionReport,
};
use kanodrift::linguistics::{load_lexicons, parse_conllu, write_conllu, LexiconSet, ParsedSentence};
use kanodrift::ologit::{fit, write_fit_report, FitHeader, FitOptions, FitResult, OrdinalData};
use kanodrift::par::Exec;
use kanodrift::svg;
use kanodrift::synth::{generate_corpus, SynthSpec};

use crate::config::PipelineConfig;

pub const INDEX_FILE: &str = "analysis_index.json";
pub const DEMO_SPEC: &str = include_str!("../specs/demo.json");

/// How a command finished when it did not fail outright.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Success,
    /// Reports were written but at least one fit did not converge.
    NotConverged,
}

impl Outcome {
    pub fn exit_code(self) -> i32 {
        match self {
            Outcome::Success => 0,
            Outcome::NotConverged => 3,
        }
    }
}

/// Bundled seed lexicons unless a directory is configured.
pub fn lexicons(cfg: &PipelineConfig) -> Result<LexiconSet> {
    match &cfg.lexicon_dir {
        None => Ok(LexiconSet::seed()),
        Some(dir) => {
            let (lex, diags) = load_lexicons(dir)?;
            for d in diags {
                warn!("lexicon: {d}");
            }
            Ok(lex)
        }
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("cannot write {}", path.display()))?,
    ))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("invalid JSON in {}", path.display()))
}

/// Window labels become directory names.
fn dir_name(label: &str) -> String {
    let s: String = label
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.') { c } else { '_' })
        .collect();
    if s.is_empty() || s.starts_with('.') {
        format!("w{s}")
    } else {
        s
    }
}

fn credible_reviews(cfg: &PipelineConfig) -> Result<(usize, Vec<ReviewRecord>)> {
    let path = cfg.require("reviews", &cfg.reviews)?;
    let report = load_reviews(path, ReviewFormat::from_path(path))?;
    for d in &report.diagnostics {
        warn!("{}: {d}", path.display());
    }
    let loaded = report.records.len();
    Ok((loaded, filter_credible(&report.records, &cfg.credibility())))
}

fn exclusions(cfg: &PipelineConfig) -> Result<BTreeSet<String>> {
    match &cfg.exclusion_list {
        None => Ok(BTreeSet::new()),
        Some(p) => Ok(parse_exclusions(
            &fs::read_to_string(p).with_context(|| format!("cannot read exclusion list {}", p.display()))?,
        )),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowStats {
    pub label: String,
    pub reviews: usize,
    pub mentions: usize,
    pub keys_over_threshold: usize,
}

/// Step counts of one extraction run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtractStats {
    pub reviews_loaded: usize,
    pub reviews_selected: usize,
    pub sentences_parsed: usize,
    pub sentences_selected: usize,
    pub parse_diagnostics: usize,
    pub mentions_extracted: usize,
    pub reviews_with_mentions: usize,
    pub keys_over_threshold: usize,
    pub windows: Vec<WindowStats>,
}

pub fn cmd_extract(cfg: &PipelineConfig, exec: Exec) -> Result<ExtractStats> {
    let lex = lexicons(cfg)?;
    let (reviews_loaded, reviews) = credible_reviews(cfg)?;
    let conllu = cfg.require("conllu", &cfg.conllu)?;
    let file = File::open(conllu).with_context(|| format!("cannot read {}", conllu.display()))?;
    let parsed = parse_conllu(BufReader::new(file))?;
    for d in &parsed.diagnostics {
        warn!("{}: {d}", conllu.display());
    }
    let selected: HashSet<&str> = reviews.iter().map(|r| r.id.as_str()).collect();
    let sentences: Vec<ParsedSentence> = parsed
        .sentences
        .iter()
        .filter(|s| selected.contains(s.review_id.as_str()))
        .cloned()
        .collect();
    let mentions = extract_all(&sentences, &lex, exec);

    create_dir(&cfg.output_dir)?;
    let mut w = create(&cfg.output_dir.join("mentions.jsonl"))?;
    for m in &mentions {
        serde_json::to_writer(&mut w, m)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;

    let exclude = exclusions(cfg)?;
    let split = split(&reviews, &cfg.windowing()?)?;
    let windows = split
        .windows
        .iter()
        .map(|(label, rs)| {
            let ms = mentions_for(&mentions, rs);
            WindowStats {
                label: label.clone(),
                reviews: rs.len(),
                mentions: ms.len(),
                keys_over_threshold: count_and_filter(&ms, cfg.min_reviews, cfg.top_n, &exclude, exec).len(),
            }
        })
        .collect();
    let stats = ExtractStats {
        reviews_loaded,
        reviews_selected: reviews.len(),
        sentences_parsed: parsed.sentences.len(),
        sentences_selected: sentences.len(),
        parse_diagnostics: parsed.diagnostics.len(),
        mentions_extracted: mentions.len(),
        reviews_with_mentions: mentions.iter().map(|m| m.review_id.as_str()).collect::<HashSet<_>>().len(),
        keys_over_threshold: count_and_filter(&mentions, cfg.min_reviews, cfg.top_n, &exclude, exec).len(),
        windows,
    };
    write_json(&cfg.output_dir.join("extraction_stats.json"), &stats)?;
    Ok(stats)
}

fn mentions_for(mentions: &[AffordanceMention], reviews: &[ReviewRecord]) -> Vec<AffordanceMention> {
    let ids: HashSet<&str> = reviews.iter().map(|r| r.id.as_str()).collect();
    mentions.iter().filter(|m| ids.contains(m.review_id.as_str())).cloned().collect()
}

pub fn read_mentions(path: &Path) -> Result<Vec<AffordanceMention>> {
    let file = File::open(path).with_context(|| format!("cannot read mentions {} (run `extract` first)", path.display()))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).with_context(|| format!("{} line {}", path.display(), i + 1))?);
    }
    Ok(out)
}

/// Files of one analyzed window, relative to the output directory.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowFiles {
    pub categorization: String,
    pub points: String,
    pub svg: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub design: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fit_report: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fit: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowEntry {
    pub label: String,
    pub reviews: usize,
    pub keys: usize,
    /// None when no model was fitted.
    pub converged: Option<bool>,
    pub files: WindowFiles,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisIndex {
    /// `pipeline` or `coefficients`.
    pub source: String,
    pub thresholds: KanoThresholds,
    pub windows: Vec<WindowEntry>,
}

fn write_points(cfg: &PipelineConfig, label: &str, points: &[KanoPoint], t: KanoThresholds) -> Result<WindowFiles> {
    let name = dir_name(label);
    let dir = cfg.output_dir.join(&name);
    create_dir(&dir)?;
    let files = WindowFiles {
        categorization: format!("{name}/categorization.csv"),
        points: format!("{name}/points.json"),
        svg: format!("{name}/kano.svg"),
        ..WindowFiles::default()
    };
    let mut w = create(&cfg.output_dir.join(&files.categorization))?;
    write_categorization_csv(&mut w, points)?;
    w.flush()?;
    write_json(&cfg.output_dir.join(&files.points), &points)?;
    fs::write(cfg.output_dir.join(&files.svg), svg::kano_plane(label, points, t))?;
    Ok(files)
}

/// Fit one window and classify its affordances. `None` when no key
/// survives selection.
fn analyze_window(
    cfg: &PipelineConfig,
    label: &str,
    reviews: &[ReviewRecord],
    mentions: &[AffordanceMention],
    lex: &LexiconSet,
    exclude: &BTreeSet<String>,
    exec: Exec,
) -> Result<Option<(FitResult, Vec<KanoPoint>, WindowFiles)>> {
    let t = cfg.thresholds()?;
    let keys: Vec<_> = count_and_filter(mentions, cfg.min_reviews, cfg.top_n, exclude, exec)
        .into_iter()
        .map(|k| k.key)
        .collect();
    if keys.is_empty() {
        return Ok(None);
    }
    let (mut design, diags) = build_design_matrix(reviews, mentions, &keys, lex, exec)?;
    for d in diags.iter().chain(&design.retain_estimable()) {
        warn!("{label}: {d}");
    }
    if design.keys.is_empty() {
        return Ok(None);
    }
    let labels: BTreeMap<String, String> = design
        .labels()
        .into_iter()
        .zip(pole_labels(mentions, &design.keys, lex))
        .collect();
    let (data, dropped) = OrdinalData::from_design(&design)?;
    for d in &dropped {
        warn!("{label}: {d}");
    }
    let opts = FitOptions {
        max_iterations: cfg.max_iterations,
        exec,
        ..FitOptions::default()
    };
    let fitted = fit(&data, &opts).with_context(|| format!("window {label}"))?;
    if !fitted.converged {
        warn!("{label}: fit did not converge after {} iterations", fitted.iterations);
    }
    let fit_labels: Vec<String> = fitted
        .affordances
        .iter()
        .map(|a| labels.get(a).cloned().unwrap_or_default())
        .collect();
    let points = classify_all(&fitted, &fit_labels, t);

    let mut files = write_points(cfg, label, &points, t)?;
    let name = dir_name(label);
    let design_path = format!("{name}/design.csv");
    write_design_csv(create(&cfg.output_dir.join(&design_path))?, &design)?;
    let report_path = format!("{name}/fit_report.csv");
    let mut w = create(&cfg.output_dir.join(&report_path))?;
    write_fit_report(&mut w, &fitted, &fit_labels)?;
    w.flush()?;
    let fit_path = format!("{name}/fit.json");
    let dropped_names: Vec<String> = dropped.iter().map(|d| d.message.clone()).collect();
    write_json(
        &cfg.output_dir.join(&fit_path),
        &serde_json::json!({ "header": FitHeader::new(&fitted, dropped_names), "fit": fitted }),
    )?;
    files.design = Some(design_path);
    files.fit_report = Some(report_path);
    files.fit = Some(fit_path);
    Ok(Some((fitted, points, files)))
}

/// Fit and categorize every window, or categorize supplied coefficients.
pub fn cmd_analyze(cfg: &PipelineConfig, from_coefficients: Option<&Path>, exec: Exec) -> Result<(AnalysisIndex, Outcome)> {
    let t = cfg.thresholds()?;
    create_dir(&cfg.output_dir)?;
    if let Some(path) = from_coefficients {
        let index = analyze_coefficients(cfg, path, t)?;
        return Ok((index, Outcome::Success));
    }

    let lex = lexicons(cfg)?;
    let (_, reviews) = credible_reviews(cfg)?;
    let mentions = read_mentions(&cfg.mentions_path())?;
    let exclude = exclusions(cfg)?;
    let split = split(&reviews, &cfg.windowing()?)?;
    if split.excluded > 0 {
        info!("{} reviews fall in no window", split.excluded);
    }
    let mut entries = Vec::new();
    let mut outcome = Outcome::Success;
    for (label, rs) in &split.windows {
        let ms = mentions_for(&mentions, rs);
        match analyze_window(cfg, label, rs, &ms, &lex, &exclude, exec)? {
            Some((fitted, points, files)) => {
                if !fitted.converged {
                    outcome = Outcome::NotConverged;
                }
                entries.push(WindowEntry {
                    label: label.clone(),
                    reviews: rs.len(),
                    keys: points.len(),
                    converged: Some(fitted.converged),
                    files,
                });
            }
            None => {
                warn!("{label}: no affordance reaches {} reviews; categorization is empty", cfg.min_reviews);
                entries.push(WindowEntry {
                    label: label.clone(),
                    reviews: rs.len(),
                    keys: 0,
                    converged: None,
                    files: write_points(cfg, label, &[], t)?,
                });
            }
        }
    }
    let index = AnalysisIndex {
        source: "pipeline".into(),
        thresholds: t,
        windows: entries,
    };
    write_json(&cfg.output_dir.join(INDEX_FILE), &index)?;
    Ok((index, outcome))
}

fn analyze_coefficients(cfg: &PipelineConfig, path: &Path, t: KanoThresholds) -> Result<AnalysisIndex> {
    let file = File::open(path).with_context(|| format!("cannot read coefficients {}", path.display()))?;
    let rows = read_coefficients_csv(BufReader::new(file))?;
    let mut order: Vec<String> = Vec::new();
    let mut by_window: BTreeMap<String, Vec<KanoPoint>> = BTreeMap::new();
    for r in rows {
        if !by_window.contains_key(&r.window) {
            order.push(r.window.clone());
        }
        by_window
            .entry(r.window.clone())
            .or_default()
            .push(KanoPoint::new(r.affordance, r.poles, r.alpha, r.beta, t));
    }
    let mut entries = Vec::new();
    for label in order {
        let points = &by_window[&label];
        entries.push(WindowEntry {
            label: label.clone(),
            reviews: 0,
            keys: points.len(),
            converged: None,
            files: write_points(cfg, &label, points, t)?,
        });
    }
    let index = AnalysisIndex {
        source: "coefficients".into(),
        thresholds: t,
        windows: entries,
    };
    write_json(&cfg.output_dir.join(INDEX_FILE), &index)?;
    Ok(index)
}

/// Compare two analyzed windows: the named pair, or the first two.
pub fn cmd_compare(cfg: &PipelineConfig, pair: Option<(&str, &str)>) -> Result<TransitionReport> {
    let index_path = cfg.output_dir.join(INDEX_FILE);
    let index: AnalysisIndex =
        read_json(&index_path).with_context(|| format!("no analysis found in {} (run `analyze` first)", cfg.output_dir.display()))?;
    if index.windows.len() < 2 {
        bail!("compare needs at least 2 analyzed windows, found {}", index.windows.len());
    }
    let find = |label: &str| -> Result<&WindowEntry> {
        index
            .windows
            .iter()
            .find(|w| w.label == label)
            .with_context(|| format!("window {label:?} is not in {}", index_path.display()))
    };
    let (a, b) = match pair {
        Some((a, b)) => (find(a)?, find(b)?),
        None => (&index.windows[0], &index.windows[1]),
    };
    let pa: Vec<KanoPoint> = read_json(&cfg.output_dir.join(&a.files.points))?;
    let pb: Vec<KanoPoint> = read_json(&cfg.output_dir.join(&b.files.points))?;
    let report = compare_windows(&a.label, &pa, &b.label, &pb);

    let mut w = create(&cfg.output_dir.join("transitions.csv"))?;
    write_transition_csv(&mut w, &report)?;
    w.flush()?;
    write_json(&cfg.output_dir.join("transitions.json"), &report)?;
    fs::write(
        cfg.output_dir.join("compare.svg"),
        svg::compare_planes(&a.label, &pa, &b.label, &pb, index.thresholds),
    )?;
    Ok(report)
}

/// Paths written by `simulate`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimulateOutput {
    pub reviews: PathBuf,
    pub conllu: PathBuf,
    pub manifest: PathBuf,
}

/// Parse a synth spec (JSON or TOML by extension), or the bundled demo.
pub fn load_spec(path: Option<&Path>) -> Result<SynthSpec> {
    let Some(path) = path else {
        return Ok(serde_json::from_str(DEMO_SPEC)?);
    };
    let text = fs::read_to_string(path).with_context(|| format!("cannot read spec {}", path.display()))?;
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("toml")) {
        toml::from_str(&text).with_context(|| format!("invalid spec {}", path.display()))
    } else {
        serde_json::from_str(&text).with_context(|| format!("invalid spec {}", path.display()))
    }
}

pub fn cmd_simulate(cfg: &PipelineConfig, mut spec: SynthSpec, seed: Option<u64>) -> Result<SimulateOutput> {
    if let Some(s) = seed {
        spec.seed = s;
    }
    let lex = lexicons(cfg)?;
    let corpus = generate_corpus(&spec, &lex, cfg.thresholds()?).context("invalid synth spec")?;
    create_dir(&cfg.output_dir)?;
    let out = SimulateOutput {
        reviews: cfg.output_dir.join("reviews.jsonl"),
        conllu: cfg.output_dir.join("corpus.conllu"),
        manifest: cfg.output_dir.join("manifest.json"),
    };
    let mut w = create(&out.reviews)?;
    write_reviews(&mut w, &corpus.reviews, ReviewFormat::Jsonl)?;
    w.flush()?;
    fs::write(&out.conllu, write_conllu(&corpus.sentences))?;
    write_json(&out.manifest, &corpus.manifest)?;
    Ok(out)
}
