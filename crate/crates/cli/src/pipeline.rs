//! Prices to trees: segment, align, standardize, measure, average, span,
//! score, export.
//!
//! Everything is computed in memory first. On success the files are written
//! under `out/`; on failure whatever was finished goes to `out/quarantine/`
//! together with `error.txt`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use cohtree::graph::{
    export_tree, minimum_spanning_tree, sector_adjacency_score, sector_subtree_score, LabelLevel,
    SectorLabeling, TaxonomyTree,
};
use cohtree::metrics::{average_matrices, session_distance_matrix, DistanceMatrix, MetricKind};
use cohtree::series::ingest::{read_calendar_file, read_prices_file};
use cohtree::series::{align_and_fill, log_returns, segment_sessions, StandardizedReturns};
use cohtree::Error;
use serde::Serialize;

use crate::config::PipelineConfig;
use crate::error::{CliError, CliResult};

pub const QUARANTINE_DIR: &str = "quarantine";

/// Something left out of the analysis, and why.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Exclusion {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub metric: Option<MetricKind>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub symbol: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub session: Option<usize>,
    pub reason: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Scores {
    pub sector_adjacency: f64,
    pub sector_subtree: f64,
    pub industry_adjacency: f64,
    pub industry_subtree: f64,
}

impl Scores {
    fn of(tree: &TaxonomyTree, labels: &SectorLabeling) -> Self {
        Scores {
            sector_adjacency: sector_adjacency_score(tree, labels, LabelLevel::Sector),
            sector_subtree: sector_subtree_score(tree, labels, LabelLevel::Sector),
            industry_adjacency: sector_adjacency_score(tree, labels, LabelLevel::Industry),
            industry_subtree: sector_subtree_score(tree, labels, LabelLevel::Industry),
        }
    }
}

#[derive(Debug, Clone)]
pub struct MetricOutcome {
    pub kind: MetricKind,
    pub sessions_used: Vec<usize>,
    pub session_matrices: Vec<DistanceMatrix>,
    pub matrix: DistanceMatrix,
    pub tree: TaxonomyTree,
    pub scores: Scores,
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub outcomes: Vec<MetricOutcome>,
    pub exclusions: Vec<Exclusion>,
    pub skipped_rows: Vec<String>,
    /// Written files, relative to the output directory.
    pub files: Vec<PathBuf>,
    pub elapsed_ms: u128,
}

impl RunReport {
    pub fn outcome(&self, kind: MetricKind) -> Option<&MetricOutcome> {
        self.outcomes.iter().find(|o| o.kind == kind)
    }
}

#[derive(Serialize)]
struct MetricSummary<'a> {
    metric: MetricKind,
    symbols: &'a [String],
    sessions_used: &'a [usize],
    tree_weight: f64,
    scores: Scores,
}

#[derive(Serialize)]
struct ReportDoc<'a> {
    metrics: Vec<MetricSummary<'a>>,
    exclusions: &'a [Exclusion],
    skipped_rows: &'a [String],
    elapsed_ms: u128,
}

/// Files produced so far, as (relative path, contents).
#[derive(Default)]
struct Outputs(Vec<(PathBuf, String)>);

impl Outputs {
    fn push(&mut self, path: impl Into<PathBuf>, contents: String) {
        self.0.push((path.into(), contents));
    }

    fn write_under(&self, root: &Path) -> CliResult<Vec<PathBuf>> {
        for (rel, contents) in &self.0 {
            let path = root.join(rel);
            if let Some(dir) = path.parent() {
                std::fs::create_dir_all(dir).map_err(|e| CliError::write(dir, e))?;
            }
            std::fs::write(&path, contents).map_err(|e| CliError::write(&path, e))?;
        }
        Ok(self.0.iter().map(|(p, _)| p.clone()).collect())
    }
}

struct SessionData {
    index: usize,
    returns: Vec<StandardizedReturns>,
    absent: Vec<String>,
}

struct Prepared {
    labels: SectorLabeling,
    sessions: Vec<SessionData>,
    exclusions: Vec<Exclusion>,
    skipped_rows: Vec<String>,
}

fn exclusion(symbol: Option<&str>, session: Option<usize>, reason: String) -> Exclusion {
    Exclusion {
        metric: None,
        symbol: symbol.map(str::to_string),
        session,
        reason,
    }
}

fn prepare(cfg: &PipelineConfig) -> CliResult<Prepared> {
    let prices = read_prices_file(&cfg.prices, cfg.skip_bad_rows)?;
    let calendar = read_calendar_file(&cfg.calendar, cfg.skip_bad_rows)?;
    let labels = match &cfg.labels {
        Some(p) => SectorLabeling::read_csv_file(p)?,
        None => SectorLabeling::new(),
    };
    let mut skipped_rows: Vec<String> = Vec::new();
    for (path, issues) in [
        (&cfg.prices, &prices.skipped),
        (&cfg.calendar, &calendar.skipped),
    ] {
        skipped_rows.extend(
            issues
                .iter()
                .map(|i| format!("{}:{}: {}", path.display(), i.line, i.message)),
        );
    }
    let calendar = calendar.value;
    let universe: Vec<String> = prices
        .value
        .iter()
        .map(|s| s.symbol().to_string())
        .collect();

    let mut exclusions = Vec::new();
    let mut by_session: BTreeMap<usize, Vec<_>> = BTreeMap::new();
    for series in &prices.value {
        let segments = match segment_sessions(series, &calendar, cfg.min_segment_length) {
            Ok(s) => s,
            Err(Error::EmptyResult(msg)) => {
                exclusions.push(exclusion(Some(series.symbol()), None, msg));
                continue;
            }
            Err(e) => return Err(e.into()),
        };
        for seg in segments {
            if seg.too_short {
                exclusions.push(exclusion(
                    Some(series.symbol()),
                    Some(seg.session),
                    format!(
                        "{} samples in session, minimum is {}",
                        seg.prices.len(),
                        cfg.min_segment_length
                    ),
                ));
            } else {
                by_session.entry(seg.session).or_default().push(seg.prices);
            }
        }
    }

    let mut sessions = Vec::new();
    for (idx, &session) in calendar.sessions().iter().enumerate() {
        let present: Vec<_> = by_session
            .get(&idx)
            .map(|v| v.iter().collect())
            .unwrap_or_default();
        if present.len() < 2 {
            exclusions.push(exclusion(
                None,
                Some(idx),
                format!("{} usable symbols, at least 2 needed", present.len()),
            ));
            continue;
        }
        let aligned = align_and_fill(&universe, &present, idx, session, cfg.grid_step)?;
        let mut absent = aligned.missing.clone();
        let mut returns = Vec::new();
        for (symbol, grid_prices) in &aligned.prices {
            let r = log_returns(grid_prices)?;
            match StandardizedReturns::from_returns(symbol, idx, &r, cfg.min_segment_length) {
                Ok(z) => returns.push(z),
                Err(e @ (Error::InsufficientData(_) | Error::DegenerateInput(_))) => {
                    exclusions.push(exclusion(Some(symbol), Some(idx), e.to_string()));
                    absent.push(symbol.clone());
                }
                Err(e) => return Err(e.into()),
            }
        }
        if returns.len() < 2 {
            exclusions.push(exclusion(
                None,
                Some(idx),
                format!(
                    "{} symbols with usable returns, at least 2 needed",
                    returns.len()
                ),
            ));
            continue;
        }
        absent.sort();
        sessions.push(SessionData {
            index: idx,
            returns,
            absent,
        });
    }
    Ok(Prepared {
        labels,
        sessions,
        exclusions,
        skipped_rows,
    })
}

/// Drops symbols, most missing pairs first, until no pair is missing.
fn complete_matrix(m: &DistanceMatrix) -> (DistanceMatrix, Vec<String>) {
    let mut current = m.clone();
    let mut dropped = Vec::new();
    loop {
        let missing = current.missing_pairs();
        if missing.is_empty() {
            return (current, dropped);
        }
        let mut counts = vec![0usize; current.len()];
        for (i, j) in missing {
            counts[i] += 1;
            counts[j] += 1;
        }
        // Ties go to the later symbol.
        let worst = (0..counts.len())
            .max_by_key(|&i| (counts[i], i))
            .expect("non-empty");
        let symbol = current.symbols()[worst].clone();
        current = current.without_symbols(std::slice::from_ref(&symbol));
        dropped.push(symbol);
    }
}

fn run_metric(
    kind: MetricKind,
    cfg: &PipelineConfig,
    data: &Prepared,
    exclusions: &mut Vec<Exclusion>,
    outputs: &mut Outputs,
) -> CliResult<MetricOutcome> {
    let dir = PathBuf::from(kind.as_str());
    let needed = cfg.spectral.length_for_segments(2);
    let mut matrices = Vec::new();
    let mut used = Vec::new();
    for s in &data.sessions {
        let len = s.returns[0].len();
        if kind == MetricKind::Coherence && len < needed {
            exclusions.push(Exclusion {
                metric: Some(kind),
                symbol: None,
                session: Some(s.index),
                reason: format!(
                    "{len} returns, coherence with segment length {} needs at least {needed}",
                    cfg.spectral.segment_length()
                ),
            });
            continue;
        }
        let m = session_distance_matrix(&s.returns, &s.absent, kind, &cfg.spectral)
            .map_err(|e| annotate(e, &format!("session {}", s.index)))?;
        outputs.push(
            dir.join("sessions")
                .join(format!("session-{:03}.csv", s.index)),
            m.to_csv(),
        );
        matrices.push(m);
        used.push(s.index);
    }
    if matrices.is_empty() {
        return Err(Error::EmptyResult(format!(
            "no session is usable for the {kind} metric (try a smaller --segment-length)"
        ))
        .into());
    }
    let averaged = average_matrices(&matrices)?;
    let (matrix, dropped) = complete_matrix(&averaged);
    for symbol in dropped {
        exclusions.push(Exclusion {
            metric: Some(kind),
            symbol: Some(symbol),
            session: None,
            reason: "never shares a session with some other symbol".to_string(),
        });
    }
    let tree = minimum_spanning_tree(&matrix)?.with_labels(&data.labels);
    let scores = Scores::of(&tree, &data.labels);

    outputs.push(dir.join("distance.csv"), matrix.to_csv());
    outputs.push(dir.join("distance.json"), matrix.to_json());
    for &format in &cfg.exports {
        outputs.push(
            dir.join(format!("tree.{}", format.extension())),
            export_tree(&tree, &data.labels, format)?,
        );
    }
    let mut scores_json = serde_json::to_string_pretty(&scores).expect("plain struct");
    scores_json.push('\n');
    outputs.push(dir.join("scores.json"), scores_json);
    Ok(MetricOutcome {
        kind,
        sessions_used: used,
        session_matrices: matrices,
        matrix,
        tree,
        scores,
    })
}

fn annotate(e: Error, context: &str) -> Error {
    match e {
        Error::NumericalDegeneracy(m) => Error::NumericalDegeneracy(format!("{context}: {m}")),
        Error::DegenerateInput(m) => Error::DegenerateInput(format!("{context}: {m}")),
        Error::InsufficientData(m) => Error::InsufficientData(format!("{context}: {m}")),
        Error::Validation(m) => Error::Validation(format!("{context}: {m}")),
        other => other,
    }
}

fn compute(cfg: &PipelineConfig, outputs: &mut Outputs) -> CliResult<RunReport> {
    let data = prepare(cfg)?;
    let mut exclusions = data.exclusions.clone();
    let mut outcomes = Vec::new();
    for &kind in &cfg.metrics {
        outcomes.push(run_metric(kind, cfg, &data, &mut exclusions, outputs)?);
    }
    Ok(RunReport {
        outcomes,
        exclusions,
        skipped_rows: data.skipped_rows,
        files: Vec::new(),
        elapsed_ms: 0,
    })
}

/// Runs the whole analysis for every configured metric and writes the
/// results under `cfg.out`.
///
/// Layout, per metric `<m>`: `<m>/sessions/session-NNN.csv`,
/// `<m>/distance.{csv,json}`, `<m>/tree.<ext>`, `<m>/scores.json`; plus
/// `config.txt` and `report.json` at the top.
pub fn run_pipeline(cfg: &PipelineConfig) -> CliResult<RunReport> {
    let start = Instant::now();
    let mut outputs = Outputs::default();
    match compute(cfg, &mut outputs) {
        Ok(mut report) => {
            report.elapsed_ms = start.elapsed().as_millis();
            outputs.push("config.txt", cfg.to_kv());
            let doc = ReportDoc {
                metrics: report
                    .outcomes
                    .iter()
                    .map(|o| MetricSummary {
                        metric: o.kind,
                        symbols: o.matrix.symbols(),
                        sessions_used: &o.sessions_used,
                        tree_weight: cohtree::numfmt::round_sig(o.tree.total_weight()),
                        scores: o.scores,
                    })
                    .collect(),
                exclusions: &report.exclusions,
                skipped_rows: &report.skipped_rows,
                elapsed_ms: report.elapsed_ms,
            };
            let mut json = serde_json::to_string_pretty(&doc).expect("plain struct");
            json.push('\n');
            outputs.push("report.json", json);
            report.files = outputs.write_under(&cfg.out)?;
            let stale = cfg.out.join(QUARANTINE_DIR);
            if stale.is_dir() {
                std::fs::remove_dir_all(&stale).map_err(|e| CliError::write(&stale, e))?;
            }
            Ok(report)
        }
        Err(e) => {
            outputs.push("error.txt", format!("{e}\n"));
            // Best effort; the original error is what the caller needs.
            let _ = outputs.write_under(&cfg.out.join(QUARANTINE_DIR));
            Err(e)
        }
    }
}
