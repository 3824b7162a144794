//! Synthetic inputs in the same CSV formats the pipeline reads.

use std::path::{Path, PathBuf};

use cohtree::graph::SectorLabeling;
use cohtree::series::ingest::{write_calendar, write_prices};
use cohtree::series::{PriceSeries, Session, SessionCalendar};
use cohtree::synth::{
    ar1, white_noise, FactorMarketSpec, GeneratorKind, GeneratorSpec, LabeledSeries,
};
use serde_json::json;

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq)]
pub enum SynthKind {
    /// `count` independent white-noise symbols `W1..`.
    White {
        count: usize,
    },
    /// `count` independent AR(1) symbols `R1..`.
    Ar1 {
        count: usize,
        phi: f64,
    },
    /// White `X` and its circular delay `XD`.
    Delayed {
        delay: usize,
    },
    Factor(FactorMarketSpec),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthOptions {
    pub kind: SynthKind,
    /// Returns per session.
    pub length: usize,
    pub sessions: usize,
    pub seed: u64,
    /// Grid step in seconds.
    pub step: i64,
    /// Open of the first session, epoch seconds. Later sessions open a whole
    /// number of days after the previous one.
    pub start: i64,
    /// Standard deviation of one log-return.
    pub scale: f64,
    pub out: PathBuf,
}

pub const PRICES_FILE: &str = "prices.csv";
pub const CALENDAR_FILE: &str = "calendar.csv";
pub const LABELS_FILE: &str = "labels.csv";
pub const MANIFEST_FILE: &str = "manifest.json";

const DAY: i64 = 86_400;

/// Seed for session `s`, so sessions are independent but reproducible.
pub fn session_seed(seed: u64, s: usize) -> u64 {
    seed ^ (s as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

fn session_series(opts: &SynthOptions, seed: u64) -> cohtree::Result<Vec<LabeledSeries>> {
    let unlabeled = |prefix: &str, values: Vec<Vec<f64>>| {
        values
            .into_iter()
            .enumerate()
            .map(|(k, values)| LabeledSeries {
                symbol: format!("{prefix}{}", k + 1),
                sector: String::new(),
                industry: String::new(),
                values,
            })
            .collect()
    };
    let n = opts.length;
    match &opts.kind {
        SynthKind::White { count } => Ok(unlabeled(
            "W",
            (0..*count)
                .map(|k| white_noise(n, session_seed(seed, k)))
                .collect(),
        )),
        SynthKind::Ar1 { count, phi } => Ok(unlabeled(
            "R",
            (0..*count)
                .map(|k| ar1(n, *phi, session_seed(seed, k)))
                .collect::<cohtree::Result<_>>()?,
        )),
        SynthKind::Delayed { delay } => GeneratorSpec {
            kind: GeneratorKind::DelayedCopy { delay: *delay },
            length: n,
            seed,
        }
        .generate(),
        SynthKind::Factor(spec) => GeneratorSpec {
            kind: GeneratorKind::FactorMarket(spec.clone()),
            length: n,
            seed,
        }
        .generate(),
    }
}

fn kind_json(kind: &SynthKind) -> serde_json::Value {
    match kind {
        SynthKind::White { count } => json!({ "kind": "white", "count": count }),
        SynthKind::Ar1 { count, phi } => json!({ "kind": "ar1", "count": count, "phi": phi }),
        SynthKind::Delayed { delay } => json!({ "kind": "delayed", "delay": delay }),
        SynthKind::Factor(spec) => json!({
            "kind": "factor",
            "noise": spec.noise,
            "groups": spec.groups.iter().map(|g| json!({
                "name": g.name, "size": g.size, "loading": g.loading, "lag": g.lag,
            })).collect::<Vec<_>>(),
        }),
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> CliResult<()> {
    std::fs::write(path, bytes).map_err(|e| CliError::write(path, e))
}

/// Writes `prices.csv`, `calendar.csv`, `labels.csv` and `manifest.json`
/// under `opts.out`. Prices start at 100 and follow
/// `p[t+1] = p[t] * exp(scale * r[t])` across all sessions. Returns the
/// written paths.
pub fn generate_synthetic(opts: &SynthOptions) -> CliResult<Vec<PathBuf>> {
    if opts.sessions == 0 || opts.step <= 0 || !(opts.scale > 0.0 && opts.scale.is_finite()) {
        return Err(CliError::usage("sessions, step and scale must be positive"));
    }
    let mut symbols: Vec<(String, Vec<(i64, f64)>)> = Vec::new();
    let mut labels = SectorLabeling::new();
    let mut sessions = Vec::new();
    let span = opts.length as i64 * opts.step;
    let spacing = (span / DAY + 1) * DAY;
    for s in 0..opts.sessions {
        let open = opts.start + s as i64 * spacing;
        let close = open + span;
        sessions.push(Session { open, close });
        let series = session_series(opts, session_seed(opts.seed, s))
            .map_err(|e| CliError::usage(e.to_string()))?;
        if s == 0 {
            for ls in &series {
                labels.insert(&ls.symbol, &ls.sector, &ls.industry);
                symbols.push((ls.symbol.clone(), Vec::new()));
            }
        }
        for (ls, (_, pts)) in series.iter().zip(symbols.iter_mut()) {
            let mut p = pts.last().map_or(100.0, |&(_, p)| p);
            pts.push((open, p));
            for (k, r) in ls.values.iter().enumerate() {
                p *= (opts.scale * r).exp();
                pts.push((open + (k as i64 + 1) * opts.step, p));
            }
        }
    }
    let series = symbols
        .into_iter()
        .map(|(sym, pts)| PriceSeries::from_pairs(sym, pts))
        .collect::<cohtree::Result<Vec<_>>>()?;
    let calendar = SessionCalendar::new(sessions)?;

    std::fs::create_dir_all(&opts.out).map_err(|e| CliError::write(&opts.out, e))?;
    let paths: Vec<PathBuf> = [PRICES_FILE, CALENDAR_FILE, LABELS_FILE, MANIFEST_FILE]
        .iter()
        .map(|f| opts.out.join(f))
        .collect();

    let mut buf = Vec::new();
    write_prices(&mut buf, &series).expect("in-memory write");
    write_file(&paths[0], &buf)?;
    buf.clear();
    write_calendar(&mut buf, &calendar).expect("in-memory write");
    write_file(&paths[1], &buf)?;
    write_file(&paths[2], labels.to_csv().as_bytes())?;

    let manifest = json!({
        "generator": kind_json(&opts.kind),
        "seed": opts.seed,
        "session_seeds": (0..opts.sessions).map(|s| session_seed(opts.seed, s)).collect::<Vec<_>>(),
        "sessions": opts.sessions,
        "length": opts.length,
        "step": opts.step,
        "start": opts.start,
        "scale": opts.scale,
        "files": [PRICES_FILE, CALENDAR_FILE, LABELS_FILE],
    });
    let mut text = serde_json::to_string_pretty(&manifest).expect("json value");
    text.push('\n');
    write_file(&paths[3], text.as_bytes())?;
    Ok(paths)
}
