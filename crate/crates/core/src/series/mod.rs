//! Price ingestion, cleaning and per-session segmentation.
//!
//! Raw prices become the analysed processes in three steps: split by trading
//! session, resample every symbol of a session onto a shared grid, then take
//! log-returns and standardize each session independently.

pub mod ingest;

use std::collections::BTreeMap;

use crate::error::{Error, Result};

/// Seconds since the UNIX epoch, UTC.
pub type Timestamp = i64;

/// Default minimum number of returns a session must hold to be analysed.
pub const DEFAULT_MIN_SEGMENT_LENGTH: usize = 64;

const MOMENT_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub timestamp: Timestamp,
    pub price: f64,
}

/// Timestamped prices of one symbol, strictly increasing in time.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceSeries {
    symbol: String,
    samples: Vec<Sample>,
}

impl PriceSeries {
    pub fn new(symbol: impl Into<String>, samples: Vec<Sample>) -> Result<Self> {
        let symbol = symbol.into();
        for (k, s) in samples.iter().enumerate() {
            if !(s.price > 0.0 && s.price.is_finite()) {
                return Err(Error::validation(format!(
                    "{symbol}: non-positive or non-finite price {} at t={}",
                    s.price, s.timestamp
                )));
            }
            if k > 0 && samples[k - 1].timestamp >= s.timestamp {
                return Err(Error::validation(format!(
                    "{symbol}: timestamps not strictly increasing at t={}",
                    s.timestamp
                )));
            }
        }
        Ok(Self { symbol, samples })
    }

    /// Builds a series from `(timestamp, price)` pairs.
    pub fn from_pairs(
        symbol: impl Into<String>,
        pairs: impl IntoIterator<Item = (Timestamp, f64)>,
    ) -> Result<Self> {
        let samples = pairs
            .into_iter()
            .map(|(timestamp, price)| Sample { timestamp, price })
            .collect();
        Self::new(symbol, samples)
    }

    pub fn symbol(&self) -> &str {
        &self.symbol
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn prices(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.price).collect()
    }
}

/// One trading session, both bounds inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Session {
    pub open: Timestamp,
    pub close: Timestamp,
}

impl Session {
    pub fn contains(&self, t: Timestamp) -> bool {
        self.open <= t && t <= self.close
    }
}

/// Ordered, non-overlapping trading sessions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SessionCalendar {
    sessions: Vec<Session>,
}

impl SessionCalendar {
    pub fn new(sessions: Vec<Session>) -> Result<Self> {
        for (k, s) in sessions.iter().enumerate() {
            if s.open >= s.close {
                return Err(Error::validation(format!(
                    "session {k}: open {} is not before close {}",
                    s.open, s.close
                )));
            }
            if k > 0 && sessions[k - 1].close >= s.open {
                return Err(Error::validation(format!(
                    "session {k} overlaps or precedes session {}",
                    k - 1
                )));
            }
        }
        Ok(Self { sessions })
    }

    pub fn sessions(&self) -> &[Session] {
        &self.sessions
    }

    pub fn len(&self) -> usize {
        self.sessions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sessions.is_empty()
    }
}

/// Zero-mean, unit-variance log-returns of one symbol over one session.
#[derive(Debug, Clone, PartialEq)]
pub struct StandardizedReturns {
    symbol: String,
    session: usize,
    values: Vec<f64>,
}

impl StandardizedReturns {
    /// Standardizes raw returns and checks the configured minimum length.
    pub fn from_returns(
        symbol: impl Into<String>,
        session: usize,
        returns: &[f64],
        min_length: usize,
    ) -> Result<Self> {
        let symbol = symbol.into();
        if returns.len() < min_length {
            return Err(Error::InsufficientData(format!(
                "{symbol}, session {session}: {} returns, minimum is {min_length}",
                returns.len()
            )));
        }
        let values = standardize(returns)
            .map_err(|e| Error::degenerate(format!("{symbol}, session {session}: {e}")))?;
        Ok(Self {
            symbol,
            session,
            values,
        })
    }

    /// Wraps values that are already standardized, checking the moments.
    pub fn from_standardized(
        symbol: impl Into<String>,
        session: usize,
        values: Vec<f64>,
    ) -> Result<Self> {
        let symbol = symbol.into();
        if !is_standardized(&values) {
            return Err(Error::validation(format!(
                "{symbol}: values are not zero-mean unit-variance"
            )));
        }
        Ok(Self {
            symbol,
            session,
            values,
        })
    }

    pub fn symbol(&self) -> &str {
        &self.symbol
    }

    pub fn session(&self) -> usize {
        self.session
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// `ln(p[k+1] / p[k])` for consecutive prices.
pub fn log_returns(prices: &[f64]) -> Result<Vec<f64>> {
    if prices.len() < 2 {
        return Err(Error::degenerate(format!(
            "log-returns need at least 2 prices, got {}",
            prices.len()
        )));
    }
    if let Some(p) = prices.iter().find(|p| !(**p > 0.0 && p.is_finite())) {
        return Err(Error::validation(format!("non-positive price {p}")));
    }
    Ok(prices.windows(2).map(|w| (w[1] / w[0]).ln()).collect())
}

pub fn to_log_returns(prices: &PriceSeries) -> Result<Vec<f64>> {
    log_returns(&prices.prices())
        .map_err(|e| Error::degenerate(format!("{}: {e}", prices.symbol())))
}

pub(crate) fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Population variance (divides by the length).
pub(crate) fn variance(x: &[f64]) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / x.len() as f64
}

/// Affine map to zero mean and unit population variance.
pub fn standardize(values: &[f64]) -> Result<Vec<f64>> {
    if values.len() < 2 {
        return Err(Error::degenerate(format!(
            "standardization needs at least 2 values, got {}",
            values.len()
        )));
    }
    let m = mean(values);
    let var = variance(values);
    // Relative test: a constant series can leave rounding residue in `var`.
    let scale = values.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    if !(var > (scale * 1e-12).powi(2)) || !var.is_finite() {
        return Err(Error::degenerate(
            "zero variance (halted or illiquid session)".to_string(),
        ));
    }
    let sd = var.sqrt();
    Ok(values.iter().map(|v| (v - m) / sd).collect())
}

/// True when `x` has mean 0 and population variance 1 within 1e-9.
pub fn is_standardized(x: &[f64]) -> bool {
    x.len() >= 2
        && mean(x).abs() <= MOMENT_TOLERANCE
        && (variance(x) - 1.0).abs() <= MOMENT_TOLERANCE
}

/// The part of one symbol's series that falls inside one session.
#[derive(Debug, Clone, PartialEq)]
pub struct SessionSegment {
    pub session: usize,
    pub prices: PriceSeries,
    /// Set when the segment holds fewer samples than the configured minimum;
    /// such segments are kept for reporting but skipped downstream.
    pub too_short: bool,
}

/// Splits `prices` by `calendar`. Samples outside every session are dropped;
/// sessions with no samples produce no segment.
pub fn segment_sessions(
    prices: &PriceSeries,
    calendar: &SessionCalendar,
    min_samples: usize,
) -> Result<Vec<SessionSegment>> {
    if calendar.is_empty() {
        return Err(Error::validation("session calendar is empty"));
    }
    let samples = prices.samples();
    let mut segments = Vec::new();
    for (idx, session) in calendar.sessions().iter().enumerate() {
        let start = samples.partition_point(|s| s.timestamp < session.open);
        let end = samples.partition_point(|s| s.timestamp <= session.close);
        if start == end {
            continue;
        }
        let series = PriceSeries {
            symbol: prices.symbol.clone(),
            samples: samples[start..end].to_vec(),
        };
        segments.push(SessionSegment {
            session: idx,
            too_short: series.len() < min_samples,
            prices: series,
        });
    }
    if segments.is_empty() {
        return Err(Error::EmptyResult(format!(
            "{}: no sample falls inside any session",
            prices.symbol()
        )));
    }
    Ok(segments)
}

/// All symbols of one session on a shared time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignedSession {
    pub session: usize,
    pub grid: Vec<Timestamp>,
    /// Resampled prices per symbol, all of length `grid.len()`.
    pub prices: BTreeMap<String, Vec<f64>>,
    /// Symbols with no observation in the session.
    pub missing: Vec<String>,
}

/// Grid points `open, open + step, ...` up to and including `close`.
pub fn session_grid(session: Session, step: i64) -> Result<Vec<Timestamp>> {
    if step <= 0 {
        return Err(Error::validation(format!(
            "grid step must be positive, got {step}"
        )));
    }
    let n = ((session.close - session.open) / step + 1) as usize;
    Ok((0..n as i64).map(|k| session.open + k * step).collect())
}

/// Resamples every symbol's segment onto the session grid by
/// last-observation-carried-forward. Before a symbol's first trade the grid
/// takes its first observed price. `symbols` lists the whole universe so
/// absent ones can be reported.
pub fn align_and_fill(
    symbols: &[String],
    segments: &[&PriceSeries],
    session_index: usize,
    session: Session,
    step: i64,
) -> Result<AlignedSession> {
    let grid = session_grid(session, step)?;
    let by_symbol: BTreeMap<&str, &PriceSeries> =
        segments.iter().map(|s| (s.symbol(), *s)).collect();
    let mut prices = BTreeMap::new();
    let mut missing = Vec::new();
    for sym in symbols {
        let inside: Vec<Sample> = by_symbol
            .get(sym.as_str())
            .map(|s| {
                s.samples()
                    .iter()
                    .filter(|x| session.contains(x.timestamp))
                    .copied()
                    .collect()
            })
            .unwrap_or_default();
        if inside.is_empty() {
            missing.push(sym.clone());
            continue;
        }
        let mut out = Vec::with_capacity(grid.len());
        let mut cursor = 0;
        let mut last = inside[0].price;
        for &t in &grid {
            while cursor < inside.len() && inside[cursor].timestamp <= t {
                last = inside[cursor].price;
                cursor += 1;
            }
            out.push(last);
        }
        prices.insert(sym.clone(), out);
    }
    Ok(AlignedSession {
        session: session_index,
        grid,
        prices,
        missing,
    })
}
