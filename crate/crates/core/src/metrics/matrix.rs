use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{coherence_distance_from_spectrum, correlation_distance};
use crate::error::{Error, Result};
use crate::numfmt::{fmt_sig, round_sig};
use crate::series::StandardizedReturns;
use crate::spectral::{SegmentSpectra, SpectralConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MetricKind {
    Correlation,
    Coherence,
}

impl MetricKind {
    pub const ALL: [MetricKind; 2] = [MetricKind::Correlation, MetricKind::Coherence];

    /// Largest value a distance of this kind can take.
    pub fn upper_bound(self) -> f64 {
        match self {
            MetricKind::Correlation => 2.0,
            MetricKind::Coherence => 1.0,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            MetricKind::Correlation => "correlation",
            MetricKind::Coherence => "coherence",
        }
    }
}

impl fmt::Display for MetricKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MetricKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "correlation" => Ok(MetricKind::Correlation),
            "coherence" => Ok(MetricKind::Coherence),
            other => Err(Error::validation(format!("unknown metric kind `{other}`"))),
        }
    }
}

/// Symmetric `N x N` distances with a zero diagonal. Off-diagonal entries may
/// be missing when no session contained both symbols.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    symbols: Vec<String>,
    entries: Vec<Option<f64>>,
    kind: MetricKind,
    session_counts: Vec<usize>,
    excluded: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct MatrixDoc {
    metric_kind: MetricKind,
    symbols: Vec<String>,
    entries: Vec<Vec<Option<f64>>>,
    session_counts: Vec<Vec<usize>>,
    excluded: Vec<String>,
}

impl DistanceMatrix {
    /// Builds a matrix from full rows, checking symmetry, the zero diagonal
    /// and the value range of `kind`.
    pub fn from_rows(
        symbols: Vec<String>,
        kind: MetricKind,
        rows: Vec<Vec<Option<f64>>>,
        session_counts: Option<Vec<Vec<usize>>>,
        excluded: Vec<String>,
    ) -> Result<Self> {
        let n = symbols.len();
        let unique: BTreeSet<&String> = symbols.iter().collect();
        if unique.len() != n {
            return Err(Error::validation("duplicate symbol in distance matrix"));
        }
        if rows.len() != n || rows.iter().any(|r| r.len() != n) {
            return Err(Error::validation(format!(
                "distance matrix must be {n} x {n}"
            )));
        }
        let counts = match session_counts {
            Some(c) => {
                if c.len() != n || c.iter().any(|r| r.len() != n) {
                    return Err(Error::validation(format!(
                        "session counts must be {n} x {n}"
                    )));
                }
                c.into_iter().flatten().collect()
            }
            None => rows
                .iter()
                .flatten()
                .map(|e| usize::from(e.is_some()))
                .collect(),
        };
        let m = Self {
            symbols,
            entries: rows.into_iter().flatten().collect(),
            kind,
            session_counts: counts,
            excluded,
        };
        m.validate()?;
        Ok(m)
    }

    fn validate(&self) -> Result<()> {
        let n = self.len();
        let hi = self.kind.upper_bound();
        for i in 0..n {
            if self.get(i, i) != Some(0.0) {
                return Err(Error::validation(format!(
                    "diagonal entry for {} must be 0",
                    self.symbols[i]
                )));
            }
            for j in (i + 1)..n {
                match (self.get(i, j), self.get(j, i)) {
                    (None, None) => {}
                    (Some(a), Some(b)) if (a - b).abs() <= 1e-12 => {
                        if !(0.0..=hi).contains(&a) {
                            return Err(Error::validation(format!(
                                "{} distance {a} for ({}, {}) outside [0, {hi}]",
                                self.kind, self.symbols[i], self.symbols[j]
                            )));
                        }
                    }
                    _ => {
                        return Err(Error::validation(format!(
                            "matrix not symmetric at ({}, {})",
                            self.symbols[i], self.symbols[j]
                        )))
                    }
                }
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn symbols(&self) -> &[String] {
        &self.symbols
    }

    pub fn kind(&self) -> MetricKind {
        self.kind
    }

    /// Symbols left out of this matrix (absent or degenerate in the session).
    pub fn excluded(&self) -> &[String] {
        &self.excluded
    }

    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        self.entries[i * self.len() + j]
    }

    pub fn session_count(&self, i: usize, j: usize) -> usize {
        self.session_counts[i * self.len() + j]
    }

    pub fn index_of(&self, symbol: &str) -> Option<usize> {
        self.symbols.iter().position(|s| s == symbol)
    }

    pub fn get_by_symbol(&self, a: &str, b: &str) -> Option<f64> {
        self.get(self.index_of(a)?, self.index_of(b)?)
    }

    /// Unordered pairs `(i, j)`, `i < j`, with no value.
    pub fn missing_pairs(&self) -> Vec<(usize, usize)> {
        let n = self.len();
        (0..n)
            .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
            .filter(|&(i, j)| self.get(i, j).is_none())
            .collect()
    }

    pub fn is_complete(&self) -> bool {
        self.missing_pairs().is_empty()
    }

    /// Copy without the listed symbols; they are added to the exclusion list.
    pub fn without_symbols(&self, drop: &[String]) -> DistanceMatrix {
        let keep: Vec<usize> = (0..self.len())
            .filter(|&i| !drop.contains(&self.symbols[i]))
            .collect();
        let n = self.len();
        let pick = |v: &[Option<f64>]| -> Vec<Option<f64>> {
            keep.iter()
                .flat_map(|&i| keep.iter().map(move |&j| v[i * n + j]))
                .collect()
        };
        let mut excluded = self.excluded.clone();
        excluded.extend(drop.iter().filter(|s| self.symbols.contains(s)).cloned());
        excluded.sort();
        excluded.dedup();
        DistanceMatrix {
            symbols: keep.iter().map(|&i| self.symbols[i].clone()).collect(),
            entries: pick(&self.entries),
            kind: self.kind,
            session_counts: keep
                .iter()
                .flat_map(|&i| keep.iter().map(move |&j| self.session_counts[i * n + j]))
                .collect(),
            excluded,
        }
    }

    /// Symmetric CSV: a `symbol` header followed by the symbols, then one
    /// row per symbol. Missing entries are written as `NA`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        write!(out, "symbol")?;
        for s in &self.symbols {
            write!(out, ",{s}")?;
        }
        writeln!(out)?;
        for (i, s) in self.symbols.iter().enumerate() {
            write!(out, "{s}")?;
            for j in 0..self.len() {
                match self.get(i, j) {
                    Some(v) => write!(out, ",{}", fmt_sig(v))?,
                    None => write!(out, ",NA")?,
                }
            }
            writeln!(out)?;
        }
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)
            .expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("CSV output is UTF-8")
    }

    /// Reads the CSV form. The metric kind is not stored in the CSV and must
    /// be supplied.
    pub fn read_csv<R: Read>(reader: R, kind: MetricKind) -> Result<Self> {
        let parse_err = |line: u64, message: String| Error::Parse {
            source_name: "distance matrix".to_string(),
            line,
            message,
        };
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .from_reader(reader);
        let mut records = rdr.records();
        let header = records
            .next()
            .ok_or_else(|| parse_err(1, "empty input".into()))?
            .map_err(|e| parse_err(1, e.to_string()))?;
        if header.get(0) != Some("symbol") {
            return Err(parse_err(1, "first header cell must be `symbol`".into()));
        }
        let symbols: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
        let mut rows = Vec::with_capacity(symbols.len());
        for (i, rec) in records.enumerate() {
            let line = i as u64 + 2;
            let rec = rec.map_err(|e| parse_err(line, e.to_string()))?;
            if rec.len() != symbols.len() + 1 {
                return Err(parse_err(
                    line,
                    format!("expected {} fields", symbols.len() + 1),
                ));
            }
            if symbols.get(i).map(String::as_str) != rec.get(0) {
                return Err(parse_err(
                    line,
                    "row label does not match header order".into(),
                ));
            }
            let row = rec
                .iter()
                .skip(1)
                .map(|cell| match cell {
                    "NA" => Ok(None),
                    v => v
                        .parse::<f64>()
                        .map(Some)
                        .map_err(|_| parse_err(line, format!("bad number `{v}`"))),
                })
                .collect::<Result<Vec<_>>>()?;
            rows.push(row);
        }
        Self::from_rows(symbols, kind, rows, None, Vec::new())
    }

    fn to_doc(&self) -> MatrixDoc {
        let n = self.len();
        MatrixDoc {
            metric_kind: self.kind,
            symbols: self.symbols.clone(),
            entries: self
                .entries
                .chunks(n.max(1))
                .map(|r| r.iter().map(|e| e.map(round_sig)).collect())
                .collect(),
            session_counts: self
                .session_counts
                .chunks(n.max(1))
                .map(<[usize]>::to_vec)
                .collect(),
            excluded: self.excluded.clone(),
        }
    }

    /// JSON form carrying the metric kind, per-entry session counts and the
    /// exclusion report. Values are rounded to 12 significant digits.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.to_doc()).expect("matrix serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: MatrixDoc = serde_json::from_str(text)
            .map_err(|e| Error::validation(format!("distance matrix JSON: {e}")))?;
        let entries = if doc.symbols.is_empty() {
            Vec::new()
        } else {
            doc.entries
        };
        let counts = if doc.symbols.is_empty() {
            Vec::new()
        } else {
            doc.session_counts
        };
        Self::from_rows(
            doc.symbols,
            doc.metric_kind,
            entries,
            Some(counts),
            doc.excluded,
        )
    }
}

/// All pairwise distances of one session.
///
/// `series` are the session's standardized returns (equal lengths); `absent`
/// lists universe symbols that had no usable data and is carried into the
/// exclusion report. Pairs are computed in parallel; each unordered pair is
/// evaluated once and mirrored.
pub fn session_distance_matrix(
    series: &[StandardizedReturns],
    absent: &[String],
    kind: MetricKind,
    cfg: &SpectralConfig,
) -> Result<DistanceMatrix> {
    if series.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "a session matrix needs at least 2 symbols, got {}",
            series.len()
        )));
    }
    let len = series[0].len();
    if let Some(s) = series.iter().find(|s| s.len() != len) {
        return Err(Error::validation(format!(
            "{} has {} returns, expected {len}",
            s.symbol(),
            s.len()
        )));
    }
    let mut order: Vec<usize> = (0..series.len()).collect();
    order.sort_by(|&a, &b| series[a].symbol().cmp(series[b].symbol()));
    let sorted: Vec<&StandardizedReturns> = order.iter().map(|&i| &series[i]).collect();
    let n = sorted.len();
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
        .collect();

    let distances: Vec<((usize, usize), f64)> = match kind {
        MetricKind::Correlation => pairs
            .par_iter()
            .map(|&(i, j)| {
                correlation_distance(sorted[i].values(), sorted[j].values()).map(|d| ((i, j), d))
            })
            .collect::<Result<_>>()?,
        MetricKind::Coherence => {
            let spectra: Vec<SegmentSpectra> = sorted
                .par_iter()
                .map(|s| SegmentSpectra::compute(s.values(), cfg))
                .collect::<Result<_>>()?;
            pairs
                .par_iter()
                .map(|&(i, j)| {
                    let c = spectra[i]
                        .coherence(&spectra[j])
                        .map_err(|e| annotate(e, sorted[i].symbol(), sorted[j].symbol()))?;
                    coherence_distance_from_spectrum(&c).map(|d| ((i, j), d))
                })
                .collect::<Result<_>>()?
        }
    };

    let mut rows = vec![vec![Some(0.0); n]; n];
    for ((i, j), d) in distances {
        rows[i][j] = Some(d);
        rows[j][i] = Some(d);
    }
    let mut excluded = absent.to_vec();
    excluded.sort();
    excluded.dedup();
    DistanceMatrix::from_rows(
        sorted.iter().map(|s| s.symbol().to_string()).collect(),
        kind,
        rows,
        None,
        excluded,
    )
}

fn annotate(e: Error, a: &str, b: &str) -> Error {
    match e {
        Error::NumericalDegeneracy(m) => {
            Error::NumericalDegeneracy(format!("pair ({a}, {b}): {m}"))
        }
        Error::InsufficientData(m) => Error::InsufficientData(format!("pair ({a}, {b}): {m}")),
        other => other,
    }
}

/// Entrywise mean over the sessions in which both symbols of an entry are
/// present. The symbol set is the sorted union; entries never observed
/// together stay missing, and each entry records how many sessions it
/// averages.
pub fn average_matrices(per_session: &[DistanceMatrix]) -> Result<DistanceMatrix> {
    let first = per_session
        .first()
        .ok_or_else(|| Error::validation("no distance matrices to average"))?;
    if let Some(m) = per_session.iter().find(|m| m.kind != first.kind) {
        return Err(Error::validation(format!(
            "cannot average {} and {} matrices",
            first.kind, m.kind
        )));
    }
    let symbols: Vec<String> = per_session
        .iter()
        .flat_map(|m| m.symbols.iter().cloned())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let index: BTreeMap<&str, usize> = symbols
        .iter()
        .enumerate()
        .map(|(i, s)| (s.as_str(), i))
        .collect();
    let n = symbols.len();
    let mut sums = vec![0.0; n * n];
    let mut counts = vec![0usize; n * n];
    for m in per_session {
        let map: Vec<usize> = m.symbols.iter().map(|s| index[s.as_str()]).collect();
        for a in 0..m.len() {
            for b in (a + 1)..m.len() {
                if let Some(d) = m.get(a, b) {
                    let (i, j) = (map[a].min(map[b]), map[a].max(map[b]));
                    sums[i * n + j] += d;
                    counts[i * n + j] += 1;
                }
            }
        }
        for &i in &map {
            counts[i * n + i] += 1;
        }
    }
    let mut rows = vec![vec![None; n]; n];
    let mut count_rows = vec![vec![0usize; n]; n];
    for i in 0..n {
        rows[i][i] = Some(0.0);
        count_rows[i][i] = counts[i * n + i];
        for j in (i + 1)..n {
            let c = counts[i * n + j];
            let v = (c > 0).then(|| sums[i * n + j] / c as f64);
            rows[i][j] = v;
            rows[j][i] = v;
            count_rows[i][j] = c;
            count_rows[j][i] = c;
        }
    }
    let excluded: Vec<String> = per_session
        .iter()
        .flat_map(|m| m.excluded.iter())
        .filter(|s| !index.contains_key(s.as_str()))
        .cloned()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    DistanceMatrix::from_rows(symbols, first.kind, rows, Some(count_rows), excluded)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{delayed_copy, white_noise};

    fn sr(sym: &str, v: Vec<f64>) -> StandardizedReturns {
        StandardizedReturns::from_returns(sym, 0, &v, 2).unwrap()
    }

    fn two_by_two(a: &str, b: &str, d: Option<f64>) -> DistanceMatrix {
        DistanceMatrix::from_rows(
            vec![a.into(), b.into()],
            MetricKind::Coherence,
            vec![vec![Some(0.0), d], vec![d, Some(0.0)]],
            None,
            vec![],
        )
        .unwrap()
    }

    #[test]
    fn rejects_malformed_matrices() {
        let s = vec!["A".to_string(), "B".to_string()];
        let asym = vec![vec![Some(0.0), Some(0.3)], vec![Some(0.4), Some(0.0)]];
        assert!(
            DistanceMatrix::from_rows(s.clone(), MetricKind::Correlation, asym, None, vec![])
                .is_err()
        );
        let diag = vec![vec![Some(0.1), Some(0.3)], vec![Some(0.3), Some(0.0)]];
        assert!(
            DistanceMatrix::from_rows(s.clone(), MetricKind::Correlation, diag, None, vec![])
                .is_err()
        );
        let range = vec![vec![Some(0.0), Some(1.5)], vec![Some(1.5), Some(0.0)]];
        assert!(DistanceMatrix::from_rows(
            s.clone(),
            MetricKind::Coherence,
            range.clone(),
            None,
            vec![]
        )
        .is_err());
        assert!(DistanceMatrix::from_rows(s, MetricKind::Correlation, range, None, vec![]).is_ok());
    }

    #[test]
    fn identical_pair_has_zero_distance() {
        let x = white_noise(1024, 1);
        let series = vec![sr("B", x.clone()), sr("A", x)];
        let cfg = SpectralConfig::new(64, 0.5, Default::default()).unwrap();
        for kind in MetricKind::ALL {
            let m = session_distance_matrix(&series, &["Z".into()], kind, &cfg).unwrap();
            assert_eq!(m.symbols(), ["A", "B"]);
            assert!(m.get(0, 1).unwrap() <= 1e-9);
            assert_eq!(m.excluded(), ["Z"]);
        }
    }

    #[test]
    fn delayed_pair_is_closest_under_coherence() {
        let cfg = SpectralConfig::default();
        let mut wins = 0;
        for seed in 0..20 {
            let x = white_noise(8192, seed);
            let y = delayed_copy(&x, 1).unwrap();
            let z = white_noise(8192, 1000 + seed);
            let series = vec![sr("X", x), sr("Y", y), sr("Z", z)];
            let m = session_distance_matrix(&series, &[], MetricKind::Coherence, &cfg).unwrap();
            for i in 0..3 {
                for j in 0..3 {
                    assert_eq!(m.get(i, j), m.get(j, i));
                }
            }
            let xy = m.get_by_symbol("X", "Y").unwrap();
            if xy < m.get_by_symbol("X", "Z").unwrap() && xy < m.get_by_symbol("Y", "Z").unwrap() {
                wins += 1;
            }
        }
        assert_eq!(wins, 20);
    }

    #[test]
    fn session_matrix_needs_two_symbols() {
        let cfg = SpectralConfig::default();
        let one = vec![sr("A", white_noise(600, 1))];
        assert!(matches!(
            session_distance_matrix(&one, &[], MetricKind::Correlation, &cfg),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn averaging_rules() {
        let m = two_by_two("A", "B", Some(0.2));
        let avg = average_matrices(&vec![m.clone(); 20]).unwrap();
        assert!((avg.get(0, 1).unwrap() - 0.2).abs() < 1e-15);
        assert_eq!(avg.session_count(0, 1), 20);

        let avg = average_matrices(&[m.clone(), two_by_two("A", "B", Some(0.4))]).unwrap();
        assert!((avg.get(0, 1).unwrap() - 0.3).abs() < 1e-15);

        // B present in only 18 of 20 sessions.
        let mut sessions = vec![m.clone(); 18];
        let a_only = DistanceMatrix::from_rows(
            vec!["A".into(), "C".into()],
            MetricKind::Coherence,
            vec![vec![Some(0.0), Some(0.9)], vec![Some(0.9), Some(0.0)]],
            None,
            vec!["B".into()],
        )
        .unwrap();
        sessions.extend([a_only.clone(), a_only]);
        let avg = average_matrices(&sessions).unwrap();
        assert_eq!(avg.symbols(), ["A", "B", "C"]);
        assert_eq!(avg.session_count(0, 1), 18);
        assert!((avg.get_by_symbol("A", "B").unwrap() - 0.2).abs() < 1e-15);
        assert_eq!(avg.session_count(0, 2), 2);
        assert_eq!(avg.get_by_symbol("B", "C"), None);
        assert_eq!(avg.missing_pairs(), vec![(1, 2)]);
        assert!(avg.excluded().is_empty());

        assert!(average_matrices(&[]).is_err());
        let mut corr = m.clone();
        corr.kind = MetricKind::Correlation;
        assert!(average_matrices(&[m, corr]).is_err());
    }

    #[test]
    fn csv_and_json_round_trip() {
        let rows = vec![
            vec![Some(0.0), Some(0.123456789012345), None],
            vec![Some(0.123456789012345), Some(0.0), Some(1.0)],
            vec![None, Some(1.0), Some(0.0)],
        ];
        let m = DistanceMatrix::from_rows(
            vec!["A".into(), "B".into(), "C".into()],
            MetricKind::Coherence,
            rows,
            None,
            vec!["Q".into()],
        )
        .unwrap();
        let csv = m.to_csv();
        assert_eq!(csv.lines().next(), Some("symbol,A,B,C"));
        assert_eq!(csv.lines().nth(1), Some("A,0,0.123456789012,NA"));
        let back = DistanceMatrix::read_csv(csv.as_bytes(), MetricKind::Coherence).unwrap();
        assert_eq!(back.get(0, 1), Some(0.123456789012));
        assert_eq!(back.get(0, 2), None);

        let json = m.to_json();
        let back = DistanceMatrix::from_json(&json).unwrap();
        assert_eq!(back.kind(), MetricKind::Coherence);
        assert_eq!(back.excluded(), ["Q"]);
        assert_eq!(back.get(1, 0), Some(0.123456789012));
        assert_eq!(back.to_json(), json);

        let without = m.without_symbols(&["C".into()]);
        assert!(without.is_complete());
        assert_eq!(without.excluded(), ["C", "Q"]);
    }
}
