//! Flat `key = value` configuration with flag overrides.
//!
//! ```text
//! # comment
//! prices = data/prices.csv
//! calendar = data/calendar.csv
//! labels = data/labels.csv
//! metric = both
//! segment_length = 512
//! overlap = 0.5
//! window = hann
//! grid_step = 120
//! min_segment_length = 64
//! out = results
//! export = dot,graphml,json
//! skip_bad_rows = false
//! ```
//!
//! Relative paths in a config file resolve against the file's directory.

use std::path::{Path, PathBuf};

use cohtree::graph::ExportFormat;
use cohtree::metrics::MetricKind;
use cohtree::series::DEFAULT_MIN_SEGMENT_LENGTH;
use cohtree::spectral::{SpectralConfig, Window};

use crate::error::{CliError, CliResult};

pub const DEFAULT_GRID_STEP: i64 = 120;

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub prices: PathBuf,
    pub calendar: PathBuf,
    pub labels: Option<PathBuf>,
    pub metrics: Vec<MetricKind>,
    pub spectral: SpectralConfig,
    pub grid_step: i64,
    pub min_segment_length: usize,
    pub out: PathBuf,
    pub exports: Vec<ExportFormat>,
    pub skip_bad_rows: bool,
}

/// Unvalidated settings from a config file or the command line. `None`
/// means "not given here".
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigValues {
    pub prices: Option<PathBuf>,
    pub calendar: Option<PathBuf>,
    pub labels: Option<PathBuf>,
    pub metric: Option<String>,
    pub segment_length: Option<usize>,
    pub overlap: Option<f64>,
    pub window: Option<String>,
    pub grid_step: Option<i64>,
    pub min_segment_length: Option<usize>,
    pub out: Option<PathBuf>,
    pub export: Option<String>,
    pub skip_bad_rows: Option<bool>,
}

fn parse_value<T: std::str::FromStr>(
    source: &str,
    line: usize,
    key: &str,
    v: &str,
) -> CliResult<T> {
    v.parse()
        .map_err(|_| CliError::usage(format!("{source}:{line}: invalid value `{v}` for `{key}`")))
}

impl ConfigValues {
    pub fn parse(text: &str, source: &str, base: &Path) -> CliResult<Self> {
        let mut c = Self::default();
        let path = |v: &str| base.join(v);
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.trim();
            if content.is_empty() || content.starts_with('#') {
                continue;
            }
            let Some((key, value)) = content.split_once('=') else {
                return Err(CliError::usage(format!(
                    "{source}:{line}: expected `key = value`"
                )));
            };
            let (key, v) = (key.trim(), value.trim());
            match key {
                "prices" => c.prices = Some(path(v)),
                "calendar" => c.calendar = Some(path(v)),
                "labels" => c.labels = Some(path(v)),
                "metric" => c.metric = Some(v.to_string()),
                "segment_length" => c.segment_length = Some(parse_value(source, line, key, v)?),
                "overlap" => c.overlap = Some(parse_value(source, line, key, v)?),
                "window" => c.window = Some(v.to_string()),
                "grid_step" => c.grid_step = Some(parse_value(source, line, key, v)?),
                "min_segment_length" => {
                    c.min_segment_length = Some(parse_value(source, line, key, v)?)
                }
                "out" => c.out = Some(path(v)),
                "export" => c.export = Some(v.to_string()),
                "skip_bad_rows" => c.skip_bad_rows = Some(parse_value(source, line, key, v)?),
                _ => {
                    return Err(CliError::usage(format!(
                        "{source}:{line}: unknown key `{key}`"
                    )))
                }
            }
        }
        Ok(c)
    }

    pub fn read_file(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::usage(format!("cannot read config {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        Self::parse(&text, &path.display().to_string(), base)
    }

    /// Fields set in `over` replace those in `self`.
    pub fn overridden_by(self, over: ConfigValues) -> Self {
        Self {
            prices: over.prices.or(self.prices),
            calendar: over.calendar.or(self.calendar),
            labels: over.labels.or(self.labels),
            metric: over.metric.or(self.metric),
            segment_length: over.segment_length.or(self.segment_length),
            overlap: over.overlap.or(self.overlap),
            window: over.window.or(self.window),
            grid_step: over.grid_step.or(self.grid_step),
            min_segment_length: over.min_segment_length.or(self.min_segment_length),
            out: over.out.or(self.out),
            export: over.export.or(self.export),
            skip_bad_rows: over.skip_bad_rows.or(self.skip_bad_rows),
        }
    }

    /// Applies defaults and checks that every referenced input exists.
    pub fn build(self) -> CliResult<PipelineConfig> {
        let required = |p: Option<PathBuf>, key: &str| -> CliResult<PathBuf> {
            let p =
                p.ok_or_else(|| CliError::usage(format!("missing required setting `{key}`")))?;
            if !p.is_file() {
                return Err(CliError::usage(format!(
                    "{key} file not found: {}",
                    p.display()
                )));
            }
            Ok(p)
        };
        let prices = required(self.prices, "prices")?;
        let calendar = required(self.calendar, "calendar")?;
        let labels = match self.labels {
            Some(p) => Some(required(Some(p), "labels")?),
            None => None,
        };
        let metrics = parse_metrics(self.metric.as_deref().unwrap_or("both"))?;
        let window: Window = match &self.window {
            Some(w) => w
                .parse()
                .map_err(|e: cohtree::Error| CliError::usage(e.to_string()))?,
            None => Window::default(),
        };
        let defaults = SpectralConfig::default();
        let spectral = SpectralConfig::new(
            self.segment_length.unwrap_or(defaults.segment_length()),
            self.overlap.unwrap_or(defaults.overlap_fraction()),
            window,
        )
        .map_err(|e| CliError::usage(e.to_string()))?;
        let grid_step = self.grid_step.unwrap_or(DEFAULT_GRID_STEP);
        if grid_step <= 0 {
            return Err(CliError::usage(format!(
                "grid_step must be positive, got {grid_step}"
            )));
        }
        let min_segment_length = self
            .min_segment_length
            .unwrap_or(DEFAULT_MIN_SEGMENT_LENGTH);
        if min_segment_length < 3 {
            return Err(CliError::usage("min_segment_length must be at least 3"));
        }
        let exports = parse_exports(self.export.as_deref().unwrap_or("dot,graphml,json"))?;
        let out = self
            .out
            .ok_or_else(|| CliError::usage("missing required setting `out`"))?;
        Ok(PipelineConfig {
            prices,
            calendar,
            labels,
            metrics,
            spectral,
            grid_step,
            min_segment_length,
            out,
            exports,
            skip_bad_rows: self.skip_bad_rows.unwrap_or(false),
        })
    }
}

pub fn parse_metrics(s: &str) -> CliResult<Vec<MetricKind>> {
    match s {
        "both" => Ok(MetricKind::ALL.to_vec()),
        other => other
            .parse::<MetricKind>()
            .map(|k| vec![k])
            .map_err(|e| CliError::usage(e.to_string())),
    }
}

pub fn parse_exports(s: &str) -> CliResult<Vec<ExportFormat>> {
    let mut out: Vec<ExportFormat> = Vec::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let f: ExportFormat = part
            .parse()
            .map_err(|e: cohtree::Error| CliError::usage(e.to_string()))?;
        if !out.contains(&f) {
            out.push(f);
        }
    }
    if out.is_empty() {
        return Err(CliError::usage("no export format given"));
    }
    Ok(out)
}

impl PipelineConfig {
    /// The effective settings in config-file syntax, with absolute paths.
    pub fn to_kv(&self) -> String {
        let abs = |p: &Path| std::path::absolute(p).unwrap_or_else(|_| p.to_path_buf());
        let metric = if self.metrics.len() == MetricKind::ALL.len() {
            "both".to_string()
        } else {
            self.metrics[0].to_string()
        };
        let exports: Vec<&str> = self.exports.iter().map(|f| f.extension()).collect();
        let mut s = String::new();
        s.push_str(&format!("prices = {}\n", abs(&self.prices).display()));
        s.push_str(&format!("calendar = {}\n", abs(&self.calendar).display()));
        if let Some(l) = &self.labels {
            s.push_str(&format!("labels = {}\n", abs(l).display()));
        }
        s.push_str(&format!("metric = {metric}\n"));
        s.push_str(&format!(
            "segment_length = {}\n",
            self.spectral.segment_length()
        ));
        s.push_str(&format!("overlap = {}\n", self.spectral.overlap_fraction()));
        s.push_str(&format!("window = {}\n", self.spectral.window()));
        s.push_str(&format!("grid_step = {}\n", self.grid_step));
        s.push_str(&format!(
            "min_segment_length = {}\n",
            self.min_segment_length
        ));
        s.push_str(&format!("out = {}\n", abs(&self.out).display()));
        s.push_str(&format!("export = {}\n", exports.join(",")));
        s.push_str(&format!("skip_bad_rows = {}\n", self.skip_bad_rows));
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_inputs(dir: &Path) {
        std::fs::write(dir.join("p.csv"), "timestamp,symbol,price\n").unwrap();
        std::fs::write(dir.join("c.csv"), "open,close\n").unwrap();
    }

    #[test]
    fn file_flags_and_defaults() {
        let dir = std::env::temp_dir().join(format!("cohtree-cfg-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        write_inputs(&dir);
        let text = "# run\nprices = p.csv\ncalendar=c.csv\nmetric = coherence\nsegment_length = 64\nout = res\n";
        let file = ConfigValues::parse(text, "run.conf", &dir).unwrap();
        let flags = ConfigValues {
            metric: Some("both".into()),
            export: Some("json, dot".into()),
            ..Default::default()
        };
        let cfg = file.overridden_by(flags).build().unwrap();
        assert_eq!(cfg.prices, dir.join("p.csv"));
        assert_eq!(cfg.metrics, MetricKind::ALL.to_vec());
        assert_eq!(cfg.spectral.segment_length(), 64);
        assert_eq!(cfg.spectral.overlap_fraction(), 0.5);
        assert_eq!(cfg.grid_step, DEFAULT_GRID_STEP);
        assert_eq!(cfg.exports, vec![ExportFormat::Json, ExportFormat::Dot]);

        let again = ConfigValues::parse(&cfg.to_kv(), "x", Path::new(""))
            .unwrap()
            .build()
            .unwrap();
        assert_eq!(again, cfg);
        std::fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn errors_are_usage_errors() {
        let base = Path::new("");
        let e = ConfigValues::parse("color = red\n", "a.conf", base).unwrap_err();
        assert_eq!(e.to_string(), "a.conf:1: unknown key `color`");
        let e = ConfigValues::parse("\noverlap = lots\n", "a.conf", base).unwrap_err();
        assert!(e.to_string().starts_with("a.conf:2:"));
        let missing = ConfigValues {
            prices: Some("/nonexistent/prices.csv".into()),
            ..Default::default()
        };
        let e = missing.build().unwrap_err();
        assert_eq!(e.exit_code(), 2);
        assert!(e.to_string().contains("/nonexistent/prices.csv"));
        assert!(parse_metrics("spectral").is_err());
        assert!(parse_exports("png").is_err());
    }
}
