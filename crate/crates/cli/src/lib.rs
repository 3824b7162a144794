//! Command-line front end: `cohtree run` builds correlation and coherence
//! taxonomy trees from price CSVs, `cohtree synth` writes synthetic inputs.

pub mod config;
pub mod error;
pub mod pipeline;
pub mod synthetic;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use cohtree::synth::{Driver, FactorMarketSpec};

pub use config::{ConfigValues, PipelineConfig};
pub use error::{CliError, CliResult};
pub use pipeline::{run_pipeline, RunReport};
pub use synthetic::{generate_synthetic, SynthKind, SynthOptions};

#[derive(Debug, Parser)]
#[command(
    name = "cohtree",
    version,
    about = "Market taxonomy trees from correlation and coherence distances"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compute distance matrices, spanning trees and scores.
    Run(RunArgs),
    /// Write a synthetic prices/calendar/labels set.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Flat key=value config file; flags override its settings.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub prices: Option<PathBuf>,
    #[arg(long)]
    pub calendar: Option<PathBuf>,
    #[arg(long)]
    pub labels: Option<PathBuf>,
    /// correlation, coherence or both.
    #[arg(long)]
    pub metric: Option<String>,
    /// Welch segment length, a power of two >= 16.
    #[arg(long)]
    pub segment_length: Option<usize>,
    /// Welch overlap fraction in [0, 1).
    #[arg(long)]
    pub overlap: Option<f64>,
    /// hann or rectangular.
    #[arg(long)]
    pub window: Option<String>,
    /// Resampling grid step in seconds.
    #[arg(long)]
    pub grid_step: Option<i64>,
    /// Minimum samples per symbol and session.
    #[arg(long)]
    pub min_segment_length: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub skip_bad_rows: bool,
    /// Comma-separated subset of dot, graphml, json.
    #[arg(long)]
    pub export: Option<String>,
}

impl RunArgs {
    pub fn into_config(self) -> CliResult<PipelineConfig> {
        let file = match &self.config {
            Some(path) => ConfigValues::read_file(path)?,
            None => ConfigValues::default(),
        };
        let flags = ConfigValues {
            prices: self.prices,
            calendar: self.calendar,
            labels: self.labels,
            metric: self.metric,
            segment_length: self.segment_length,
            overlap: self.overlap,
            window: self.window,
            grid_step: self.grid_step,
            min_segment_length: self.min_segment_length,
            out: self.out,
            export: self.export,
            skip_bad_rows: self.skip_bad_rows.then_some(true),
        };
        file.overridden_by(flags).build()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SynthKindArg {
    White,
    Ar1,
    Delayed,
    Factor,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, value_enum, default_value = "factor")]
    pub kind: SynthKindArg,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Returns per session.
    #[arg(long, default_value_t = 8192)]
    pub length: usize,
    #[arg(long, default_value_t = 1)]
    pub sessions: usize,
    /// Seconds between samples.
    #[arg(long, default_value_t = config::DEFAULT_GRID_STEP)]
    pub step: i64,
    /// Epoch seconds of the first session open.
    #[arg(long, default_value_t = 1_204_554_600)]
    pub start: i64,
    /// Standard deviation of one log-return.
    #[arg(long, default_value_t = 0.001)]
    pub scale: f64,
    /// Symbols for white and ar1.
    #[arg(long, default_value_t = 2)]
    pub count: usize,
    #[arg(long, default_value_t = 0.5, allow_negative_numbers = true)]
    pub phi: f64,
    #[arg(long, default_value_t = 1)]
    pub delay: usize,
    #[arg(long, default_value_t = 3)]
    pub groups: usize,
    /// Members per group.
    #[arg(long, default_value_t = 4)]
    pub size: usize,
    #[arg(long, default_value_t = 0.9)]
    pub loading: f64,
    /// Extra delay, in samples, of each successive group member.
    #[arg(long, default_value_t = 1)]
    pub lag: usize,
    /// Drive each group factor with AR(1) of this coefficient instead of white noise.
    #[arg(long, allow_negative_numbers = true)]
    pub factor_phi: Option<f64>,
}

impl SynthArgs {
    pub fn into_options(self) -> SynthOptions {
        let kind = match self.kind {
            SynthKindArg::White => SynthKind::White { count: self.count },
            SynthKindArg::Ar1 => SynthKind::Ar1 {
                count: self.count,
                phi: self.phi,
            },
            SynthKindArg::Delayed => SynthKind::Delayed { delay: self.delay },
            SynthKindArg::Factor => {
                let mut spec =
                    FactorMarketSpec::uniform(self.groups, self.size, self.loading, self.lag);
                if let Some(phi) = self.factor_phi {
                    for g in &mut spec.groups {
                        g.driver = Driver::Ar1(phi);
                    }
                }
                SynthKind::Factor(spec)
            }
        };
        SynthOptions {
            kind,
            length: self.length,
            sessions: self.sessions,
            seed: self.seed,
            step: self.step,
            start: self.start,
            scale: self.scale,
            out: self.out,
        }
    }
}

/// Runs one parsed command, printing a short summary to stdout.
pub fn execute(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Run(args) => {
            let cfg = args.into_config()?;
            let report = run_pipeline(&cfg)?;
            for o in &report.outcomes {
                println!(
                    "{}: {} symbols, {} sessions, tree weight {}, sector adjacency {:.3}, sector subtree {:.3}",
                    o.kind,
                    o.matrix.len(),
                    o.sessions_used.len(),
                    cohtree::numfmt::fmt_sig(o.tree.total_weight()),
                    o.scores.sector_adjacency,
                    o.scores.sector_subtree,
                );
            }
            if !report.exclusions.is_empty() {
                println!("{} exclusions, see report.json", report.exclusions.len());
            }
            println!(
                "wrote {} files to {}",
                report.files.len(),
                cfg.out.display()
            );
            Ok(())
        }
        Command::Synth(args) => {
            let opts = args.into_options();
            let files = generate_synthetic(&opts)?;
            for f in files {
                println!("{}", f.display());
            }
            Ok(())
        }
    }
}
