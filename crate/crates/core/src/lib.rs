//! Market taxonomy trees from high-frequency price series.
//!
//! The pipeline splits each price series into trading sessions, turns every
//! session into standardized log-returns, measures pairwise dissimilarity with
//! either the correlation distance `sqrt(2(1 - rho))` or a coherence distance
//! (the root of the frequency-averaged coherence deficit), averages the
//! per-session distance matrices and extracts a minimum spanning tree that is
//! then scored against a-priori sector labels.
//!
//! Modules, bottom-up:
//!
//! - [`series`]: price ingestion, log-returns, standardization, session
//!   segmentation and grid alignment.
//! - [`spectral`]: Welch auto/cross spectra and magnitude-squared coherence.
//! - [`metrics`]: the two distances, the modeling-gain identity, distance
//!   matrices and their horizon average.
//! - [`graph`]: Kruskal MST, sector scores and DOT/GraphML/JSON export.
//! - [`synth`]: seeded generators with known ground truth.

// `!(x > y)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod graph;
pub mod metrics;
pub mod numfmt;
pub mod series;
pub mod spectral;
pub mod synth;

pub use error::{Error, Result};
