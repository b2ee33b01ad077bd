//! Analysis toolkit for coded collaborative problem solving dialogue.
//!
//! The pipeline reads timestamped, coded utterances together with each
//! student's phase-progression log ([`ingest`]), builds student–phase and
//! behaviour–phase interaction networks with engagement metrics and
//! binomial null-model pruning ([`hina`]), mines frequent behaviour
//! subsequences per phase with PrefixSpan ([`spm`]), and compares conditions
//! with rank-based statistics ([`stats`]). [`pipeline`] ties these together
//! and [`report`] renders the JSON, CSV and DOT artifacts.

pub mod framework;
pub mod hina;
pub mod ingest;
pub mod oracle;
pub mod pipeline;
pub mod report;
pub mod rng;
pub mod spm;
pub mod stats;
pub mod synth;

pub use framework::{
    load_framework, validate_dataset, CodedUtterance, Condition, Dimension, IndicatorCode, Phase,
    SessionDataset, StudentId, Subskill, Timestamp, TriadId, ValidationReport, Violation,
};
