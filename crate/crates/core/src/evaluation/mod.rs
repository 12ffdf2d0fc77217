//! Dataset-level analyses.

pub mod dataset;
pub mod fp;
pub mod merge;
pub mod prevalence;
pub mod synth;

pub use dataset::{load_dataset, write_dataset, Dataset, DatasetError};
pub use fp::{false_positive_scan, Bins, FalsePositiveReport, FpEntry, FpError, Journal, ScanFingerprint, ScanOptions};
pub use merge::{merge_corpora, merge_samples, MergeError};
pub use prevalence::{extract_all, percent_half_up, prevalence, report_from, PrevalenceReport};
pub use synth::{generate, SynthError, SynthOutput, SynthPlan};
