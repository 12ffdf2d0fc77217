//! Packet-sequence fingerprints ("seqnatures") of network events: extraction
//! from packet captures, matching, and dataset-level evaluation.

pub mod evaluation;
pub mod fingerprint;
pub mod ingest;
pub mod matcher;
pub mod metrics;
pub mod refinement;
pub mod tabulation;

pub use fingerprint::{summarize, Fingerprint, Seqnature, SummarySeqnature};
pub use matcher::{match_sample, MatchResult, Matcher};
pub use metrics::{Metric, Technique, TechniqueKind};
pub use refinement::{refine, RefinementConfig};
pub use tabulation::{PacketRecord, TabulatedTrafficSample};
