use rayon::prelude::*;
use serde::Serialize;

use super::dataset::Dataset;
use crate::fingerprint::Seqnature;
use crate::metrics::Metric;
use crate::refinement::{refine, RefineError, RefinementConfig};
use crate::tabulation::EventId;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PrevalenceReport {
    pub dataset: String,
    pub technique: String,
    /// Events whose seqnature is nonempty.
    pub fingerprintable: usize,
    pub total_events: usize,
    /// `round(100 * fingerprintable / total_events)`, halves rounded up.
    pub percentage: u32,
    /// Set when the dataset has no events; `percentage` is then 0.
    pub empty_dataset: bool,
    /// Events in which every sample has at least one record.
    pub baseline_events: usize,
}

/// `round(100 * count / total)` with halves rounded up; 0 when `total` is 0.
pub fn percent_half_up(count: usize, total: usize) -> u32 {
    if total == 0 {
        return 0;
    }
    ((200 * count as u64 + total as u64) / (2 * total as u64)) as u32
}

/// Refines every event of the dataset in parallel. `config.sample_count` is
/// overridden by the dataset's sample count; `T_min` and `MinPts` are kept.
pub fn extract_all(
    ds: &Dataset,
    config: &RefinementConfig,
    metric: &Metric,
) -> Result<Vec<(EventId, Seqnature)>, RefineError> {
    let mut config = config.clone();
    if let Some(t) = ds.sample_count() {
        config.sample_count = t;
    }
    ds.events
        .par_iter()
        .map(|(&e, samples)| {
            let mut s = refine(samples, &config, metric)?;
            s.event_id = e;
            s.dataset = Some(ds.name.clone());
            Ok((e, s))
        })
        .collect()
}

pub fn report_from(ds: &Dataset, technique: String, seqnatures: &[(EventId, Seqnature)]) -> PrevalenceReport {
    let total = ds.events.len();
    let fingerprintable = seqnatures.iter().filter(|(_, s)| !s.is_empty()).count();
    let baseline_events = ds
        .events
        .values()
        .filter(|samples| samples.iter().all(|s| !s.records().is_empty()))
        .count();
    PrevalenceReport {
        dataset: ds.name.clone(),
        technique,
        fingerprintable,
        total_events: total,
        percentage: percent_half_up(fingerprintable, total),
        empty_dataset: total == 0,
        baseline_events,
    }
}

/// Share of events with a nonempty seqnature under `config`.
pub fn prevalence(ds: &Dataset, config: &RefinementConfig, metric: &Metric) -> Result<PrevalenceReport, RefineError> {
    let seqnatures = extract_all(ds, config, metric)?;
    Ok(report_from(ds, config.technique.kind.to_string(), &seqnatures))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::Technique;

    #[test]
    fn rounding() {
        assert_eq!(percent_half_up(95, 140), 68);
        assert_eq!(percent_half_up(964, 1000), 96);
        assert_eq!(percent_half_up(1000, 1000), 100);
        assert_eq!(percent_half_up(1, 8), 13);
        assert_eq!(percent_half_up(1, 200), 1);
        assert_eq!(percent_half_up(0, 0), 0);
    }

    #[test]
    fn empty_dataset_is_flagged() {
        let ds = Dataset::new("none");
        let cfg = RefinementConfig::strict(Technique::ebf(), 1, 1, 1);
        let r = prevalence(&ds, &cfg, &Metric::builtin(Technique::ebf()).unwrap()).unwrap();
        assert_eq!((r.total_events, r.percentage, r.empty_dataset), (0, 0, true));
    }
}
