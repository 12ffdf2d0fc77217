//! Run configuration: a JSON file whose values command-line flags override.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use serde::Deserialize;

use seqprint::metrics::{Technique, TechniqueKind};
use seqprint::refinement::RefinementConfig;

/// Every key is optional; unknown keys are rejected.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub technique: Option<TechniqueKind>,
    pub prefix_len: Option<usize>,
    pub n_min: Option<usize>,
    pub sample_count: Option<usize>,
    pub min_samples: Option<usize>,
    pub epsilon: Option<f64>,
    pub min_pts: Option<usize>,
    pub h: Option<u32>,
    pub jobs: Option<usize>,
    pub seed: Option<u64>,
    pub bins: Option<String>,
    pub window_secs: Option<String>,
    pub batch_size: Option<usize>,
    pub samples_dir: Option<PathBuf>,
    pub dataset_dirs: Option<Vec<PathBuf>>,
    pub fingerprints_dir: Option<PathBuf>,
    pub against_dirs: Option<Vec<PathBuf>>,
    pub out: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
}

impl RunConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("invalid config {}", path.display()))
    }
}

/// Refinement flags as given on the command line, before defaults.
#[derive(Debug, Clone, Default)]
pub struct RefineFlags {
    pub technique: Option<TechniqueKind>,
    pub prefix_len: Option<usize>,
    pub n_min: Option<usize>,
    pub sample_count: Option<usize>,
    pub min_samples: Option<usize>,
    pub epsilon: Option<f64>,
    pub min_pts: Option<usize>,
    pub h: Option<u32>,
}

/// Flags over file values over defaults. Endpoint techniques default to
/// `P = n_min = 1`; sequence techniques default to `P = 20` and need an
/// explicit `n_min`. `T_min` and `MinPts` default to `T`, and `T` to
/// `found_samples`.
pub fn resolve_refinement(flags: &RefineFlags, file: &RunConfig, found_samples: usize) -> anyhow::Result<RefinementConfig> {
    let kind = flags
        .technique
        .clone()
        .or_else(|| file.technique.clone())
        .unwrap_or(TechniqueKind::Sdbf);
    let endpoint = kind.is_endpoint();
    let prefix_len = flags
        .prefix_len
        .or(file.prefix_len)
        .unwrap_or(if endpoint { 1 } else { 20 });
    let n_min = match flags.n_min.or(file.n_min) {
        Some(n) => n,
        None if endpoint => 1,
        None => bail!("--n-min is required for technique {kind}"),
    };
    let t = flags.sample_count.or(file.sample_count).unwrap_or(found_samples);
    let cfg = RefinementConfig {
        prefix_len,
        n_min,
        sample_count: t,
        min_samples: flags.min_samples.or(file.min_samples).unwrap_or(t),
        epsilon: flags.epsilon.or(file.epsilon).unwrap_or(0.0),
        min_pts: flags.min_pts.or(file.min_pts).unwrap_or(t),
        technique: Technique::with_h(kind, flags.h.or(file.h).unwrap_or(0)),
    };
    cfg.validate()?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn endpoint_defaults() {
        let flags = RefineFlags {
            technique: Some(TechniqueKind::Ebf),
            ..Default::default()
        };
        let c = resolve_refinement(&flags, &RunConfig::default(), 10).unwrap();
        assert_eq!((c.prefix_len, c.n_min, c.sample_count, c.min_samples, c.min_pts), (1, 1, 10, 10, 10));
    }

    #[test]
    fn sequence_defaults() {
        let flags = RefineFlags {
            technique: Some(TechniqueKind::Sdbf),
            n_min: Some(2),
            ..Default::default()
        };
        let c = resolve_refinement(&flags, &RunConfig::default(), 10).unwrap();
        assert_eq!(c.prefix_len, 20);
        let err = resolve_refinement(&RefineFlags::default(), &RunConfig::default(), 10).unwrap_err();
        assert!(err.to_string().contains("--n-min"));
    }

    #[test]
    fn flags_override_file() {
        let file: RunConfig = serde_json::from_str(r#"{"technique":"esdbf","prefix_len":7,"n_min":3,"h":4}"#).unwrap();
        let flags = RefineFlags {
            prefix_len: Some(9),
            ..Default::default()
        };
        let c = resolve_refinement(&flags, &file, 5).unwrap();
        assert_eq!((c.prefix_len, c.n_min, c.technique.h), (9, 3, 4));
        assert_eq!(c.technique.kind, TechniqueKind::Esdbf);
        assert!(serde_json::from_str::<RunConfig>(r#"{"prefix":7}"#).is_err());
    }

    #[test]
    fn t_min_above_t_names_the_constraint() {
        let flags = RefineFlags {
            technique: Some(TechniqueKind::Ebf),
            sample_count: Some(10),
            min_samples: Some(11),
            ..Default::default()
        };
        let err = resolve_refinement(&flags, &RunConfig::default(), 10).unwrap_err();
        assert_eq!(err.to_string(), "T_min (11) must not exceed T (10)");
    }
}
