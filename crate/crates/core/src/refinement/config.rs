use thiserror::Error;

use crate::metrics::Technique;

/// Tunables of fingerprint refinement.
#[derive(Debug, Clone, PartialEq)]
pub struct RefinementConfig {
    /// `P`: only the first `prefix_len` packets of each stream are windowed.
    pub prefix_len: usize,
    /// Shortest window length tried.
    pub n_min: usize,
    /// `T`: number of traffic samples per event.
    pub sample_count: usize,
    /// `T_min`: distinct samples a cluster must span.
    pub min_samples: usize,
    /// Cluster radius.
    pub epsilon: f64,
    /// Minimum cluster population.
    pub min_pts: usize,
    pub technique: Technique,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("n_min must be at least 1")]
    NMinZero,
    #[error("P ({prefix_len}) must be at least n_min ({n_min})")]
    PrefixBelowNMin { prefix_len: usize, n_min: usize },
    #[error("T_min must be at least 1")]
    TMinZero,
    #[error("T_min ({min_samples}) must not exceed T ({sample_count})")]
    TMinAboveT { min_samples: usize, sample_count: usize },
    #[error("epsilon must be a non-negative number, got {0}")]
    BadEpsilon(f64),
    #[error("min_pts must be at least 1")]
    MinPtsZero,
}

impl RefinementConfig {
    /// The strict configuration: `T_min = MinPts = T`, `epsilon = 0`, `h = 0`.
    pub fn strict(technique: Technique, sample_count: usize, prefix_len: usize, n_min: usize) -> Self {
        RefinementConfig {
            prefix_len,
            n_min,
            sample_count,
            min_samples: sample_count,
            epsilon: 0.0,
            min_pts: sample_count,
            technique,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.n_min == 0 {
            return Err(ConfigError::NMinZero);
        }
        if self.prefix_len < self.n_min {
            return Err(ConfigError::PrefixBelowNMin {
                prefix_len: self.prefix_len,
                n_min: self.n_min,
            });
        }
        if self.min_samples == 0 {
            return Err(ConfigError::TMinZero);
        }
        if self.min_samples > self.sample_count {
            return Err(ConfigError::TMinAboveT {
                min_samples: self.min_samples,
                sample_count: self.sample_count,
            });
        }
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return Err(ConfigError::BadEpsilon(self.epsilon));
        }
        if self.min_pts == 0 {
            return Err(ConfigError::MinPtsZero);
        }
        Ok(())
    }
}
