use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::tabulation::{read_sample_expect, write_sample, EventId, SampleId, TabulatedTrafficSample, TabulationError};

/// Samples of many events. On disk: `<dir>/<event_id>/<sample_id>.csv`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Dataset {
    pub name: String,
    pub events: BTreeMap<EventId, Vec<TabulatedTrafficSample>>,
}

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("I/O error at {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Sample { path: PathBuf, source: TabulationError },
    #[error("events have different sample counts ({0} has {1}, {2} has {3})")]
    UnevenT(EventId, usize, EventId, usize),
    #[error("event {0} has no samples")]
    NoSamples(EventId),
}

impl Dataset {
    pub fn new(name: &str) -> Self {
        Dataset {
            name: name.to_string(),
            events: BTreeMap::new(),
        }
    }

    /// Samples per event, when the dataset has events.
    pub fn sample_count(&self) -> Option<usize> {
        self.events.values().next().map(Vec::len)
    }

    /// Checks that every event has the same, nonzero number of samples.
    pub fn validate(&self) -> Result<(), DatasetError> {
        let mut first: Option<(EventId, usize)> = None;
        for (&e, samples) in &self.events {
            if samples.is_empty() {
                return Err(DatasetError::NoSamples(e));
            }
            match first {
                None => first = Some((e, samples.len())),
                Some((e0, t0)) if t0 != samples.len() => {
                    return Err(DatasetError::UnevenT(e0, t0, e, samples.len()));
                }
                _ => {}
            }
        }
        Ok(())
    }
}

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> DatasetError + '_ {
    move |source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn numeric_entries<T: std::str::FromStr + Ord>(dir: &Path, want_dir: bool) -> Result<Vec<(T, PathBuf)>, DatasetError> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).map_err(io(dir))? {
        let entry = entry.map_err(io(dir))?;
        let path = entry.path();
        let is_dir = path.is_dir();
        let stem = if want_dir {
            path.file_name()
        } else {
            (path.extension().and_then(|e| e.to_str()) == Some("csv"))
                .then(|| path.file_stem())
                .flatten()
        };
        if is_dir != want_dir {
            continue;
        }
        if let Some(id) = stem.and_then(|s| s.to_str()).and_then(|s| s.parse::<T>().ok()) {
            out.push((id, path));
        }
    }
    out.sort_by(|a, b| a.0.cmp(&b.0));
    Ok(out)
}

/// Loads `<dir>/<event_id>/<sample_id>.csv`; entries with non-numeric names
/// are ignored. The dataset is named after the directory.
pub fn load_dataset(dir: &Path) -> Result<Dataset, DatasetError> {
    let name = dir
        .file_name()
        .and_then(|n| n.to_str())
        .unwrap_or("dataset")
        .to_string();
    let mut ds = Dataset::new(&name);
    for (event_id, edir) in numeric_entries::<EventId>(dir, true)? {
        let mut samples = Vec::new();
        for (sample_id, path) in numeric_entries::<SampleId>(&edir, false)? {
            let s = read_sample_expect(&path, event_id, sample_id).map_err(|source| DatasetError::Sample {
                path: path.clone(),
                source,
            })?;
            samples.push(s);
        }
        ds.events.insert(event_id, samples);
    }
    ds.validate()?;
    Ok(ds)
}

pub fn write_dataset(ds: &Dataset, dir: &Path) -> Result<(), DatasetError> {
    for (event_id, samples) in &ds.events {
        let edir = dir.join(event_id.to_string());
        fs::create_dir_all(&edir).map_err(io(&edir))?;
        for s in samples {
            let path = edir.join(format!("{}.csv", s.sample_id()));
            write_sample(s, &path).map_err(|source| DatasetError::Sample {
                path: path.clone(),
                source,
            })?;
        }
    }
    Ok(())
}
