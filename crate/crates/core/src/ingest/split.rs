//! Cutting a long capture into per-event traffic samples.

use std::fs;
use std::path::Path;

use thiserror::Error;

use super::capture::{RawCapture, Timestamp};

#[derive(Debug, Error)]
pub enum SplitError {
    #[error("window length must be positive")]
    NonPositiveWindow,
    #[error("event timestamps are not sorted ascending (entry {0})")]
    Unsorted(usize),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: invalid timestamp `{text}`")]
    BadTimestamp { line: usize, text: String },
}

/// One capture per event timestamp `t`, holding exactly the packets with
/// timestamps in `[t, t + window)`. Overlapping windows share packets.
pub fn split_by_events(
    raw: &RawCapture,
    event_timestamps: &[Timestamp],
    window_nanos: i64,
) -> Result<Vec<RawCapture>, SplitError> {
    if window_nanos <= 0 {
        return Err(SplitError::NonPositiveWindow);
    }
    if let Some(i) = event_timestamps.windows(2).position(|w| w[0] > w[1]) {
        return Err(SplitError::Unsorted(i + 1));
    }
    let sorted = raw.packets.windows(2).all(|w| w[0].timestamp <= w[1].timestamp);
    let out = event_timestamps
        .iter()
        .map(|&t| {
            let end = t.saturating_add_nanos(window_nanos);
            let packets = if sorted {
                let lo = raw.packets.partition_point(|p| p.timestamp < t);
                let hi = raw.packets.partition_point(|p| p.timestamp < end);
                raw.packets[lo..hi].to_vec()
            } else {
                raw.packets
                    .iter()
                    .filter(|p| p.timestamp >= t && p.timestamp < end)
                    .cloned()
                    .collect()
            };
            RawCapture { packets }
        })
        .collect();
    Ok(out)
}

/// Parses a window length given in decimal seconds.
pub fn window_from_secs(text: &str) -> Result<i64, SplitError> {
    let ts: Timestamp = text.trim().parse().map_err(|_| SplitError::BadTimestamp {
        line: 0,
        text: text.to_string(),
    })?;
    if ts.as_nanos() <= 0 {
        return Err(SplitError::NonPositiveWindow);
    }
    Ok(ts.as_nanos())
}

/// Reads one decimal epoch-seconds timestamp per line. Blank lines and lines
/// starting with `#` are skipped.
pub fn read_event_timestamps(path: &Path) -> Result<Vec<Timestamp>, SplitError> {
    parse_event_timestamps(&fs::read_to_string(path)?)
}

pub fn parse_event_timestamps(text: &str) -> Result<Vec<Timestamp>, SplitError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        out.push(line.parse().map_err(|_| SplitError::BadTimestamp {
            line: i + 1,
            text: line.to_string(),
        })?);
    }
    Ok(out)
}
