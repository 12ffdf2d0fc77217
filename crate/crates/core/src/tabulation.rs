//! Tabulated traffic samples: one feature row per payload-carrying packet.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use thiserror::Error;

use crate::ingest::{Direction, DomainKind, DomainLabel, TcpStreamRecord};

pub type EventId = u64;
pub type SampleId = u32;
pub type StreamId = u32;

pub const CSV_HEADER: [&str; 8] = [
    "event_id",
    "sample_id",
    "stream_id",
    "domain",
    "domain_kind",
    "position_in_stream",
    "size",
    "direction",
];

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PacketRecord {
    pub event_id: EventId,
    pub sample_id: SampleId,
    pub stream_id: StreamId,
    pub domain: DomainLabel,
    pub position_in_stream: u32,
    pub size: u32,
    pub direction: Direction,
}

#[derive(Debug, Error)]
pub enum TabulationError {
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
    #[error("unexpected header `{0}` (expected `{expected}`)", expected = CSV_HEADER.join(","))]
    BadHeader(String),
    #[error("line {line}: {message}")]
    Row { line: u64, message: String },
    #[error("record of stream {stream_id} has ids ({event_id}, {sample_id}) but the sample is ({expected_event}, {expected_sample})")]
    ForeignRecord {
        stream_id: StreamId,
        event_id: EventId,
        sample_id: SampleId,
        expected_event: EventId,
        expected_sample: SampleId,
    },
    #[error("stream {stream_id}: expected position {expected}, found {found}")]
    PositionGap { stream_id: StreamId, expected: u32, found: u32 },
    #[error("stream {0} carries more than one domain")]
    MixedDomains(StreamId),
}

/// All packet records of one event invocation, kept in serialized
/// (timestamp) order, with a per-stream index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TabulatedTrafficSample {
    event_id: EventId,
    sample_id: SampleId,
    records: Vec<PacketRecord>,
    streams: BTreeMap<StreamId, Vec<usize>>,
}

impl TabulatedTrafficSample {
    /// Validates and indexes `records`, which must be in global packet order.
    pub fn new(event_id: EventId, sample_id: SampleId, records: Vec<PacketRecord>) -> Result<Self, TabulationError> {
        let mut streams: BTreeMap<StreamId, Vec<usize>> = BTreeMap::new();
        for (i, r) in records.iter().enumerate() {
            if r.event_id != event_id || r.sample_id != sample_id {
                return Err(TabulationError::ForeignRecord {
                    stream_id: r.stream_id,
                    event_id: r.event_id,
                    sample_id: r.sample_id,
                    expected_event: event_id,
                    expected_sample: sample_id,
                });
            }
            let idx = streams.entry(r.stream_id).or_default();
            let expected = idx.len() as u32 + 1;
            if r.position_in_stream != expected {
                return Err(TabulationError::PositionGap {
                    stream_id: r.stream_id,
                    expected,
                    found: r.position_in_stream,
                });
            }
            if let Some(&first) = idx.first() {
                if records[first].domain != r.domain {
                    return Err(TabulationError::MixedDomains(r.stream_id));
                }
            }
            idx.push(i);
        }
        Ok(TabulatedTrafficSample {
            event_id,
            sample_id,
            records,
            streams,
        })
    }

    pub fn empty(event_id: EventId, sample_id: SampleId) -> Self {
        TabulatedTrafficSample {
            event_id,
            sample_id,
            records: Vec::new(),
            streams: BTreeMap::new(),
        }
    }

    pub fn event_id(&self) -> EventId {
        self.event_id
    }

    pub fn sample_id(&self) -> SampleId {
        self.sample_id
    }

    /// Records in serialized order.
    pub fn records(&self) -> &[PacketRecord] {
        &self.records
    }

    pub fn into_records(self) -> Vec<PacketRecord> {
        self.records
    }

    pub fn stream_ids(&self) -> impl Iterator<Item = StreamId> + '_ {
        self.streams.keys().copied()
    }

    pub fn stream_count(&self) -> usize {
        self.streams.len()
    }

    /// Records of one stream ordered by position.
    pub fn stream(&self, id: StreamId) -> Vec<&PacketRecord> {
        self.streams
            .get(&id)
            .map(|idx| idx.iter().map(|&i| &self.records[i]).collect())
            .unwrap_or_default()
    }

    /// Every stream in ascending id order.
    pub fn streams(&self) -> impl Iterator<Item = (StreamId, Vec<&PacketRecord>)> + '_ {
        self.streams
            .iter()
            .map(|(&id, idx)| (id, idx.iter().map(|&i| &self.records[i]).collect()))
    }

    /// Same records under different ids.
    pub fn relabel(&self, event_id: EventId, sample_id: SampleId) -> Self {
        let records = self
            .records
            .iter()
            .map(|r| PacketRecord {
                event_id,
                sample_id,
                ..r.clone()
            })
            .collect();
        TabulatedTrafficSample {
            event_id,
            sample_id,
            records,
            streams: self.streams.clone(),
        }
    }
}

/// One record per stream packet, rows ordered by capture time across streams.
pub fn tabulate(streams: &[TcpStreamRecord], event_id: EventId, sample_id: SampleId) -> TabulatedTrafficSample {
    let mut rows: Vec<(_, _, PacketRecord)> = Vec::new();
    for s in streams {
        for p in &s.packets {
            rows.push((
                p.timestamp,
                p.frame_index,
                PacketRecord {
                    event_id,
                    sample_id,
                    stream_id: s.stream_id,
                    domain: s.domain.clone(),
                    position_in_stream: p.position,
                    size: p.size,
                    direction: p.direction,
                },
            ));
        }
    }
    rows.sort_by_key(|(t, f, r)| (*t, *f, r.stream_id, r.position_in_stream));
    let records = rows.into_iter().map(|(_, _, r)| r).collect();
    TabulatedTrafficSample::new(event_id, sample_id, records).expect("assembled streams are consistent")
}

pub fn write_sample_to<W: Write>(sample: &TabulatedTrafficSample, out: W) -> Result<(), TabulationError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in &sample.records {
        w.write_record([
            r.event_id.to_string().as_str(),
            &r.sample_id.to_string(),
            &r.stream_id.to_string(),
            r.domain.value(),
            r.domain.kind().as_str(),
            &r.position_in_stream.to_string(),
            &r.size.to_string(),
            r.direction.as_str(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Writes the CSV atomically: a temporary file in the target directory is
/// renamed over `path`.
pub fn write_sample(sample: &TabulatedTrafficSample, path: &Path) -> Result<(), TabulationError> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    write_sample_to(sample, BufWriter::new(tmp.as_file_mut()))?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| TabulationError::Io(e.error))?;
    Ok(())
}

fn field<T: std::str::FromStr>(rec: &csv::StringRecord, i: usize, line: u64) -> Result<T, TabulationError>
where
    T::Err: std::fmt::Display,
{
    let raw = rec.get(i).unwrap_or("");
    raw.parse().map_err(|e| TabulationError::Row {
        line,
        message: format!("{}: `{raw}`: {e}", CSV_HEADER[i]),
    })
}

/// Parses CSV rows. `ids` supplies the sample's ids when the file holds no
/// rows; when rows exist they must agree with it.
pub fn read_sample_from<R: Read>(
    input: R,
    ids: Option<(EventId, SampleId)>,
) -> Result<TabulatedTrafficSample, TabulationError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).flexible(true).from_reader(input);
    let mut rows = rdr.records();
    match rows.next() {
        None => return Err(TabulationError::BadHeader(String::new())),
        Some(h) => {
            let h = h?;
            if h.iter().ne(CSV_HEADER) {
                return Err(TabulationError::BadHeader(h.iter().collect::<Vec<_>>().join(",")));
            }
        }
    }
    let mut records = Vec::new();
    for rec in rows {
        let rec = rec?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        if rec.len() != CSV_HEADER.len() {
            return Err(TabulationError::Row {
                line,
                message: format!("expected {} fields, found {}", CSV_HEADER.len(), rec.len()),
            });
        }
        let kind: DomainKind = field(&rec, 4, line)?;
        let domain = DomainLabel::new(&rec[3], kind).map_err(|e| TabulationError::Row {
            line,
            message: format!("domain: {e}"),
        })?;
        let position_in_stream: u32 = field(&rec, 5, line)?;
        if position_in_stream == 0 {
            return Err(TabulationError::Row {
                line,
                message: "position_in_stream must be at least 1".into(),
            });
        }
        records.push(PacketRecord {
            event_id: field(&rec, 0, line)?,
            sample_id: field(&rec, 1, line)?,
            stream_id: field(&rec, 2, line)?,
            domain,
            position_in_stream,
            size: field(&rec, 6, line)?,
            direction: field(&rec, 7, line)?,
        });
    }
    let (event_id, sample_id) = match (records.first(), ids) {
        (Some(r), _) => (r.event_id, r.sample_id),
        (None, Some(ids)) => ids,
        (None, None) => (0, 0),
    };
    let sample = TabulatedTrafficSample::new(event_id, sample_id, records)?;
    if let Some((e, s)) = ids {
        if (e, s) != (event_id, sample_id) {
            let r = &sample.records[0];
            return Err(TabulationError::ForeignRecord {
                stream_id: r.stream_id,
                event_id,
                sample_id,
                expected_event: e,
                expected_sample: s,
            });
        }
    }
    Ok(sample)
}

/// Ids implied by the dataset layout `<dir>/<event_id>/<sample_id>.csv`.
pub fn ids_from_path(path: &Path) -> Option<(EventId, SampleId)> {
    let sample = path.file_stem()?.to_str()?.parse().ok()?;
    let event = path.parent()?.file_name()?.to_str()?.parse().ok()?;
    Some((event, sample))
}

/// Reads a sample. A header-only file takes its ids from the dataset layout
/// of its path, or (0, 0) when the path does not follow it.
pub fn read_sample(path: &Path) -> Result<TabulatedTrafficSample, TabulationError> {
    let f = File::open(path)?;
    let ids = ids_from_path(path);
    let mut s = read_sample_from(std::io::BufReader::new(f), None)?;
    if s.records.is_empty() {
        if let Some((e, id)) = ids {
            s = TabulatedTrafficSample::empty(e, id);
        }
    }
    Ok(s)
}

/// Reads a sample whose ids are known in advance; rows must carry them.
pub fn read_sample_expect(path: &Path, event_id: EventId, sample_id: SampleId) -> Result<TabulatedTrafficSample, TabulationError> {
    let f = File::open(path)?;
    read_sample_from(std::io::BufReader::new(f), Some((event_id, sample_id)))
}
