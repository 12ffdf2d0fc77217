//! Seeded synthetic datasets with planted sequences and known ground truth.
//!
//! Every stream of every sample is generated; planted sequences sit inside
//! their own stream between a noise prefix and a noise suffix. In `disjoint`
//! noise mode sample `j` only uses noise sizes `≡ j (mod T)` and noise
//! domains unique to that sample, so no noise window can recur in two
//! samples. Plans in that mode are validated so that under strict
//! refinement (ε = 0, `h = 0`, `T_min = MinPts = T`, `n_min ≤ L ≤ P - prefix`)
//! the extracted clusters are exactly the planted occurrences.

use std::collections::BTreeMap;
use std::fs;
use std::net::IpAddr;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::dataset::Dataset;
use crate::ingest::{Direction, DomainLabel};
use crate::metrics::{PacketSequence, SeqPacket};
use crate::refinement::Cluster;
use crate::tabulation::{EventId, PacketRecord, SampleId, StreamId, TabulatedTrafficSample};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseMode {
    Disjoint,
    Independent,
}

/// Inclusive ranges drawn uniformly.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSpec {
    pub mode: NoiseMode,
    /// Noise-only streams per sample.
    pub streams: (u32, u32),
    /// Packets per noise-only stream.
    pub packets: (u32, u32),
    /// Noise packets before a planted sequence in its stream.
    pub prefix: (u32, u32),
    /// Noise packets after a planted sequence in its stream.
    pub suffix: (u32, u32),
    pub sizes: (u32, u32),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlantedSpec {
    /// Hostname, or an IP address.
    pub domain: String,
    pub packets: Vec<SeqPacket>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EventPlan {
    pub event_id: EventId,
    #[serde(default)]
    pub planted: Vec<PlantedSpec>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthPlan {
    #[serde(default = "default_name")]
    pub name: String,
    #[serde(default)]
    pub seed: u64,
    pub sample_count: usize,
    pub noise: NoiseSpec,
    pub events: Vec<EventPlan>,
}

fn default_name() -> String {
    "synthetic".to_string()
}

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("invalid plan: {0}")]
    Json(#[from] serde_json::Error),
    #[error("sample_count must be positive")]
    NoSamples,
    #[error("range `{0}` is empty")]
    EmptyRange(&'static str),
    #[error("noise size range holds {width} values, fewer than T = {t}")]
    NarrowSizes { width: u64, t: usize },
    #[error("event {0} appears twice")]
    DuplicateEvent(EventId),
    #[error("event {event}: planted sequence {index} is empty")]
    EmptyPlanted { event: EventId, index: usize },
    #[error("event {event}: planted sequence {index} has a bad domain: {message}")]
    BadDomain { event: EventId, index: usize, message: String },
    #[error("event {event}: planted sequence {index} uses size {size}, inside the noise size range")]
    PlantedInNoiseRange { event: EventId, index: usize, size: u32 },
    #[error("event {event}: planted sequence {inner} occurs inside planted sequence {outer}")]
    Contained { event: EventId, inner: usize, outer: usize },
}

/// One planted sequence of one event and everywhere it was placed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PlantedTruth {
    pub domain: DomainLabel,
    pub packets: Vec<SeqPacket>,
    /// One occurrence per sample.
    pub occurrences: Vec<PacketSequence>,
}

impl PlantedTruth {
    /// The cluster strict refinement is expected to produce.
    pub fn cluster(&self) -> Cluster {
        Cluster {
            members: self.occurrences.clone(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SynthOutput {
    pub dataset: Dataset,
    pub truth: BTreeMap<EventId, Vec<PlantedTruth>>,
}

impl SynthOutput {
    /// Largest `prefix + L` over all planted sequences: the least `P` that
    /// keeps every planted occurrence inside the stream prefix.
    pub fn required_prefix_len(&self, plan: &SynthPlan) -> usize {
        let longest = self
            .truth
            .values()
            .flatten()
            .map(|t| t.packets.len())
            .max()
            .unwrap_or(0);
        plan.noise.prefix.1 as usize + longest
    }
}

/// Position-level identity of a cluster set, independent of order.
pub fn cluster_locations(clusters: &[Cluster]) -> Vec<Vec<(SampleId, StreamId, u32, usize)>> {
    let mut out: Vec<Vec<_>> = clusters
        .iter()
        .map(|c| {
            let mut m: Vec<_> = c
                .members
                .iter()
                .map(|s| (s.sample_id, s.stream_id, s.start_position, s.len()))
                .collect();
            m.sort_unstable();
            m
        })
        .collect();
    out.sort();
    out
}

fn parse_domain(s: &str) -> Result<DomainLabel, String> {
    match s.trim().parse::<IpAddr>() {
        Ok(ip) => Ok(DomainLabel::ip(ip)),
        Err(_) => DomainLabel::sni(s).map_err(|e| e.to_string()),
    }
}

fn contains(outer: &[SeqPacket], inner: &[SeqPacket]) -> bool {
    inner.len() <= outer.len() && outer.windows(inner.len()).any(|w| w == inner)
}

impl SynthPlan {
    pub fn from_json(text: &str) -> Result<Self, SynthError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn read(path: &Path) -> Result<Self, SynthError> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        if self.sample_count == 0 {
            return Err(SynthError::NoSamples);
        }
        let n = &self.noise;
        for (name, (lo, hi)) in [
            ("streams", n.streams),
            ("packets", n.packets),
            ("prefix", n.prefix),
            ("suffix", n.suffix),
            ("sizes", n.sizes),
        ] {
            if lo > hi {
                return Err(SynthError::EmptyRange(name));
            }
        }
        let width = (n.sizes.1 - n.sizes.0) as u64 + 1;
        if n.mode == NoiseMode::Disjoint && width < self.sample_count as u64 {
            return Err(SynthError::NarrowSizes {
                width,
                t: self.sample_count,
            });
        }
        let mut seen = std::collections::BTreeSet::new();
        for ev in &self.events {
            if !seen.insert(ev.event_id) {
                return Err(SynthError::DuplicateEvent(ev.event_id));
            }
            for (i, p) in ev.planted.iter().enumerate() {
                if p.packets.is_empty() {
                    return Err(SynthError::EmptyPlanted {
                        event: ev.event_id,
                        index: i,
                    });
                }
                parse_domain(&p.domain).map_err(|message| SynthError::BadDomain {
                    event: ev.event_id,
                    index: i,
                    message,
                })?;
                // Disjoint mode forbids any noise-range size, since a window
                // mixing noise and planted packets could otherwise recur.
                // Independent noise can only reproduce a planted sequence
                // whose sizes all lie in the noise range.
                let in_noise = |pk: &&SeqPacket| (n.sizes.0..=n.sizes.1).contains(&pk.size);
                let offending = match n.mode {
                    NoiseMode::Disjoint => p.packets.iter().find(in_noise),
                    NoiseMode::Independent => p.packets.iter().all(|pk| in_noise(&pk)).then(|| &p.packets[0]),
                };
                if let Some(pk) = offending {
                    return Err(SynthError::PlantedInNoiseRange {
                        event: ev.event_id,
                        index: i,
                        size: pk.size,
                    });
                }
                if n.mode == NoiseMode::Disjoint {
                    for (k, q) in ev.planted.iter().enumerate() {
                        if k != i && contains(&q.packets, &p.packets) && (p.packets.len() < q.packets.len() || i > k) {
                            return Err(SynthError::Contained {
                                event: ev.event_id,
                                inner: i,
                                outer: k,
                            });
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

struct StreamDraft {
    domain: DomainLabel,
    packets: Vec<SeqPacket>,
    /// (planted index, start offset) when the stream carries a planted sequence.
    planted: Option<(usize, usize)>,
}

struct NoiseGen<'a> {
    spec: &'a NoiseSpec,
    t: u32,
    sample: u32,
}

impl NoiseGen<'_> {
    fn size(&self, rng: &mut ChaCha8Rng) -> u32 {
        let (lo, hi) = self.spec.sizes;
        match self.spec.mode {
            NoiseMode::Independent => rng.random_range(lo..=hi),
            NoiseMode::Disjoint => {
                // Uniform over the values in [lo, hi] congruent to the sample index.
                let first = lo + (self.sample + self.t - lo % self.t) % self.t;
                let count = (hi - first) / self.t + 1;
                first + self.t * rng.random_range(0..count)
            }
        }
    }

    fn packets(&self, rng: &mut ChaCha8Rng, count: u32) -> Vec<SeqPacket> {
        (0..count)
            .map(|_| SeqPacket {
                direction: if rng.random_bool(0.5) {
                    Direction::Upstream
                } else {
                    Direction::Downstream
                },
                size: self.size(rng),
            })
            .collect()
    }

    fn domain(&self, rng: &mut ChaCha8Rng, event: EventId, k: usize) -> DomainLabel {
        let host = match self.spec.mode {
            NoiseMode::Disjoint => format!("n{k}.s{}.e{event}.noise.example", self.sample),
            NoiseMode::Independent => format!("n{}.noise.example", rng.random_range(0..8u32)),
        };
        DomainLabel::sni(&host).expect("generated hostnames are valid")
    }
}

fn range(rng: &mut ChaCha8Rng, (lo, hi): (u32, u32)) -> u32 {
    rng.random_range(lo..=hi)
}

/// Generates the dataset described by `plan`, deterministically in the seed.
pub fn generate(plan: &SynthPlan) -> Result<SynthOutput, SynthError> {
    plan.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(plan.seed);
    let t = plan.sample_count;
    let mut dataset = Dataset::new(&plan.name);
    let mut truth = BTreeMap::new();
    for ev in &plan.events {
        let domains: Vec<DomainLabel> = ev
            .planted
            .iter()
            .map(|p| parse_domain(&p.domain).expect("validated"))
            .collect();
        let mut occurrences: Vec<Vec<PacketSequence>> = vec![Vec::new(); ev.planted.len()];
        let mut samples = Vec::with_capacity(t);
        for j in 0..t {
            let noise = NoiseGen {
                spec: &plan.noise,
                t: t as u32,
                sample: j as u32,
            };
            let mut drafts = Vec::new();
            for (pi, p) in ev.planted.iter().enumerate() {
                let pre = range(&mut rng, plan.noise.prefix);
                let suf = range(&mut rng, plan.noise.suffix);
                let mut packets = noise.packets(&mut rng, pre);
                packets.extend(p.packets.iter().cloned());
                packets.extend(noise.packets(&mut rng, suf));
                drafts.push(StreamDraft {
                    domain: domains[pi].clone(),
                    packets,
                    planted: Some((pi, pre as usize)),
                });
            }
            for k in 0..range(&mut rng, plan.noise.streams) as usize {
                let count = range(&mut rng, plan.noise.packets);
                drafts.push(StreamDraft {
                    domain: noise.domain(&mut rng, ev.event_id, k),
                    packets: noise.packets(&mut rng, count),
                    planted: None,
                });
            }
            drafts.retain(|d| !d.packets.is_empty());
            drafts.shuffle(&mut rng);

            // Interleave streams packet by packet in random order.
            let mut pending: Vec<usize> = drafts.iter().enumerate().flat_map(|(i, d)| vec![i; d.packets.len()]).collect();
            pending.shuffle(&mut rng);
            let mut next = vec![0usize; drafts.len()];
            let mut records = Vec::with_capacity(pending.len());
            for sid in pending {
                let d = &drafts[sid];
                let pk = d.packets[next[sid]];
                next[sid] += 1;
                records.push(PacketRecord {
                    event_id: ev.event_id,
                    sample_id: j as SampleId,
                    stream_id: sid as StreamId,
                    domain: d.domain.clone(),
                    position_in_stream: next[sid] as u32,
                    size: pk.size,
                    direction: pk.direction,
                });
            }
            for (sid, d) in drafts.iter().enumerate() {
                if let Some((pi, start)) = d.planted {
                    occurrences[pi].push(PacketSequence {
                        event_id: ev.event_id,
                        sample_id: j as SampleId,
                        stream_id: sid as StreamId,
                        start_position: start as u32 + 1,
                        domain: d.domain.clone(),
                        packets: ev.planted[pi].packets.clone(),
                    });
                }
            }
            samples.push(
                TabulatedTrafficSample::new(ev.event_id, j as SampleId, records).expect("generated samples are well formed"),
            );
        }
        dataset.events.insert(ev.event_id, samples);
        truth.insert(
            ev.event_id,
            ev.planted
                .iter()
                .zip(domains)
                .zip(occurrences)
                .map(|((p, domain), occurrences)| PlantedTruth {
                    domain,
                    packets: p.packets.clone(),
                    occurrences,
                })
                .collect(),
        );
    }
    Ok(SynthOutput { dataset, truth })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pk(d: Direction, size: u32) -> SeqPacket {
        SeqPacket { direction: d, size }
    }

    fn plan() -> SynthPlan {
        SynthPlan {
            name: "s".into(),
            seed: 3,
            sample_count: 4,
            noise: NoiseSpec {
                mode: NoiseMode::Disjoint,
                streams: (1, 3),
                packets: (1, 6),
                prefix: (0, 2),
                suffix: (0, 2),
                sizes: (1000, 1400),
            },
            events: vec![EventPlan {
                event_id: 9,
                planted: vec![PlantedSpec {
                    domain: "api.vendor.example".into(),
                    packets: vec![pk(Direction::Upstream, 80), pk(Direction::Downstream, 90)],
                }],
            }],
        }
    }

    #[test]
    fn deterministic_in_seed() {
        let p = plan();
        let a = generate(&p).unwrap();
        let b = generate(&p).unwrap();
        assert_eq!(a.dataset, b.dataset);
        let mut q = p.clone();
        q.seed = 4;
        assert_ne!(generate(&q).unwrap().dataset, a.dataset);
    }

    #[test]
    fn disjoint_noise_uses_sample_residue() {
        let out = generate(&plan()).unwrap();
        for s in &out.dataset.events[&9] {
            for r in s.records() {
                if r.size >= 1000 {
                    assert_eq!(r.size % 4, s.sample_id() % 4);
                    assert!(r.size <= 1400);
                }
            }
        }
    }

    #[test]
    fn occurrences_point_at_planted_packets() {
        let out = generate(&plan()).unwrap();
        let truth = &out.truth[&9][0];
        assert_eq!(truth.occurrences.len(), 4);
        for occ in &truth.occurrences {
            let s = &out.dataset.events[&9][occ.sample_id as usize];
            let stream = s.stream(occ.stream_id);
            let start = occ.start_position as usize - 1;
            let got: Vec<SeqPacket> = stream[start..start + 2]
                .iter()
                .map(|r| SeqPacket {
                    direction: r.direction,
                    size: r.size,
                })
                .collect();
            assert_eq!(got, truth.packets);
            assert_eq!(stream[0].domain.value(), "api.vendor.example");
        }
    }

    #[test]
    fn validation_rejects_unrecoverable_plans() {
        let mut p = plan();
        p.events[0].planted[0].packets[0].size = 1200;
        assert!(matches!(p.validate(), Err(SynthError::PlantedInNoiseRange { size: 1200, .. })));

        let mut p = plan();
        let outer = p.events[0].planted[0].clone();
        let mut inner = outer.clone();
        inner.packets.truncate(1);
        p.events[0].planted.push(inner);
        assert!(matches!(p.validate(), Err(SynthError::Contained { inner: 1, outer: 0, .. })));

        let mut p = plan();
        p.events[0].planted.push(outer);
        assert!(matches!(p.validate(), Err(SynthError::Contained { inner: 1, outer: 0, .. })));

        let mut p = plan();
        p.noise.mode = NoiseMode::Independent;
        p.events[0].planted[0].packets[0].size = 1200;
        assert!(p.validate().is_ok());
        p.events[0].planted[0].packets[1].size = 1300;
        assert!(matches!(p.validate(), Err(SynthError::PlantedInNoiseRange { .. })));

        let mut p = plan();
        p.noise.sizes = (1000, 1002);
        assert!(matches!(p.validate(), Err(SynthError::NarrowSizes { width: 3, t: 4 })));

        let mut p = plan();
        p.noise.prefix = (3, 2);
        assert!(matches!(p.validate(), Err(SynthError::EmptyRange("prefix"))));
    }

    #[test]
    fn plan_json_is_strict() {
        let text = serde_json::to_string(&plan()).unwrap();
        assert_eq!(SynthPlan::from_json(&text).unwrap(), plan());
        let bad = text.replacen("\"seed\"", "\"sede\"", 1);
        assert!(SynthPlan::from_json(&bad).is_err());
    }
}
