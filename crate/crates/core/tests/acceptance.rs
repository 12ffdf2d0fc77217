//! Acceptance run: one PASS/FAIL line per criterion, exit status 1 on any
//! failure. Built without the libtest harness so the lines always show.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::panic;
use std::path::PathBuf;
use std::time::Instant;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use seqprint::evaluation::synth::{cluster_locations, EventPlan, NoiseMode, NoiseSpec, PlantedSpec, SynthPlan};
use seqprint::evaluation::{
    false_positive_scan, generate, load_dataset, merge_corpora, prevalence, Dataset, ScanFingerprint, ScanOptions,
};
use seqprint::fingerprint::{summarize, SummaryPacket, SummaryPacketSequence, SummarySeqnature};
use seqprint::ingest::{Direction, DomainLabel};
use seqprint::matcher::{MatchLocation, Matcher};
use seqprint::metrics::{SeqPacket, Technique, TechniqueKind};
use seqprint::refinement::{refine, Cluster, RefinementConfig};
use seqprint::tabulation::{EventId, PacketRecord, SampleId, StreamId, TabulatedTrafficSample};
use seqprint::Metric;

type Outcome = Result<String, String>;
type Loc = (SampleId, StreamId, u32, usize);

const ALL_TECHNIQUES: [TechniqueKind; 5] = [
    TechniqueKind::Sdbf,
    TechniqueKind::Esdbf,
    TechniqueKind::Ebf,
    TechniqueKind::Fqdnbf,
    TechniqueKind::Esldbf,
];

/// Hostnames and addresses used by random corpora, with the eSLD each one
/// has, written out by hand. A host that is itself a public suffix keeps its
/// own name; addresses have none.
const DOMAINS: [(&str, Option<&str>); 12] = [
    ("api.roku.com", Some("roku.com")),
    ("scribe.logs.roku.com", Some("roku.com")),
    ("tuner.pandora.com", Some("pandora.com")),
    ("a.b.example.co.uk", Some("example.co.uk")),
    ("www.example.co.uk", Some("example.co.uk")),
    ("img.shop.com.au", Some("shop.com.au")),
    ("cdn.shop.com.au", Some("shop.com.au")),
    ("co.uk", Some("co.uk")),
    ("203.0.113.7", None),
    ("198.51.100.2", None),
    ("2001:db8::1", None),
    ("example.org", Some("example.org")),
];

fn label(rng: &mut ChaCha8Rng, host: &str) -> DomainLabel {
    match host.parse::<std::net::IpAddr>() {
        Ok(ip) => DomainLabel::ip(ip),
        Err(_) if rng.random_bool(0.5) => DomainLabel::sni(host).unwrap(),
        Err(_) => DomainLabel::dns(host).unwrap(),
    }
}

fn dir(rng: &mut ChaCha8Rng) -> Direction {
    if rng.random_bool(0.5) {
        Direction::Upstream
    } else {
        Direction::Downstream
    }
}

struct StreamSpec {
    domain: DomainLabel,
    packets: Vec<SeqPacket>,
}

/// Rows in a random interleaving that keeps each stream's order.
fn build_sample(rng: &mut ChaCha8Rng, event: EventId, sample: SampleId, streams: &[StreamSpec]) -> TabulatedTrafficSample {
    let mut order: Vec<usize> = streams
        .iter()
        .enumerate()
        .flat_map(|(i, s)| std::iter::repeat_n(i, s.packets.len()))
        .collect();
    order.shuffle(rng);
    let mut next = vec![0usize; streams.len()];
    let records = order
        .into_iter()
        .map(|i| {
            let p = streams[i].packets[next[i]];
            next[i] += 1;
            PacketRecord {
                event_id: event,
                sample_id: sample,
                stream_id: i as StreamId,
                domain: streams[i].domain.clone(),
                position_in_stream: next[i] as u32,
                size: p.size,
                direction: p.direction,
            }
        })
        .collect();
    TabulatedTrafficSample::new(event, sample, records).unwrap()
}

/// T = 5 samples, at most 6 streams each, at most 12 packets per stream,
/// sizes from at most 20 distinct values. Half the corpora get a motif
/// copied into most samples so that clusters actually form.
/// With `narrow`, streams draw from four hosts only, so that endpoints
/// recur across samples more often.
fn random_corpus(seed: u64, narrow: bool) -> Vec<TabulatedTrafficSample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut hosts: Vec<&str> = DOMAINS.iter().map(|d| d.0).collect();
    if narrow {
        hosts.shuffle(&mut rng);
        hosts.truncate(4);
    }
    let t = 5;
    let k = rng.random_range(1..=20usize);
    let mut values: Vec<u32> = (40..1500).collect();
    values.shuffle(&mut rng);
    values.truncate(k);
    let motif: Vec<SeqPacket> = (0..rng.random_range(1..=6))
        .map(|_| SeqPacket {
            direction: dir(&mut rng),
            size: *values.choose(&mut rng).unwrap(),
        })
        .collect();
    let plant = rng.random_bool(0.5);
    let motif_host = *hosts.choose(&mut rng).unwrap();
    (0..t)
        .map(|j| {
            let mut streams: Vec<StreamSpec> = (0..rng.random_range(0..=6))
                .map(|_| {
                    let host = *hosts.choose(&mut rng).unwrap();
                    StreamSpec {
                        domain: label(&mut rng, host),
                        packets: (0..rng.random_range(0..=12))
                            .map(|_| SeqPacket {
                                direction: dir(&mut rng),
                                size: *values.choose(&mut rng).unwrap(),
                            })
                            .collect(),
                    }
                })
                .collect();
            if plant && rng.random_bool(0.9) {
                if streams.is_empty() || streams.len() < 6 && rng.random_bool(0.3) {
                    streams.push(StreamSpec {
                        domain: label(&mut rng, motif_host),
                        packets: Vec::new(),
                    });
                }
                let s = rng.random_range(0..streams.len());
                let room = 12 - motif.len();
                streams[s].packets.truncate(room);
                let at = rng.random_range(0..=streams[s].packets.len());
                streams[s].packets.splice(at..at, motif.iter().copied());
            }
            build_sample(&mut rng, 1, j, &streams)
        })
        .collect()
}

fn locs(clusters: &[Cluster]) -> Vec<Vec<Loc>> {
    cluster_locations(clusters)
}

/// Brute-force n-gram intersection: every n-gram of every stream prefix for
/// n = P..n_min, grouped by exact (direction, size) tuples, kept when the
/// group has at least MinPts members over at least T_min samples and no
/// longer accepted tuple contains it.
fn sdbf_oracle(samples: &[TabulatedTrafficSample], p: usize, n_min: usize, t_min: usize, min_pts: usize) -> Vec<Vec<Loc>> {
    let mut accepted: Vec<Vec<(Direction, u32)>> = Vec::new();
    let mut out = Vec::new();
    for n in (n_min..=p).rev() {
        let mut groups: BTreeMap<Vec<(Direction, u32)>, Vec<Loc>> = BTreeMap::new();
        for s in samples {
            for (sid, recs) in s.streams() {
                let head: Vec<(Direction, u32)> = recs.iter().take(p).map(|r| (r.direction, r.size)).collect();
                for start in 0..head.len() {
                    if start + n <= head.len() {
                        groups
                            .entry(head[start..start + n].to_vec())
                            .or_default()
                            .push((s.sample_id(), sid, start as u32 + 1, n));
                    }
                }
            }
        }
        let mut fresh = Vec::new();
        for (key, members) in groups {
            let samples: BTreeSet<SampleId> = members.iter().map(|m| m.0).collect();
            if members.len() < min_pts || samples.len() < t_min {
                continue;
            }
            let inside = accepted
                .iter()
                .any(|a| a.len() > key.len() && a.windows(key.len()).any(|w| w == key.as_slice()));
            if !inside {
                fresh.push(key);
                let mut m = members;
                m.sort_unstable();
                out.push(m);
            }
        }
        accepted.extend(fresh);
    }
    out.sort();
    out
}

fn strict(kind: TechniqueKind, t: usize, p: usize, n_min: usize) -> (RefinementConfig, Metric) {
    let tech = Technique::new(kind);
    (RefinementConfig::strict(tech.clone(), t, p, n_min), Metric::builtin(tech).unwrap())
}

fn run_refine(samples: &[TabulatedTrafficSample], kind: TechniqueKind, p: usize, n_min: usize) -> Vec<Cluster> {
    let (cfg, m) = if kind.is_endpoint() {
        strict(kind, samples.len(), 1, 1)
    } else {
        strict(kind, samples.len(), p, n_min)
    };
    refine(samples, &cfg, &m).unwrap().clusters
}

/// Nonempty-ness of every technique's output for one corpus.
type Nonempty = BTreeMap<String, bool>;

fn subset_violation(n: &Nonempty) -> Option<String> {
    let g = |k: &str| n[k];
    if g("esdbf") && !g("sdbf") {
        return Some("ESDBF nonempty but SDBF empty".into());
    }
    if g("fqdnbf") && !(g("ebf") && g("esldbf")) {
        return Some("FQDNBF nonempty but EBF or eSLDBF empty".into());
    }
    None
}

fn all_nonempty(samples: &[TabulatedTrafficSample], p: usize, n_min: usize) -> Nonempty {
    ALL_TECHNIQUES
        .iter()
        .map(|k| (k.to_string(), !run_refine(samples, k.clone(), p, n_min).is_empty()))
        .collect()
}

fn criterion_1(subsets: &mut Vec<Nonempty>) -> Outcome {
    let start = Instant::now();
    let mut nonempty = 0;
    for i in 0..200u64 {
        let samples = random_corpus(1000 + i, false);
        let mut rng = ChaCha8Rng::seed_from_u64(i);
        let p = rng.random_range(1..=12);
        let n_min = rng.random_range(1..=p.min(3));
        let got = locs(&run_refine(&samples, TechniqueKind::Sdbf, p, n_min));
        let want = sdbf_oracle(&samples, p, n_min, 5, 5);
        if got != want {
            return Err(format!("corpus {i} (P={p}, n_min={n_min}): {} cluster(s), oracle {}", got.len(), want.len()));
        }
        nonempty += usize::from(!got.is_empty());
        subsets.push(all_nonempty(&samples, p, n_min));
    }
    let secs = start.elapsed().as_secs_f64();
    if secs >= 60.0 {
        return Err(format!("took {secs:.1}s"));
    }
    Ok(format!("200/200 corpora equal the oracle ({nonempty} with clusters), {secs:.1}s"))
}

fn endpoint_key(d: &DomainLabel, kind: &TechniqueKind) -> Option<String> {
    let esld: HashMap<&str, Option<&str>> = DOMAINS.iter().copied().collect();
    match kind {
        TechniqueKind::Ebf => Some(d.value().to_string()),
        TechniqueKind::Fqdnbf => d.hostname().map(str::to_string),
        TechniqueKind::Esldbf => esld[d.value()].map(str::to_string),
        _ => unreachable!(),
    }
}

/// Endpoints contacted in every sample; one cluster per endpoint holding
/// the first packet of every stream to it.
fn endpoint_oracle(samples: &[TabulatedTrafficSample], kind: &TechniqueKind) -> Vec<Vec<Loc>> {
    let mut common: Option<BTreeSet<String>> = None;
    let mut members: BTreeMap<String, Vec<Loc>> = BTreeMap::new();
    for s in samples {
        let mut here = BTreeSet::new();
        for (sid, recs) in s.streams() {
            if let Some(k) = endpoint_key(&recs[0].domain, kind) {
                here.insert(k.clone());
                members.entry(k).or_default().push((s.sample_id(), sid, 1, 1));
            }
        }
        common = Some(match common {
            None => here,
            Some(c) => c.intersection(&here).cloned().collect(),
        });
    }
    let mut out: Vec<Vec<Loc>> = common
        .unwrap_or_default()
        .into_iter()
        .map(|k| {
            let mut m = members.remove(&k).unwrap();
            m.sort_unstable();
            m
        })
        .collect();
    out.sort();
    out
}

fn criterion_2(subsets: &mut Vec<Nonempty>) -> Outcome {
    let mut nonempty = [0usize; 3];
    for i in 0..200u64 {
        let samples = random_corpus(5000 + i, true);
        for (k, kind) in [TechniqueKind::Ebf, TechniqueKind::Fqdnbf, TechniqueKind::Esldbf].iter().enumerate() {
            let got = locs(&run_refine(&samples, kind.clone(), 1, 1));
            let want = endpoint_oracle(&samples, kind);
            if got != want {
                return Err(format!("corpus {i}, {kind}: {} cluster(s), oracle {}", got.len(), want.len()));
            }
            nonempty[k] += usize::from(!got.is_empty());
        }
        subsets.push(all_nonempty(&samples, 6, 2));
    }
    Ok(format!(
        "600/600 runs equal the set-intersection oracle (nonempty: EBF {}, FQDNBF {}, eSLDBF {})",
        nonempty[0], nonempty[1], nonempty[2]
    ))
}

fn random_packets(rng: &mut ChaCha8Rng, len: usize, sizes: std::ops::RangeInclusive<u32>) -> Vec<SeqPacket> {
    (0..len)
        .map(|_| SeqPacket {
            direction: dir(rng),
            size: rng.random_range(sizes.clone()),
        })
        .collect()
}

fn planted_plan(seed: u64) -> SynthPlan {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let events = (0..rng.random_range(1..=3u64))
            .map(|e| EventPlan {
                event_id: e + 1,
                planted: (0..rng.random_range(0..=3))
                    .map(|_| {
                        let len = rng.random_range(2..=8);
                        PlantedSpec {
                            domain: DOMAINS.choose(&mut rng).unwrap().0.to_string(),
                            packets: random_packets(&mut rng, len, 40..=999),
                        }
                    })
                    .collect(),
            })
            .collect();
        let plan = SynthPlan {
            name: format!("planted{seed}"),
            seed,
            sample_count: rng.random_range(2..=8),
            noise: NoiseSpec {
                mode: NoiseMode::Disjoint,
                streams: (0, 4),
                packets: (1, 10),
                prefix: (0, 3),
                suffix: (0, 3),
                sizes: (1000, 1600),
            },
            events,
        };
        if plan.validate().is_ok() {
            return plan;
        }
    }
}

fn criterion_3_and_4(subsets: &mut Vec<Nonempty>) -> (Outcome, Outcome) {
    let mut planted_total = 0;
    let mut recovered = 0;
    let mut self_matches = 0;
    let mut self_trials = 0;
    let mut failures = Vec::new();
    let mut violations = Vec::new();
    let mut short_checked = 0;
    for i in 0..100u64 {
        let plan = planted_plan(i);
        let out = generate(&plan).unwrap();
        let t = plan.sample_count;
        for (e, samples) in &out.dataset.events {
            let truth = &out.truth[e];
            let (cfg, m) = strict(TechniqueKind::Sdbf, t, 20, 2);
            let s = refine(samples, &cfg, &m).unwrap();
            let got = locs(&s.clusters);
            planted_total += truth.len();
            let want: Vec<Cluster> = truth.iter().map(|p| p.cluster()).collect();
            let want = locs(&want);
            recovered += want.iter().filter(|w| got.contains(w)).count();
            if got != want {
                failures.push(format!("seed {i} event {e}: {} cluster(s) for {} planted", got.len(), want.len()));
            }
            if !s.is_empty() {
                let summary = summarize(&s);
                let matcher = Matcher::builtin(&summary).unwrap();
                for sample in samples {
                    self_trials += 1;
                    self_matches += usize::from(matcher.match_sample(sample).matched);
                }
            }
            for c in &s.clusters {
                let pk = &c.members[0].packets;
                for p in truth {
                    if pk.len() < p.packets.len() {
                        short_checked += 1;
                        if p.packets.windows(pk.len()).any(|w| w == pk.as_slice()) {
                            violations.push(format!("seed {i} event {e}: length-{} cluster inside a planted length-{}", pk.len(), p.packets.len()));
                        }
                    }
                }
            }
            subsets.push(all_nonempty(samples, 20, 2));
        }
    }
    let c3 = if failures.is_empty() && recovered == planted_total && self_matches == self_trials {
        Ok(format!(
            "{recovered}/{planted_total} planted clusters recovered exactly, {self_matches}/{self_trials} training samples re-matched"
        ))
    } else {
        Err(format!(
            "{recovered}/{planted_total} recovered, {self_matches}/{self_trials} re-matched; {}",
            failures.first().cloned().unwrap_or_default()
        ))
    };
    let c4 = if violations.is_empty() {
        Ok(format!("0 violations ({short_checked} shorter cluster/planted pairs checked)"))
    } else {
        Err(format!("{} violation(s), first: {}", violations.len(), violations[0]))
    };
    (c3, c4)
}

fn random_summary(rng: &mut ChaCha8Rng, kind: TechniqueKind, hosts: &[DomainLabel]) -> SummarySeqnature {
    let seqs = (0..rng.random_range(1..=3))
        .map(|_| {
            let len = if kind.is_endpoint() { 1 } else { rng.random_range(1..=4) };
            SummaryPacketSequence {
                packets: (0..len)
                    .map(|_| {
                        let lo = rng.random_range(1..=6);
                        let hi = (lo + rng.random_range(0..=2)).min(6);
                        let mut directions = BTreeSet::new();
                        directions.insert(dir(rng));
                        if rng.random_bool(0.3) {
                            directions.insert(dir(rng));
                        }
                        let domains: BTreeSet<DomainLabel> =
                            (0..rng.random_range(1..=3)).map(|_| hosts.choose(rng).unwrap().clone()).collect();
                        SummaryPacket {
                            size_min: lo,
                            size_max: hi,
                            directions,
                            domains,
                        }
                    })
                    .collect(),
            }
        })
        .collect();
    SummarySeqnature {
        event_id: 1,
        dataset: None,
        config: RefinementConfig::strict(Technique::new(kind), 1, 4, 1),
        sequences: seqs,
    }
}

/// Identity a window's stream needs, per technique, written independently
/// of the library's endpoint handling.
fn oracle_window(window: &[&PacketRecord], seq: &SummaryPacketSequence, kind: &TechniqueKind) -> bool {
    let packets_ok = window.iter().zip(&seq.packets).all(|(r, p)| {
        p.size_min <= r.size && r.size <= p.size_max && p.directions.contains(&r.direction)
    });
    let d = &window[0].domain;
    let in_set = |set: &BTreeSet<DomainLabel>| -> bool {
        match endpoint_key(d, kind) {
            None => false,
            Some(k) => set.iter().any(|x| endpoint_key(x, kind).as_deref() == Some(k.as_str())),
        }
    };
    match kind {
        TechniqueKind::Sdbf => packets_ok,
        TechniqueKind::Esdbf => {
            packets_ok
                && seq
                    .packets
                    .iter()
                    .all(|p| p.domains.iter().any(|x| x.value() == d.value()))
        }
        _ => in_set(&seq.packets[0].domains),
    }
}

fn brute_match(summary: &SummarySeqnature, sample: &TabulatedTrafficSample, kind: &TechniqueKind) -> Vec<Option<MatchLocation>> {
    summary
        .sequences
        .iter()
        .map(|seq| {
            let n = seq.len();
            sample.records().iter().find_map(|r| {
                let stream = sample.stream(r.stream_id);
                let end = r.position_in_stream as usize;
                if end < n {
                    return None;
                }
                oracle_window(&stream[end - n..end], seq, kind).then_some(MatchLocation {
                    stream_id: r.stream_id,
                    end_position: r.position_in_stream,
                })
            })
        })
        .collect()
}

fn criterion_5() -> Outcome {
    let start = Instant::now();
    let mut matched = 0;
    for i in 0..500u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(9000 + i);
        let kind = ALL_TECHNIQUES.choose(&mut rng).unwrap().clone();
        let hosts: Vec<DomainLabel> = DOMAINS.iter().map(|(h, _)| label(&mut rng, h)).collect();
        let summary = random_summary(&mut rng, kind.clone(), &hosts);
        let mut streams: Vec<StreamSpec> = (0..rng.random_range(0..=5))
            .map(|_| {
                let len = rng.random_range(0..=8);
                StreamSpec {
                    domain: hosts.choose(&mut rng).unwrap().clone(),
                    packets: random_packets(&mut rng, len, 1..=6),
                }
            })
            .collect();
        // Sometimes embed a manifestation of each sequence.
        if rng.random_bool(0.5) {
            for seq in &summary.sequences {
                let packets = seq
                    .packets
                    .iter()
                    .map(|p| SeqPacket {
                        direction: *p.directions.iter().next().unwrap(),
                        size: rng.random_range(p.size_min..=p.size_max),
                    })
                    .collect();
                let domain = seq.packets[0].domains.iter().next().unwrap().clone();
                streams.push(StreamSpec { domain, packets });
            }
            streams.shuffle(&mut rng);
        }
        let sample = build_sample(&mut rng, 2, 0, &streams);
        let result = Matcher::builtin(&summary).unwrap().match_sample(&sample);
        let oracle = brute_match(&summary, &sample, &kind);
        let oracle_matched = oracle.iter().all(Option::is_some);
        if result.matched != oracle_matched || result.locations != oracle {
            return Err(format!("pair {i} ({kind}): streaming {} vs brute force {}", result.matched, oracle_matched));
        }
        matched += usize::from(oracle_matched);
    }
    let secs = start.elapsed().as_secs_f64();
    if secs >= 60.0 {
        return Err(format!("took {secs:.1}s"));
    }
    Ok(format!("500/500 pairs agree ({matched} matches, {} non-matches), {secs:.1}s", 500 - matched))
}

fn criterion_6(subsets: &[Nonempty]) -> Outcome {
    let bad: Vec<String> = subsets.iter().filter_map(subset_violation).collect();
    if bad.is_empty() {
        let count = |k: &str| subsets.iter().filter(|n| n[k]).count();
        Ok(format!(
            "0 violations over {} corpora (nonempty: SDBF {}, ESDBF {}, EBF {}, FQDNBF {}, eSLDBF {})",
            subsets.len(),
            count("sdbf"),
            count("esdbf"),
            count("ebf"),
            count("fqdnbf"),
            count("esldbf")
        ))
    } else {
        Err(format!("{} violation(s): {}", bad.len(), bad[0]))
    }
}

/// Dataset of `n_events` events whose samples carry `motif` in the first
/// `with_motif` events only; noise never matches the motif's sizes.
fn binning_dataset(seed: u64, name: &str, n_events: u64, with_motif: u64, motif: &[SeqPacket]) -> Dataset {
    let plan = SynthPlan {
        name: name.to_string(),
        seed,
        sample_count: 3,
        noise: NoiseSpec {
            mode: NoiseMode::Independent,
            streams: (1, 2),
            packets: (1, 5),
            prefix: (0, 2),
            suffix: (0, 2),
            sizes: (1000, 1400),
        },
        events: (0..n_events)
            .map(|e| EventPlan {
                event_id: 100 + e,
                planted: if e < with_motif {
                    vec![PlantedSpec {
                        domain: "motif.example".into(),
                        packets: motif.to_vec(),
                    }]
                } else {
                    Vec::new()
                },
            })
            .collect(),
    };
    generate(&plan).unwrap().dataset
}

fn planted_fp_bin(foreign: u64) -> Result<(String, usize), String> {
    let motif = vec![
        SeqPacket {
            direction: Direction::Upstream,
            size: 321,
        },
        SeqPacket {
            direction: Direction::Downstream,
            size: 654,
        },
    ];
    let own = binning_dataset(1, "own", 1, 1, &motif);
    let (cfg, m) = strict(TechniqueKind::Sdbf, 3, 20, 2);
    let mut s = refine(&own.events[&100], &cfg, &m).map_err(|e| e.to_string())?;
    s.dataset = Some("own".into());
    let summary = summarize(&s);
    let others = binning_dataset(2, "others", foreign + 4, foreign, &motif);
    let report = false_positive_scan(
        &[(
            ScanFingerprint {
                dataset: "own".into(),
                summary: summary.clone(),
            },
            m,
        )],
        &[&own, &others],
        &ScanOptions::default(),
        None,
        &[],
    )
    .map_err(|e| e.to_string())?;
    let entry = &report.entries[0];
    // Direct enumeration.
    let matcher = Matcher::builtin(&summary).unwrap();
    let direct = others
        .events
        .values()
        .filter(|samples| samples.iter().any(|x| matcher.match_sample(x).matched))
        .count();
    if direct != entry.fp_events() || entry.own_matched != Some((3, 3)) {
        return Err(format!("scan counted {} foreign events, enumeration {direct}", entry.fp_events()));
    }
    Ok((entry.bin.clone(), direct))
}

fn criterion_7() -> Outcome {
    let mut notes = Vec::new();
    for (foreign, bin) in [(0u64, "0"), (3, "1-10"), (150, "101+")] {
        let (got, count) = planted_fp_bin(foreign)?;
        if got != bin || count as u64 != foreign {
            return Err(format!("planted into {foreign} foreign events: bin {got} from {count} events, expected {bin}"));
        }
        notes.push(format!("{foreign}->{got}"));
    }
    let planted = format!("planted-FP binning {}", notes.join(", "));
    let Some(root) = std::env::var_os("SEQPRINT_REFERENCE_DIR").map(PathBuf::from) else {
        return Ok(format!("reference check waived (SEQPRINT_REFERENCE_DIR unset, datasets not available); {planted}"));
    };
    let roku = load_dataset(&root.join("roku")).map_err(|e| e.to_string())?;
    let pingpong = load_dataset(&root.join("pingpong")).map_err(|e| e.to_string())?;
    let t = roku.sample_count().unwrap_or(0);
    for kind in ALL_TECHNIQUES {
        let (cfg, m) = if kind.is_endpoint() { strict(kind, t, 1, 1) } else { strict(kind, t, 20, 2) };
        let r = prevalence(&roku, &cfg, &m).map_err(|e| e.to_string())?;
        if r.fingerprintable != r.total_events || r.total_events != 1000 {
            return Err(format!("Roku {}: {}/{}", r.technique, r.fingerprintable, r.total_events));
        }
    }
    let (cfg, m) = strict(TechniqueKind::Sdbf, pingpong.sample_count().unwrap_or(0), 20, 2);
    let r = prevalence(&pingpong, &cfg, &m).map_err(|e| e.to_string())?;
    if r.fingerprintable.abs_diff(95) > 3 {
        return Err(format!("PingPong SDBF {}/{}", r.fingerprintable, r.total_events));
    }
    Ok(format!("Roku 1000/1000 for all techniques, PingPong SDBF {}/{}; {planted}", r.fingerprintable, r.total_events))
}

fn nat_corpus(rng: &mut ChaCha8Rng, name: &str, pool: &[Vec<SeqPacket>], events: u64, t: usize) -> Dataset {
    let plan = SynthPlan {
        name: name.into(),
        seed: rng.random(),
        sample_count: t,
        noise: NoiseSpec {
            mode: NoiseMode::Independent,
            streams: (0, 3),
            packets: (1, 6),
            prefix: (0, 2),
            suffix: (0, 2),
            sizes: (1000, 1010),
        },
        events: (0..events)
            .map(|e| EventPlan {
                event_id: e,
                planted: (0..rng.random_range(0..=2))
                    .map(|_| PlantedSpec {
                        domain: "nat.example".into(),
                        packets: pool.choose(rng).unwrap().clone(),
                    })
                    .collect(),
            })
            .collect(),
    };
    generate(&plan).unwrap().dataset
}

fn fp_events(f: &SummarySeqnature, ds: &Dataset) -> usize {
    let m = Metric::builtin(f.technique().clone()).unwrap();
    let report = false_positive_scan(
        &[(
            ScanFingerprint {
                dataset: "A".into(),
                summary: f.clone(),
            },
            m,
        )],
        &[ds],
        &ScanOptions::default(),
        None,
        &[],
    )
    .unwrap();
    report.entries[0].fp_events()
}

fn criterion_8() -> Outcome {
    let mut checks = 0;
    let mut positive = 0;
    let mut fp_cases = 0;
    for i in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(20_000 + i);
        let pool: Vec<Vec<SeqPacket>> = (0..3)
            .map(|_| {
                let len = rng.random_range(2..=4);
                random_packets(&mut rng, len, 40..=60)
            })
            .collect();
        let t = rng.random_range(2..=4);
        let events = rng.random_range(2..=5);
        let a = nat_corpus(&mut rng, "A", &pool, events, t);
        let b = nat_corpus(&mut rng, "B", &pool, events, t);
        let merged = merge_corpora("A+B", &[&a, &b]).map_err(|e| e.to_string())?;
        let (cfg, m) = strict(TechniqueKind::Sdbf, t, 20, 2);
        for (&e, samples) in &a.events {
            let s = refine(samples, &cfg, &m).unwrap();
            if s.is_empty() {
                continue;
            }
            let f = summarize(&s);
            let matcher = Matcher::builtin(&f).unwrap();
            let rank_events: Vec<(&Vec<TabulatedTrafficSample>, &Vec<TabulatedTrafficSample>, &Vec<TabulatedTrafficSample>)> = a
                .events
                .values()
                .zip(b.events.values())
                .zip(merged.events.values())
                .map(|((x, y), z)| (x, y, z))
                .collect();
            for (xa, xb, xm) in rank_events {
                for k in 0..t {
                    let hit = matcher.match_sample(&xa[k]).matched || matcher.match_sample(&xb[k]).matched;
                    checks += 1;
                    if hit {
                        positive += 1;
                        if !matcher.match_sample(&xm[k]).matched {
                            return Err(format!("case {i} event {e}: constituent matches but merged sample {k} does not"));
                        }
                    }
                }
            }
            let (ca, cb, cm) = (fp_events(&f, &a), fp_events(&f, &b), fp_events(&f, &merged));
            fp_cases += 1;
            if cm < ca || cm < cb {
                return Err(format!("case {i} event {e}: merged FP events {cm} < constituents ({ca}, {cb})"));
            }
        }
    }
    Ok(format!(
        "0 violations: {positive} of {checks} sample checks had a constituent match, all kept after merging; {fp_cases} FP-count comparisons"
    ))
}

fn guarded<F: FnOnce() -> Outcome + panic::UnwindSafe>(f: F) -> Outcome {
    panic::catch_unwind(f).unwrap_or_else(|p| {
        let msg = p
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_default();
        Err(format!("panicked: {msg}"))
    })
}

fn main() {
    let mut results: Vec<(u32, &str, Outcome)> = Vec::new();
    let mut subsets = Vec::new();

    let r1 = panic::catch_unwind(panic::AssertUnwindSafe(|| criterion_1(&mut subsets)))
        .unwrap_or_else(|_| Err("panicked".into()));
    results.push((1, "oracle equivalence (refinement)", r1));
    let r2 = panic::catch_unwind(panic::AssertUnwindSafe(|| criterion_2(&mut subsets)))
        .unwrap_or_else(|_| Err("panicked".into()));
    results.push((2, "endpoint-technique equivalence", r2));
    let (r3, r4) = panic::catch_unwind(panic::AssertUnwindSafe(|| criterion_3_and_4(&mut subsets)))
        .unwrap_or_else(|_| (Err("panicked".into()), Err("panicked".into())));
    results.push((3, "plant-and-recover", r3));
    results.push((4, "duplicate suppression", r4));
    results.push((5, "matcher equivalence", guarded(criterion_5)));
    let r6 = criterion_6(&subsets);
    results.push((6, "technique subset relations", r6));
    results.push((7, "reference-dataset prevalence (conditional)", guarded(criterion_7)));
    results.push((8, "NAT-merge monotonicity", guarded(criterion_8)));

    let mut failed = false;
    for (n, name, r) in &results {
        match r {
            Ok(detail) => println!("criterion {n} ({name}): PASS - {detail}"),
            Err(detail) => {
                failed = true;
                println!("criterion {n} ({name}): FAIL - {detail}");
            }
        }
    }
    if failed {
        std::process::exit(1);
    }
}
