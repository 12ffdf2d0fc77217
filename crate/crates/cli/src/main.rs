mod config;

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::net::IpAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use log::{info, warn};

use seqprint::evaluation::{
    extract_all, false_positive_scan, generate, load_dataset, merge_samples, report_from, write_dataset, Bins,
    Dataset, Journal, ScanFingerprint, ScanOptions, SynthPlan,
};
use seqprint::fingerprint::{read_fingerprint, summarize, write_fingerprint, Fingerprint, FingerprintError};
use seqprint::ingest::split::window_from_secs;
use seqprint::ingest::{preprocess, read_capture, read_event_timestamps, split_by_events, write_pcap, FilterPolicy, Scope};
use seqprint::matcher::{MatchError, Matcher};
use seqprint::metrics::{Metric, TechniqueKind};
use seqprint::refinement::refine;
use seqprint::tabulation::{read_sample, tabulate, write_sample, EventId, SampleId, TabulatedTrafficSample};

use config::{resolve_refinement, RefineFlags, RunConfig};

#[derive(Parser)]
#[command(name = "seqprint", version, about = "Packet-sequence fingerprints of events in network traffic")]
struct Cli {
    /// JSON run configuration; command-line flags take precedence.
    #[arg(long, global = true, env = "SEQPRINT_CONFIG")]
    config: Option<PathBuf>,
    /// Worker threads for extract and eval (default: logical CPUs).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// More log output on stderr (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Cut a capture into one capture per event timestamp.
    Split {
        #[arg(long)]
        pcap: PathBuf,
        /// One decimal epoch-seconds timestamp per line.
        #[arg(long)]
        timestamps: PathBuf,
        /// Window length after each timestamp, in seconds [default: 15].
        #[arg(long)]
        window_secs: Option<String>,
        /// Receives `<k>.pcap` for the k-th timestamp (0-based).
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Turn one traffic sample capture into a tabulated CSV sample.
    Tabulate {
        #[arg(long)]
        pcap: PathBuf,
        /// Private address of the fingerprinted device.
        #[arg(long)]
        device_ip: IpAddr,
        /// Keep DNS messages to or from the device whatever the peer.
        #[arg(long)]
        dns_exempt: bool,
        #[arg(long, value_enum, default_value_t = ScopeArg::Wan)]
        scope: ScopeArg,
        #[arg(long)]
        event_id: EventId,
        #[arg(long)]
        sample_id: SampleId,
        #[arg(long)]
        out: PathBuf,
    },
    /// Extract the fingerprint of one event from its samples.
    Extract {
        /// Directory of `<sample_id>.csv` files of one event.
        #[arg(long)]
        samples_dir: Option<PathBuf>,
        #[command(flatten)]
        refine: RefineArgs,
        #[arg(long, value_enum, default_value_t = FormArg::Complete)]
        form: FormArg,
        /// Dataset name recorded in the fingerprint.
        #[arg(long)]
        dataset: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Condense a complete fingerprint into its summary form.
    Summarize {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Look for a summary fingerprint in a sample. Exit 0 on a match, 1 otherwise.
    Match {
        #[arg(long)]
        fingerprint: PathBuf,
        #[arg(long)]
        sample: PathBuf,
    },
    /// Dataset-level evaluation.
    #[command(subcommand)]
    Eval(EvalCommand),
    /// Merge samples into one, as if seen behind a single NAT.
    Merge {
        #[arg(long, num_args = 1.., required = true)]
        samples: Vec<PathBuf>,
        /// Event id of the merged sample [default: the first sample's].
        #[arg(long)]
        event_id: Option<EventId>,
        /// Sample id of the merged sample [default: the first sample's].
        #[arg(long)]
        sample_id: Option<SampleId>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate a synthetic dataset with planted sequences.
    Synth {
        #[arg(long)]
        plan: PathBuf,
        /// Overrides the plan's seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Receives `<event>/<sample>.csv` and `truth.json`.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum EvalCommand {
    /// Share of events with a nonempty fingerprint, as CSV.
    Prevalence {
        /// Dataset directories laid out as `<event>/<sample>.csv`.
        #[arg(long = "dataset-dir", num_args = 1..)]
        dataset_dirs: Vec<PathBuf>,
        #[command(flatten)]
        refine: RefineArgs,
        /// Write nonempty summary fingerprints as `<dataset>-<event>.json`
        /// (one technique only).
        #[arg(long)]
        save_fingerprints: Option<PathBuf>,
        /// CSV report [default: standard output].
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Closed-world false-positive scan of summary fingerprints.
    Fp {
        /// Directory of summary fingerprint files (`*.json`).
        #[arg(long)]
        fingerprints_dir: Option<PathBuf>,
        /// Datasets to scan.
        #[arg(long, num_args = 1..)]
        against_dirs: Vec<PathBuf>,
        /// Ascending bin edges starting at 0 [default: 0,10,100].
        #[arg(long)]
        bins: Option<String>,
        /// Dataset of the fingerprints' own events, when the files do not name it.
        #[arg(long)]
        source_dataset: Option<String>,
        /// Receives `fp_fingerprints.csv`, `fp_cells.csv` and the journal.
        #[arg(long)]
        out_dir: Option<PathBuf>,
        /// Progress journal [default: <out-dir>/fp_journal.jsonl].
        #[arg(long)]
        journal: Option<PathBuf>,
        /// Discard an existing journal instead of resuming from it.
        #[arg(long)]
        fresh: bool,
        /// (fingerprint, event) shards per journal flush.
        #[arg(long)]
        batch_size: Option<usize>,
    },
}

#[derive(Args, Clone, Default)]
struct RefineArgs {
    /// sdbf, esdbf, ebf, fqdnbf, esldbf or custom:<name> [default: sdbf].
    /// `eval prevalence` accepts a comma-separated list, one report row each.
    #[arg(long, value_delimiter = ',')]
    technique: Vec<TechniqueKind>,
    /// Stream prefix length P [default: 20; 1 for endpoint techniques].
    #[arg(long = "P")]
    prefix_len: Option<usize>,
    /// Shortest window n_min (required for sdbf and esdbf; 1 for endpoint techniques).
    #[arg(long = "n-min")]
    n_min: Option<usize>,
    /// Samples per event T [default: the number found].
    #[arg(long = "T")]
    sample_count: Option<usize>,
    /// Distinct samples a cluster must span, T_min [default: T].
    #[arg(long = "T-min")]
    min_samples: Option<usize>,
    /// Size slack h in bytes [default: 0].
    #[arg(long = "h")]
    h: Option<u32>,
    /// Cluster radius [default: 0].
    #[arg(long)]
    epsilon: Option<f64>,
    /// Minimum cluster population [default: T].
    #[arg(long = "min-pts")]
    min_pts: Option<usize>,
}

impl RefineArgs {
    fn flags(&self) -> RefineFlags {
        RefineFlags {
            technique: self.technique.first().cloned(),
            prefix_len: self.prefix_len,
            n_min: self.n_min,
            sample_count: self.sample_count,
            min_samples: self.min_samples,
            epsilon: self.epsilon,
            min_pts: self.min_pts,
            h: self.h,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ScopeArg {
    Wan,
    Lan,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FormArg {
    Complete,
    Summary,
}

/// Why a command did not succeed.
enum Failure {
    /// Bad flags, configuration or input kind: exit 2.
    Usage(anyhow::Error),
    /// Anything that went wrong while working: exit 3.
    Runtime(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Runtime(e)
    }
}

trait UsageExt<T> {
    fn usage(self) -> Result<T, Failure>;
}

impl<T, E: Into<anyhow::Error>> UsageExt<T> for Result<T, E> {
    fn usage(self) -> Result<T, Failure> {
        self.map_err(|e| Failure::Usage(e.into()))
    }
}

type Outcome = Result<ExitCode, Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            // Help and version go to stdout with exit 0, usage errors exit 2.
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .target(env_logger::Target::Stderr)
        .init();

    match run(cli) {
        Ok(code) => code,
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(3)
        }
    }
}

fn run(cli: Cli) -> Outcome {
    let file = match &cli.config {
        Some(p) => RunConfig::load(p).usage()?,
        None => RunConfig::default(),
    };
    if let Some(n) = cli.jobs.or(file.jobs) {
        if n == 0 {
            return Err(Failure::Usage(anyhow!("--jobs must be at least 1")));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring worker threads")?;
    }
    match cli.command {
        Command::Split {
            pcap,
            timestamps,
            window_secs,
            out_dir,
        } => cmd_split(&file, &pcap, &timestamps, window_secs, out_dir),
        Command::Tabulate {
            pcap,
            device_ip,
            dns_exempt,
            scope,
            event_id,
            sample_id,
            out,
        } => {
            let scope = match scope {
                ScopeArg::Wan => Scope::Wan,
                ScopeArg::Lan => Scope::Lan,
            };
            let policy = FilterPolicy::new(device_ip, scope, dns_exempt).usage()?;
            let raw = read_capture(&pcap).with_context(|| format!("reading {}", pcap.display()))?;
            let pre = preprocess(&raw, &policy);
            if pre.malformed > 0 {
                warn!("{}: skipped {} malformed packet(s)", pcap.display(), pre.malformed);
            }
            let sample = tabulate(&pre.streams, event_id, sample_id);
            write_sample(&sample, &out).with_context(|| format!("writing {}", out.display()))?;
            info!("{} stream(s), {} record(s)", sample.stream_count(), sample.records().len());
            Ok(ExitCode::SUCCESS)
        }
        Command::Extract {
            samples_dir,
            refine: args,
            form,
            dataset,
            out,
        } => cmd_extract(&file, samples_dir, &args, form, dataset, out),
        Command::Summarize { input, out } => {
            let f = read_fingerprint(&input).usage()?;
            let s = match f {
                Fingerprint::Complete(c) => summarize(&c),
                Fingerprint::Summary(s) => {
                    info!("{} is already in summary form", input.display());
                    s
                }
            };
            write_fingerprint(&Fingerprint::Summary(s), &out).with_context(|| format!("writing {}", out.display()))?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Match { fingerprint, sample } => cmd_match(&fingerprint, &sample),
        Command::Eval(EvalCommand::Prevalence {
            dataset_dirs,
            refine: args,
            save_fingerprints,
            out,
        }) => cmd_prevalence(&file, dataset_dirs, &args, save_fingerprints, out),
        Command::Eval(EvalCommand::Fp {
            fingerprints_dir,
            against_dirs,
            bins,
            source_dataset,
            out_dir,
            journal,
            fresh,
            batch_size,
        }) => {
            let bins = Bins::parse(bins.as_deref().or(file.bins.as_deref()).unwrap_or("0,10,100")).usage()?;
            let fp_dir = fingerprints_dir
                .or_else(|| file.fingerprints_dir.clone())
                .ok_or_else(|| Failure::Usage(anyhow!("--fingerprints-dir is required")))?;
            let against = if against_dirs.is_empty() {
                file.against_dirs.clone().unwrap_or_default()
            } else {
                against_dirs
            };
            if against.is_empty() {
                return Err(Failure::Usage(anyhow!("--against-dirs needs at least one dataset")));
            }
            let out_dir = out_dir
                .or_else(|| file.out_dir.clone())
                .ok_or_else(|| Failure::Usage(anyhow!("--out-dir is required")))?;
            let options = ScanOptions {
                bins,
                batch_size: batch_size.or(file.batch_size).unwrap_or(256),
            };
            cmd_fp(&fp_dir, &against, source_dataset, &out_dir, journal, fresh, &options)
        }
        Command::Merge {
            samples,
            event_id,
            sample_id,
            out,
        } => {
            let parts = samples
                .iter()
                .map(|p| read_sample(p).with_context(|| format!("reading {}", p.display())))
                .collect::<anyhow::Result<Vec<_>>>()?;
            let refs: Vec<&TabulatedTrafficSample> = parts.iter().collect();
            let e = event_id.unwrap_or(parts[0].event_id());
            let s = sample_id.unwrap_or(parts[0].sample_id());
            let merged = merge_samples(&refs, e, s);
            write_sample(&merged, &out).with_context(|| format!("writing {}", out.display()))?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Synth { plan, seed, out_dir } => {
            let mut plan = SynthPlan::read(&plan).usage()?;
            if let Some(s) = seed.or(file.seed) {
                plan.seed = s;
            }
            let out_dir = out_dir
                .or_else(|| file.out_dir.clone())
                .ok_or_else(|| Failure::Usage(anyhow!("--out-dir is required")))?;
            let out = generate(&plan).usage()?;
            write_dataset(&out.dataset, &out_dir).context("writing dataset")?;
            let truth = serde_json::to_string_pretty(&out.truth).context("serializing ground truth")?;
            fs::write(out_dir.join("truth.json"), truth + "\n").context("writing truth.json")?;
            info!("{} event(s) written to {}", out.dataset.events.len(), out_dir.display());
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn cmd_split(file: &RunConfig, pcap: &Path, timestamps: &Path, window: Option<String>, out_dir: Option<PathBuf>) -> Outcome {
    let window = window.or_else(|| file.window_secs.clone()).unwrap_or_else(|| "15".into());
    let window = window_from_secs(&window).usage()?;
    let out_dir = out_dir
        .or_else(|| file.out_dir.clone())
        .ok_or_else(|| Failure::Usage(anyhow!("--out-dir is required")))?;
    let events = read_event_timestamps(timestamps).usage()?;
    let raw = read_capture(pcap).with_context(|| format!("reading {}", pcap.display()))?;
    let parts = split_by_events(&raw, &events, window).usage()?;
    fs::create_dir_all(&out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    for (k, part) in parts.iter().enumerate() {
        let path = out_dir.join(format!("{k}.pcap"));
        write_pcap(&path, part).with_context(|| format!("writing {}", path.display()))?;
    }
    info!("{} capture(s) written", parts.len());
    Ok(ExitCode::SUCCESS)
}

/// Samples of one event, ordered by sample id.
fn load_event_samples(dir: &Path) -> anyhow::Result<Vec<TabulatedTrafficSample>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("reading {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.extension().and_then(|x| x.to_str()) == Some("csv"))
        .collect();
    paths.sort();
    let mut samples = paths
        .iter()
        .map(|p| read_sample(p).with_context(|| format!("reading {}", p.display())))
        .collect::<anyhow::Result<Vec<_>>>()?;
    samples.sort_by_key(|s| s.sample_id());
    Ok(samples)
}

fn cmd_extract(
    file: &RunConfig,
    samples_dir: Option<PathBuf>,
    args: &RefineArgs,
    form: FormArg,
    dataset: Option<String>,
    out: Option<PathBuf>,
) -> Outcome {
    let dir = samples_dir
        .or_else(|| file.samples_dir.clone())
        .ok_or_else(|| Failure::Usage(anyhow!("--samples-dir is required")))?;
    let out = out
        .or_else(|| file.out.clone())
        .ok_or_else(|| Failure::Usage(anyhow!("--out is required")))?;
    if args.technique.len() > 1 {
        return Err(Failure::Usage(anyhow!("extract takes a single --technique")));
    }
    // Validate what can be validated before reading any sample.
    if args.sample_count.or(file.sample_count).is_some() {
        resolve_refinement(&args.flags(), file, 0).usage()?;
    }
    let samples = load_event_samples(&dir)?;
    let config = resolve_refinement(&args.flags(), file, samples.len()).usage()?;
    let metric = Metric::builtin(config.technique.clone()).usage()?;
    let mut s = refine(&samples, &config, &metric).usage()?;
    s.dataset = dataset;
    if s.is_empty() {
        warn!("event {} has an empty fingerprint", s.event_id);
    }
    let f = match form {
        FormArg::Complete => Fingerprint::Complete(s),
        FormArg::Summary => Fingerprint::Summary(summarize(&s)),
    };
    write_fingerprint(&f, &out).with_context(|| format!("writing {}", out.display()))?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_match(fingerprint: &Path, sample: &Path) -> Outcome {
    let summary = match read_fingerprint(fingerprint).usage()? {
        Fingerprint::Summary(s) => s,
        Fingerprint::Complete(_) => {
            return Err(Failure::Usage(anyhow!(FingerprintError::WrongForm {
                expected: "summary",
                found: "complete",
            })
            .context(format!("{} (run `seqprint summarize` first)", fingerprint.display()))));
        }
    };
    let sample = read_sample(sample).with_context(|| format!("reading {}", sample.display()))?;
    let matcher = match Matcher::builtin(&summary) {
        Ok(m) => m,
        Err(e @ (MatchError::Vacuous | MatchError::Metric(_))) => return Err(Failure::Usage(e.into())),
        Err(e) => return Err(Failure::Runtime(e.into())),
    };
    let result = matcher.match_sample(&sample);
    let mut stdout = std::io::stdout().lock();
    serde_json::to_writer(&mut stdout, &result).context("writing result")?;
    writeln!(stdout).context("writing result")?;
    Ok(if result.matched { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn cmd_prevalence(
    file: &RunConfig,
    dataset_dirs: Vec<PathBuf>,
    args: &RefineArgs,
    save: Option<PathBuf>,
    out: Option<PathBuf>,
) -> Outcome {
    let dirs = if dataset_dirs.is_empty() {
        file.dataset_dirs.clone().unwrap_or_default()
    } else {
        dataset_dirs
    };
    if dirs.is_empty() {
        return Err(Failure::Usage(anyhow!("--dataset-dir is required")));
    }
    let techniques: Vec<Option<TechniqueKind>> = if args.technique.is_empty() {
        vec![None]
    } else {
        args.technique.iter().cloned().map(Some).collect()
    };
    if save.is_some() && techniques.len() > 1 {
        return Err(Failure::Usage(anyhow!("--save-fingerprints takes a single technique")));
    }
    let datasets = dirs
        .iter()
        .map(|d| load_dataset(d).with_context(|| format!("loading {}", d.display())))
        .collect::<anyhow::Result<Vec<Dataset>>>()?;

    let mut rows = Vec::new();
    for ds in &datasets {
        for tech in &techniques {
            let mut flags = args.flags();
            if tech.is_some() {
                flags.technique = tech.clone();
            }
            let config = resolve_refinement(&flags, file, ds.sample_count().unwrap_or(1)).usage()?;
            let metric = Metric::builtin(config.technique.clone()).usage()?;
            let seqnatures = extract_all(ds, &config, &metric).usage()?;
            if let Some(dir) = &save {
                fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
                for (e, s) in seqnatures.iter().filter(|(_, s)| !s.is_empty()) {
                    let path = dir.join(format!("{}-{e}.json", ds.name));
                    write_fingerprint(&Fingerprint::Summary(summarize(s)), &path)
                        .with_context(|| format!("writing {}", path.display()))?;
                }
            }
            let r = report_from(ds, config.technique.kind.to_string(), &seqnatures);
            if r.empty_dataset {
                warn!("dataset {} has no events", ds.name);
            }
            rows.push(r);
        }
    }

    let sink: Box<dyn Write> = match &out {
        Some(p) => Box::new(fs::File::create(p).with_context(|| format!("creating {}", p.display()))?),
        None => Box::new(std::io::stdout().lock()),
    };
    let mut w = csv::Writer::from_writer(sink);
    w.write_record([
        "dataset",
        "technique",
        "fingerprintable",
        "total_events",
        "percentage",
        "empty_dataset",
        "baseline_events",
    ])
    .context("writing report")?;
    for r in rows {
        w.write_record([
            r.dataset,
            r.technique,
            r.fingerprintable.to_string(),
            r.total_events.to_string(),
            r.percentage.to_string(),
            r.empty_dataset.to_string(),
            r.baseline_events.to_string(),
        ])
        .context("writing report")?;
    }
    w.flush().context("writing report")?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_fp(
    fp_dir: &Path,
    against: &[PathBuf],
    source_dataset: Option<String>,
    out_dir: &Path,
    journal_path: Option<PathBuf>,
    fresh: bool,
    options: &ScanOptions,
) -> Outcome {
    let mut paths: Vec<PathBuf> = fs::read_dir(fp_dir)
        .with_context(|| format!("reading {}", fp_dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().and_then(|x| x.to_str()) == Some("json"))
        .collect();
    paths.sort();
    let mut fingerprints = Vec::new();
    for p in &paths {
        let summary = match read_fingerprint(p).with_context(|| format!("reading {}", p.display())).usage()? {
            Fingerprint::Summary(s) => s,
            Fingerprint::Complete(_) => {
                return Err(Failure::Usage(anyhow!("{}: expected the summary form", p.display())));
            }
        };
        if summary.is_empty() {
            warn!("{}: empty fingerprint skipped", p.display());
            continue;
        }
        let dataset = source_dataset
            .clone()
            .or_else(|| summary.dataset.clone())
            .ok_or_else(|| Failure::Usage(anyhow!("{}: no dataset recorded; pass --source-dataset", p.display())))?;
        let metric = Metric::builtin(summary.technique().clone()).usage()?;
        fingerprints.push((ScanFingerprint { dataset, summary }, metric));
    }
    if fingerprints.is_empty() {
        return Err(Failure::Usage(anyhow!("no nonempty summary fingerprints in {}", fp_dir.display())));
    }
    let datasets = against
        .iter()
        .map(|d| load_dataset(d).with_context(|| format!("loading {}", d.display())))
        .collect::<anyhow::Result<Vec<Dataset>>>()?;
    let names: Vec<String> = datasets.iter().map(|d| d.name.clone()).collect();
    let mut seen = BTreeMap::new();
    for n in &names {
        if seen.insert(n.clone(), ()).is_some() {
            return Err(Failure::Usage(anyhow!("two scanned datasets are both named `{n}`")));
        }
    }

    fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    let journal_path = journal_path.unwrap_or_else(|| out_dir.join("fp_journal.jsonl"));
    if fresh && journal_path.exists() {
        fs::remove_file(&journal_path).with_context(|| format!("removing {}", journal_path.display()))?;
    }
    let (mut journal, resumed) = Journal::open(&journal_path).map_err(anyhow::Error::from)?;
    let refs: Vec<&Dataset> = datasets.iter().collect();
    let report = false_positive_scan(&fingerprints, &refs, options, Some(&mut journal), &resumed).usage()?;

    for e in &report.entries {
        if let Some((m, t)) = e.own_matched {
            if m < t {
                warn!("{}:{} matches only {m} of its own {t} samples", e.dataset, e.event_id);
            }
        }
    }

    let path = out_dir.join("fp_fingerprints.csv");
    let mut w = csv::Writer::from_path(&path).with_context(|| format!("creating {}", path.display()))?;
    w.write_record([
        "dataset",
        "event_id",
        "technique",
        "fp_events",
        "fp_samples",
        "bin",
        "own_matched",
        "own_samples",
    ])
    .context("writing report")?;
    for e in &report.entries {
        let (m, t) = e.own_matched.map_or((String::new(), String::new()), |(m, t)| (m.to_string(), t.to_string()));
        w.write_record([
            e.dataset.clone(),
            e.event_id.to_string(),
            e.technique.clone(),
            e.fp_events().to_string(),
            e.fp_samples.to_string(),
            e.bin.clone(),
            m,
            t,
        ])
        .context("writing report")?;
    }
    w.flush().context("writing report")?;

    let path = out_dir.join("fp_cells.csv");
    let mut w = csv::Writer::from_path(&path).with_context(|| format!("creating {}", path.display()))?;
    let mut header = vec![
        "technique".to_string(),
        "fingerprint_dataset".to_string(),
        "scanned_dataset".to_string(),
    ];
    header.extend(report.bins.iter().cloned());
    w.write_record(&header).context("writing report")?;
    for ((tech, d1, d2), counts) in report.cells(&options.bins, &names) {
        let mut row = vec![tech, d1, d2];
        row.extend(counts.iter().map(|c| c.to_string()));
        w.write_record(&row).context("writing report")?;
    }
    w.flush().context("writing report")?;
    Ok(ExitCode::SUCCESS)
}
