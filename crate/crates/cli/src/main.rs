//! `gramlog`: build n-gram dictionaries, parse logs offline or online, and
//! run the evaluation experiments.

mod args;
mod out;

use std::fs::File;
use std::io::{self, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use gramlog::config::ConfigFile;
use gramlog::dictionary::NGramDictionary;
use gramlog::eval::{self, StabilisationOptions};
use gramlog::output::CsvSink;
use gramlog::parallel::{self, OfflineOptions};
use gramlog::parser::PlaceholderStyle;
use gramlog::preprocess::{DatasetConfig, RecordReader};
use gramlog::streaming::{OnlineConfig, OnlineParser, DEFAULT_REFRESH};
use gramlog::synth::{self, SynthLog, SynthSpec};
use gramlog::threshold::{estimate_or_fallback, ThresholdConfig, ThresholdPair};

use args::{parse_size, parse_threshold, Basis, Order, Placeholder};
use out::Output;

/// Datasets available without `--config`.
const BUILTIN_CONFIG: &str = include_str!("../../../configs/loghub.ini");
const DEFAULT_SEED: u64 = 20_200_101;

#[derive(Parser)]
#[command(name = "gramlog", version, about = "Log parsing with 2-gram/3-gram dictionaries")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a dictionary file from a log.
    BuildDict {
        #[command(flatten)]
        data: DatasetArgs,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Parse a log into LineId,Content,EventTemplate,ParameterList CSV.
    Parse {
        #[command(flatten)]
        data: DatasetArgs,
        #[arg(long)]
        input: PathBuf,
        /// Prebuilt dictionary; without it the dictionary is built from the input first.
        #[arg(long)]
        dict: Option<PathBuf>,
        /// CSV destination; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        thresholds: ThresholdArgs,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Parse a stream message by message, updating the dictionary as it goes.
    Online {
        #[command(flatten)]
        data: DatasetArgs,
        /// Log to read; stdin when omitted.
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Re-estimate thresholds every this many messages.
        #[arg(long, default_value_t = DEFAULT_REFRESH)]
        refresh: u64,
        #[command(flatten)]
        thresholds: ThresholdArgs,
    },
    /// Evaluation experiments.
    #[command(subcommand)]
    Eval(EvalCommand),
    /// Time end-to-end parsing of random chunks of a log.
    Bench {
        #[command(flatten)]
        data: DatasetArgs,
        #[arg(long)]
        input: PathBuf,
        /// Chunk sizes, comma separated; K, M and G are powers of 1024 (300K = 307200 bytes).
        #[arg(long, value_parser = parse_size, value_delimiter = ',', default_value = "300K,1M,10M")]
        sizes: Vec<u64>,
        #[arg(long)]
        seed: Option<u64>,
        /// Timed runs per size, after one warm-up run.
        #[arg(long, default_value_t = 3)]
        runs: usize,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        thresholds: ThresholdArgs,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Write a synthetic log in the `Synthetic` dataset format.
    Synth {
        #[arg(long)]
        out: PathBuf,
        /// Stop after this many messages.
        #[arg(long, conflicts_with = "size")]
        messages: Option<u64>,
        /// Stop once this many bytes are written (K, M, G are powers of 1024).
        #[arg(long, value_parser = parse_size)]
        size: Option<u64>,
        /// Also write ground truth as LineId,Content,EventId,EventTemplate CSV.
        #[arg(long, requires = "messages")]
        truth: Option<PathBuf>,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long, default_value_t = 40)]
        templates: usize,
        #[arg(long, value_enum, default_value_t = Order::Workflows)]
        order: Order,
    },
}

#[derive(Subcommand)]
enum EvalCommand {
    /// Template accuracy against a labelled LogPai structured CSV.
    Accuracy {
        #[command(flatten)]
        data: DatasetArgs,
        #[arg(long)]
        input: PathBuf,
        /// Ground truth (`*_structured.csv`).
        #[arg(long)]
        truth: PathBuf,
        /// Mismatch audit CSV; defaults to `<dataset>_mismatches.csv`.
        #[arg(long)]
        audit: Option<PathBuf>,
        #[command(flatten)]
        thresholds: ThresholdArgs,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Agreement of prefix dictionaries with the full dictionary.
    Stabilise {
        #[command(flatten)]
        data: DatasetArgs,
        #[arg(long)]
        input: PathBuf,
        /// Prefix increment as a fraction of the log.
        #[arg(long, default_value_t = 0.05)]
        step: f64,
        /// Keep going after full agreement is reached.
        #[arg(long)]
        all: bool,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        thresholds: ThresholdArgs,
    },
    /// Online vs. offline agreement and timing.
    CompareOnline {
        #[command(flatten)]
        data: DatasetArgs,
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = DEFAULT_REFRESH)]
        refresh: u64,
        #[arg(long, default_value_t = 3)]
        runs: usize,
        #[command(flatten)]
        thresholds: ThresholdArgs,
    },
}

#[derive(Args)]
struct DatasetArgs {
    /// Dataset config file; the bundled loghub formats are used when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Section of the config file to use.
    #[arg(long)]
    dataset: String,
}

impl DatasetArgs {
    fn load(&self) -> Result<DatasetConfig> {
        let file = match &self.config {
            Some(path) => ConfigFile::load(path).with_context(|| format!("config {}", path.display()))?,
            None => ConfigFile::parse(BUILTIN_CONFIG).context("bundled config")?,
        };
        Ok(file.dataset(&self.dataset)?.clone())
    }
}

#[derive(Args)]
struct ThresholdArgs {
    /// Fixed thresholds as `t3,t2`; disables estimation.
    #[arg(long, value_parser = parse_threshold)]
    threshold: Option<ThresholdPair>,
    /// loess span, in (0, 1].
    #[arg(long, default_value_t = 0.75)]
    span: f64,
    /// Series the two-cluster break is computed on.
    #[arg(long = "break-on", value_enum, default_value_t = Basis::Derivative)]
    break_on: Basis,
    #[arg(long, value_enum, default_value_t = Placeholder::Dollar)]
    placeholder: Placeholder,
}

impl ThresholdArgs {
    fn config(&self) -> Result<ThresholdConfig> {
        if !(self.span > 0.0 && self.span <= 1.0) {
            bail!("--span must be in (0, 1], got {}", self.span);
        }
        Ok(ThresholdConfig { span: self.span, basis: self.break_on.into() })
    }

    fn style(&self) -> PlaceholderStyle {
        self.placeholder.into()
    }

    fn online(&self, refresh: u64) -> Result<OnlineConfig> {
        if refresh == 0 {
            bail!("--refresh must be at least 1");
        }
        Ok(OnlineConfig { refresh, threshold: self.config()?, fixed: self.threshold, style: self.style() })
    }

    fn offline(&self, workers: usize) -> Result<OfflineOptions> {
        Ok(OfflineOptions { workers, threshold: self.config()?, fixed: self.threshold, style: self.style() })
    }
}

#[derive(Args)]
struct RunArgs {
    /// Worker threads; defaults to the number of available cores.
    #[arg(long)]
    workers: Option<usize>,
}

impl RunArgs {
    fn workers(&self) -> Result<usize> {
        match self.workers {
            Some(0) => bail!("--workers must be at least 1"),
            Some(w) => Ok(w),
            None => Ok(parallel::available_workers()),
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if is_broken_pipe(&e) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = format!("{e:#}").replace('\n', " ");
            eprintln!("gramlog: error: {msg}");
            ExitCode::FAILURE
        }
    }
}

/// A closed stdout (`gramlog ... | head`) is not an error.
fn is_broken_pipe(e: &anyhow::Error) -> bool {
    e.chain().any(|c| {
        c.downcast_ref::<io::Error>().is_some_and(|io| io.kind() == io::ErrorKind::BrokenPipe)
            || c.downcast_ref::<gramlog::csv::Error>().is_some_and(|csv| {
                matches!(csv.kind(), gramlog::csv::ErrorKind::Io(io) if io.kind() == io::ErrorKind::BrokenPipe)
            })
    })
}

fn read(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).with_context(|| format!("reading {}", path.display()))
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::BuildDict { data, input, out, run } => {
            let cfg = data.load()?;
            let dict = parallel::build_bytes(&read(&input)?, &cfg, run.workers()?)?;
            let mut sink = Output::file(&out)?;
            dict.save(&mut sink)?;
            sink.commit()?;
            println!(
                "messages {}, 2-grams {}, 3-grams {}",
                dict.total_messages(),
                dict.distinct(2),
                dict.distinct(3)
            );
        }
        Command::Parse { data, input, dict, out, thresholds, run } => {
            let cfg = data.load()?;
            let bytes = read(&input)?;
            let start = Instant::now();
            let opts = thresholds.offline(run.workers()?)?;
            let (t, parsed) = match dict {
                Some(path) => {
                    let file = File::open(&path).with_context(|| format!("opening {}", path.display()))?;
                    let dict = NGramDictionary::load(BufReader::new(file))
                        .with_context(|| format!("loading {}", path.display()))?;
                    let t = opts.fixed.unwrap_or_else(|| estimate_or_fallback(&dict, &opts.threshold));
                    (t, parallel::parse_bytes(&bytes, &cfg, &dict, t, opts.style, opts.workers)?)
                }
                None => {
                    let r = parallel::offline_bytes(&bytes, &cfg, &opts)?;
                    (r.thresholds, r.parsed)
                }
            };
            let elapsed = start.elapsed();
            let mut csv = CsvSink::new(Output::new(out.as_deref())?)?;
            csv.write_all(&parsed)?;
            csv.finish()?.commit()?;
            eprintln!(
                "parsed {} messages in {:.3}s (t3={}, t2={}, workers={})",
                parsed.len(),
                elapsed.as_secs_f64(),
                t.t3,
                t.t2,
                opts.workers
            );
        }
        Command::Online { data, input, out, refresh, thresholds } => {
            let cfg = data.load()?;
            let online = thresholds.online(refresh)?;
            let source: Box<dyn io::BufRead> = match &input {
                Some(path) => Box::new(BufReader::new(
                    File::open(path).with_context(|| format!("opening {}", path.display()))?,
                )),
                None => Box::new(io::stdin().lock()),
            };
            let mut csv = CsvSink::new(Output::new(out.as_deref())?)?.flushing();
            let mut p = OnlineParser::new(online);
            let mut n = 0u64;
            for rec in RecordReader::new(source, &cfg) {
                for m in p.online_step(rec?) {
                    csv.write(&m)?;
                    n += 1;
                }
            }
            for m in p.flush() {
                csv.write(&m)?;
                n += 1;
            }
            csv.finish()?.commit()?;
            let t = p.thresholds();
            eprintln!("parsed {n} messages online (final t3={}, t2={})", t.t3, t.t2);
        }
        Command::Eval(cmd) => run_eval(cmd)?,
        Command::Bench { data, input, sizes, seed, runs, out, thresholds, run } => {
            let cfg = data.load()?;
            let seed = seed.unwrap_or(DEFAULT_SEED);
            eprintln!("seed {seed}");
            if runs == 0 {
                bail!("--runs must be at least 1");
            }
            let opts = thresholds.offline(run.workers()?)?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let rows = eval::efficiency_run_file(&input, &cfg, &sizes, &mut rng, &opts, runs)
                .with_context(|| format!("benchmarking {}", input.display()))?;
            let mut sink = Output::new(out.as_deref())?;
            eval::write_efficiency(&mut sink, &rows)?;
            sink.commit()?;
        }
        Command::Synth { out, messages, size, truth, seed, templates, order } => {
            if templates == 0 {
                bail!("--templates must be at least 1");
            }
            let spec = SynthSpec { seed, templates, order: order.into(), ..Default::default() };
            let mut sink = Output::file(&out)?;
            match (messages, size) {
                (Some(n), _) => {
                    let lines = synth::generate(spec, n);
                    for l in &lines {
                        writeln!(sink, "{}", l.line)?;
                    }
                    if let Some(path) = truth {
                        let mut t = Output::file(&path)?;
                        synth::write_structured(&mut t, &lines)?;
                        t.commit()?;
                    }
                }
                (None, Some(bytes)) => {
                    SynthLog::new(spec, u64::MAX).write_bytes(&mut sink, bytes)?;
                }
                (None, None) => bail!("one of --messages or --size is required"),
            }
            sink.commit()?;
        }
    }
    Ok(())
}

fn run_eval(cmd: EvalCommand) -> Result<()> {
    match cmd {
        EvalCommand::Accuracy { data, input, truth, audit, thresholds, run } => {
            let cfg = data.load()?;
            let opts = thresholds.offline(run.workers()?)?;
            let labelled = eval::load_labeled_file(&truth).with_context(|| format!("loading {}", truth.display()))?;
            let r = parallel::offline_bytes(&read(&input)?, &cfg, &opts)?;
            let report = eval::parsing_accuracy(&cfg.name, &r.parsed, &labelled)?;
            let audit = audit.unwrap_or_else(|| PathBuf::from(format!("{}_mismatches.csv", cfg.name)));
            let mut sink = Output::file(&audit)?;
            report.write_mismatches(&mut sink)?;
            sink.commit()?;
            println!(
                "{} accuracy {:.4} ({}/{}), t3={}, t2={}, audit {}",
                report.dataset,
                report.parsing_accuracy,
                report.correct,
                report.total,
                r.thresholds.t3,
                r.thresholds.t2,
                audit.display()
            );
        }
        EvalCommand::Stabilise { data, input, step, all, out, thresholds } => {
            let cfg = data.load()?;
            if !(step > 0.0 && step <= 1.0) {
                bail!("--step must be in (0, 1], got {step}");
            }
            let records = eval::read_all(&read(&input)?, &cfg)?;
            let opts = StabilisationOptions { step, threshold: thresholds.config()?, stop_at_full: !all };
            let curve = eval::stabilisation_curve(&records, &opts);
            let mut sink = Output::new(out.as_deref())?;
            writeln!(sink, "Fraction,Agreement")?;
            for (f, a) in curve {
                writeln!(sink, "{f:.2},{a:.4}")?;
            }
            sink.commit()?;
        }
        EvalCommand::CompareOnline { data, input, refresh, runs, thresholds } => {
            let cfg = data.load()?;
            if runs == 0 {
                bail!("--runs must be at least 1");
            }
            let r = eval::online_offline_compare(&read(&input)?, &cfg, &thresholds.online(refresh)?, runs)?;
            println!("messages {}", r.messages);
            println!("agreement {:.4}", r.agreement);
            println!("online_seconds {:.6}", r.t_online.as_secs_f64());
            println!("offline_seconds {:.6}", r.t_offline.as_secs_f64());
            println!("efficiency_difference_ratio {:.4}", r.efficiency_difference_ratio);
        }
    }
    Ok(())
}
