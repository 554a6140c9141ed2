//! Partitioned dictionary build and parse.
//!
//! The input is cut into contiguous byte ranges at record starts. Each range
//! is read and counted independently; the segment dictionaries are merged
//! pairwise and the windows straddling each cut are added back, so the
//! result equals a sequential build. Parsing then runs per range with the
//! real stream context on both sides, so output is identical for any
//! worker count.
//!
//! With the `parallel` feature (default) ranges are processed on a rayon
//! pool of `workers` threads; without it they run one after another.

use std::ops::Range;
use std::path::Path;
use std::time::{Duration, Instant};

use thiserror::Error;

use crate::dictionary::{combine_segments, BoundaryContext, DictionaryBuilder, NGramDictionary, StreamEdges};
use crate::parser::{ParsedMessage, Parser, PlaceholderStyle};
use crate::preprocess::{DatasetConfig, LogRecord, PreprocessError, RecordReader};
use crate::threshold::{estimate_or_fallback, ThresholdConfig, ThresholdPair};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("cannot read {path}: {source}")]
    Open {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Preprocess(#[from] PreprocessError),
    #[error("worker pool: {0}")]
    Pool(String),
}

/// Number of hardware threads, at least 1.
pub fn available_workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

#[cfg(feature = "parallel")]
fn run_all<T, U, F>(workers: usize, items: Vec<T>, f: F) -> Result<Vec<U>, PipelineError>
where
    T: Send,
    U: Send,
    F: Fn(T) -> U + Sync + Send,
{
    use rayon::prelude::*;
    if workers <= 1 {
        return Ok(items.into_iter().map(f).collect());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| PipelineError::Pool(e.to_string()))?;
    Ok(pool.install(|| items.into_par_iter().map(f).collect()))
}

#[cfg(not(feature = "parallel"))]
fn run_all<T, U, F>(_workers: usize, items: Vec<T>, f: F) -> Result<Vec<U>, PipelineError>
where
    F: Fn(T) -> U,
{
    Ok(items.into_iter().map(f).collect())
}

/// Splits `data` into at most `parts` contiguous ranges, each starting at a
/// line that matches the header pattern (or at offset 0), so that no record
/// is split across ranges.
pub fn partition(data: &[u8], cfg: &DatasetConfig, parts: usize) -> Vec<Range<usize>> {
    let parts = parts.max(1);
    if data.is_empty() {
        return vec![0..0];
    }
    let mut cuts = vec![0usize];
    for k in 1..parts {
        let target = (data.len() * k / parts).max(*cuts.last().unwrap());
        if let Some(cut) = next_record_start(data, cfg, target) {
            if cut > *cuts.last().unwrap() {
                cuts.push(cut);
            }
        }
    }
    cuts.push(data.len());
    cuts.dedup();
    cuts.windows(2).map(|w| w[0]..w[1]).collect()
}

fn next_record_start(data: &[u8], cfg: &DatasetConfig, from: usize) -> Option<usize> {
    let mut pos = match from {
        0 => 0,
        _ => from - 1 + memchr_newline(&data[from - 1..])?,
    };
    while pos < data.len() {
        let next = pos + memchr_newline(&data[pos..]).unwrap_or(data.len() - pos);
        let line = String::from_utf8_lossy(&data[pos..next]);
        if cfg.matches_header(line.trim_end_matches(['\n', '\r'])) {
            return Some(pos);
        }
        pos = next;
    }
    None
}

/// Offset just past the first `\n`.
fn memchr_newline(data: &[u8]) -> Option<usize> {
    data.iter().position(|&b| b == b'\n').map(|i| i + 1)
}

/// Records of one range, numbered from 1 within the range.
fn read_range(data: &[u8], cfg: &DatasetConfig) -> Result<Vec<LogRecord>, PreprocessError> {
    RecordReader::new(data, cfg).collect()
}

/// Records of one range plus its dictionary and edge tokens.
pub struct Segment {
    pub records: Vec<LogRecord>,
    pub dict: NGramDictionary,
    pub edges: StreamEdges,
}

fn load_segments(data: &[u8], cfg: &DatasetConfig, workers: usize) -> Result<Vec<Segment>, PipelineError> {
    let ranges = partition(data, cfg, workers);
    let segments = run_all(workers, ranges, |r| {
        let records = read_range(&data[r], cfg)?;
        let mut b = DictionaryBuilder::new();
        for rec in &records {
            b.push(&rec.tokens);
        }
        let (dict, edges) = b.finish_with_edges();
        Ok::<_, PreprocessError>(Segment { records, dict, edges })
    })?;
    let mut segments = segments.into_iter().collect::<Result<Vec<_>, _>>()?;
    let mut offset = 0;
    for s in &mut segments {
        for r in &mut s.records {
            r.line_id += offset;
        }
        offset += s.records.len() as u64;
    }
    Ok(segments)
}

/// Stream context around each segment: the tokens before and after it.
fn contexts(edges: &[&StreamEdges]) -> Vec<(BoundaryContext, BoundaryContext)> {
    let mut after = vec![BoundaryContext::default(); edges.len()];
    let mut following = BoundaryContext::default();
    for (i, e) in edges.iter().enumerate().rev() {
        after[i] = following.clone();
        let mut head = e.head.clone();
        head.fill_head(following.tokens());
        following = head;
    }
    let mut tail = BoundaryContext::default();
    edges
        .iter()
        .zip(after)
        .map(|(e, a)| {
            let before = tail.clone();
            tail.extend(e.tail.tokens());
            (before, a)
        })
        .collect()
}

fn read_input(path: &Path) -> Result<Vec<u8>, PipelineError> {
    std::fs::read(path).map_err(|source| PipelineError::Open { path: path.display().to_string(), source })
}

/// Dictionary of an in-memory log, built over `workers` ranges.
pub fn build_bytes(data: &[u8], cfg: &DatasetConfig, workers: usize) -> Result<NGramDictionary, PipelineError> {
    let segments = load_segments(data, cfg, workers)?;
    Ok(combine_segments(segments.into_iter().map(|s| (s.dict, s.edges)).collect()))
}

pub fn parallel_build(path: impl AsRef<Path>, cfg: &DatasetConfig, workers: usize) -> Result<NGramDictionary, PipelineError> {
    build_bytes(&read_input(path.as_ref())?, cfg, workers)
}

fn parse_segments(
    segments: &[Segment],
    parser: Parser<'_>,
    workers: usize,
) -> Result<Vec<ParsedMessage>, PipelineError> {
    let edges: Vec<&StreamEdges> = segments.iter().map(|s| &s.edges).collect();
    let jobs: Vec<(&Segment, (BoundaryContext, BoundaryContext))> =
        segments.iter().zip(contexts(&edges)).collect();
    let parts = run_all(workers, jobs, |(seg, (before, after))| parser.parse_slice(&seg.records, &before, &after))?;
    Ok(parts.into_iter().flatten().collect())
}

/// Parses an in-memory log with a given dictionary and thresholds.
pub fn parse_bytes(
    data: &[u8],
    cfg: &DatasetConfig,
    dict: &NGramDictionary,
    t: ThresholdPair,
    style: PlaceholderStyle,
    workers: usize,
) -> Result<Vec<ParsedMessage>, PipelineError> {
    let segments = load_segments(data, cfg, workers)?;
    parse_segments(&segments, Parser::new(dict, t, style), workers)
}

pub fn parallel_parse(
    path: impl AsRef<Path>,
    cfg: &DatasetConfig,
    dict: &NGramDictionary,
    t: ThresholdPair,
    style: PlaceholderStyle,
    workers: usize,
) -> Result<Vec<ParsedMessage>, PipelineError> {
    parse_bytes(&read_input(path.as_ref())?, cfg, dict, t, style, workers)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OfflineOptions {
    pub workers: usize,
    pub threshold: ThresholdConfig,
    /// Skip estimation and use these thresholds.
    pub fixed: Option<ThresholdPair>,
    pub style: PlaceholderStyle,
}

impl Default for OfflineOptions {
    fn default() -> Self {
        Self {
            workers: 1,
            threshold: ThresholdConfig::default(),
            fixed: None,
            style: PlaceholderStyle::default(),
        }
    }
}

#[derive(Debug)]
pub struct OfflineRun {
    pub dict: NGramDictionary,
    pub thresholds: ThresholdPair,
    pub parsed: Vec<ParsedMessage>,
    pub report: Throughput,
}

/// End-to-end: read, build, estimate, parse. Records are read once and kept
/// in memory between the two phases.
pub fn offline_bytes(data: &[u8], cfg: &DatasetConfig, opts: &OfflineOptions) -> Result<OfflineRun, PipelineError> {
    let start = Instant::now();
    let mut segments = load_segments(data, cfg, opts.workers)?;
    let parts: Vec<(NGramDictionary, StreamEdges)> = segments
        .iter_mut()
        .map(|s| (std::mem::take(&mut s.dict), s.edges.clone()))
        .collect();
    let dict = combine_segments(parts);
    let thresholds = opts.fixed.unwrap_or_else(|| estimate_or_fallback(&dict, &opts.threshold));
    let parsed = parse_segments(&segments, Parser::new(&dict, thresholds, opts.style), opts.workers)?;
    let report = Throughput::new(parsed.len() as u64, start.elapsed(), opts.workers);
    Ok(OfflineRun { dict, thresholds, parsed, report })
}

pub fn offline(path: impl AsRef<Path>, cfg: &DatasetConfig, opts: &OfflineOptions) -> Result<OfflineRun, PipelineError> {
    let start = Instant::now();
    let data = read_input(path.as_ref())?;
    let mut run = offline_bytes(&data, cfg, opts)?;
    run.report = Throughput::new(run.parsed.len() as u64, start.elapsed(), opts.workers);
    Ok(run)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Throughput {
    pub messages: u64,
    pub wall_time: Duration,
    pub workers: usize,
    pub messages_per_second: f64,
}

impl Throughput {
    pub fn new(messages: u64, wall_time: Duration, workers: usize) -> Self {
        let secs = wall_time.as_secs_f64();
        let messages_per_second = if secs > 0.0 { messages as f64 / secs } else { f64::INFINITY };
        Self { messages, wall_time, workers, messages_per_second }
    }
}

/// Throughput of a finished end-to-end run (build time included).
pub fn throughput_report(run: &OfflineRun) -> Throughput {
    run.report
}
