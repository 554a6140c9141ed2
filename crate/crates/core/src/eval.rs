//! Experiments: parsing accuracy against labelled samples, stabilisation
//! curves, chunked efficiency timing and online-vs-offline comparison.

use std::fs::File;
use std::io::{self, Read, Seek, SeekFrom, Write};
use std::ops::Range;
use std::path::Path;
use std::time::{Duration, Instant};

use rand::Rng;
use thiserror::Error;

use crate::dictionary::DictionaryBuilder;
use crate::parallel::{offline_bytes, OfflineOptions, PipelineError};
use crate::parser::{ParsedMessage, Parser, PlaceholderStyle};
use crate::preprocess::{DatasetConfig, LogRecord, RecordReader};
use crate::streaming::{agreement_ratio, AgreementError, OnlineConfig, OnlineParser};
use crate::threshold::{estimate_or_fallback, ThresholdConfig};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("ground truth: {0}")]
    Csv(#[from] csv::Error),
    #[error("ground truth is missing column `{0}`")]
    MissingColumn(&'static str),
    #[error("ground truth row {row}: bad LineId `{value}`")]
    BadLineId { row: usize, value: String },
    #[error("{parsed} parsed messages but {truth} labelled samples")]
    LengthMismatch { parsed: usize, truth: usize },
    #[error("line id {parsed} parsed where the labelled sample has {truth}")]
    Misaligned { parsed: u64, truth: u64 },
    #[error("file is {available} bytes, smaller than the requested {requested}")]
    TooSmall { available: u64, requested: u64 },
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Agreement(#[from] AgreementError),
}

/// One row of a labelled sample.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledSample {
    pub line_id: u64,
    pub content: String,
    pub ground_template: String,
}

/// Reads the structured CSV layout (`LineId`, `Content`, `EventTemplate`;
/// other columns are ignored).
pub fn load_labeled<R: Read>(source: R) -> Result<Vec<LabeledSample>, EvalError> {
    let mut rdr = csv::Reader::from_reader(source);
    let headers = rdr.headers()?.clone();
    let col = |name: &'static str| {
        headers
            .iter()
            .position(|h| h.trim_start_matches('\u{feff}') == name)
            .ok_or(EvalError::MissingColumn(name))
    };
    let (id, content, template) = (col("LineId")?, col("Content")?, col("EventTemplate")?);
    rdr.records()
        .enumerate()
        .map(|(i, row)| {
            let row = row?;
            let raw = &row[id];
            Ok(LabeledSample {
                line_id: raw
                    .trim()
                    .parse()
                    .map_err(|_| EvalError::BadLineId { row: i + 1, value: raw.to_string() })?,
                content: row[content].to_string(),
                ground_template: row[template].to_string(),
            })
        })
        .collect()
}

pub fn load_labeled_file(path: impl AsRef<Path>) -> Result<Vec<LabeledSample>, EvalError> {
    load_labeled(File::open(path)?)
}

/// Maps `$k` placeholders to `<*>` and collapses whitespace runs.
pub fn normalize_template(template: &str) -> String {
    template
        .split_whitespace()
        .map(|tok| match tok.strip_prefix('$') {
            Some(n) if !n.is_empty() && n.bytes().all(|b| b.is_ascii_digit()) => "<*>",
            _ => tok,
        })
        .collect::<Vec<_>>()
        .join(" ")
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mismatch {
    pub line_id: u64,
    pub got: String,
    pub expected: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AccuracyReport {
    pub dataset: String,
    pub parsing_accuracy: f64,
    pub correct: usize,
    pub total: usize,
    pub mismatches: Vec<Mismatch>,
}

impl AccuracyReport {
    /// Audit file: `LineId,Parsed,Expected`, one row per mismatch.
    pub fn write_mismatches<W: Write>(&self, sink: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(sink);
        w.write_record(["LineId", "Parsed", "Expected"])?;
        for m in &self.mismatches {
            w.write_record([m.line_id.to_string().as_str(), &m.got, &m.expected])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// A message is correct when its normalized template equals the normalized
/// ground truth. Inputs must be aligned by line id.
pub fn parsing_accuracy(
    dataset: &str,
    parsed: &[ParsedMessage],
    truth: &[LabeledSample],
) -> Result<AccuracyReport, EvalError> {
    if parsed.len() != truth.len() {
        return Err(EvalError::LengthMismatch { parsed: parsed.len(), truth: truth.len() });
    }
    let mut mismatches = Vec::new();
    for (p, t) in parsed.iter().zip(truth) {
        if p.line_id != t.line_id {
            return Err(EvalError::Misaligned { parsed: p.line_id, truth: t.line_id });
        }
        let got = normalize_template(&p.template);
        let expected = normalize_template(&t.ground_template);
        if got != expected {
            mismatches.push(Mismatch { line_id: p.line_id, got, expected });
        }
    }
    let total = parsed.len();
    let correct = total - mismatches.len();
    Ok(AccuracyReport {
        dataset: dataset.to_string(),
        parsing_accuracy: if total == 0 { 1.0 } else { correct as f64 / total as f64 },
        correct,
        total,
        mismatches,
    })
}

/// Reads every record of an in-memory log, in order.
pub fn read_all(data: &[u8], cfg: &DatasetConfig) -> Result<Vec<LogRecord>, EvalError> {
    RecordReader::new(data, cfg)
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| EvalError::Pipeline(e.into()))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilisationOptions {
    pub step: f64,
    pub threshold: ThresholdConfig,
    /// Stop once a prefix reaches full agreement.
    pub stop_at_full: bool,
}

impl Default for StabilisationOptions {
    fn default() -> Self {
        Self { step: 0.05, threshold: ThresholdConfig::default(), stop_at_full: true }
    }
}

fn parse_with_prefix(records: &[LogRecord], prefix: usize, threshold: &ThresholdConfig) -> Vec<ParsedMessage> {
    let mut b = DictionaryBuilder::new();
    for r in &records[..prefix] {
        b.push(&r.tokens);
    }
    let dict = b.finish();
    let t = estimate_or_fallback(&dict, threshold);
    Parser::new(&dict, t, PlaceholderStyle::Dollar).parse_slice(records, &Default::default(), &Default::default())
}

/// `(prefix fraction, agreement)` for growing dictionary prefixes; every
/// prefix dictionary parses the whole corpus and is compared with the parse
/// from the full dictionary.
pub fn stabilisation_curve(records: &[LogRecord], opts: &StabilisationOptions) -> Vec<(f64, f64)> {
    let steps = (1.0 / opts.step).round().max(1.0) as usize;
    let reference = parse_with_prefix(records, records.len(), &opts.threshold);
    let mut curve = Vec::with_capacity(steps);
    for k in 1..=steps {
        let fraction = (k as f64 * opts.step).min(1.0);
        let prefix = ((fraction * records.len() as f64).ceil() as usize).min(records.len());
        let agreement = if prefix == records.len() {
            1.0
        } else {
            let parsed = parse_with_prefix(records, prefix, &opts.threshold);
            agreement_ratio(&parsed, &reference).expect("same records, same order")
        };
        curve.push((fraction, agreement));
        if opts.stop_at_full && agreement >= 1.0 {
            break;
        }
    }
    curve
}

/// A random byte range of about `size` bytes, widened outward to whole lines.
/// The start is drawn uniformly from the positions that leave at least
/// `size` bytes to the end of the input.
pub fn chunk_sample<R: Read + Seek>(source: &mut R, size: u64, rng: &mut impl Rng) -> Result<Range<u64>, EvalError> {
    let len = source.seek(SeekFrom::End(0))?;
    if len < size || len == 0 {
        return Err(EvalError::TooSmall { available: len, requested: size });
    }
    let pick = rng.gen_range(0..=len - size);
    let start = line_start(source, pick)?;
    let end = line_end(source, (pick + size).min(len), len)?;
    Ok(start..end)
}

/// Offset of the beginning of the line containing `pos`.
fn line_start<R: Read + Seek>(source: &mut R, pos: u64) -> io::Result<u64> {
    let mut buf = [0u8; 4096];
    let mut hi = pos;
    while hi > 0 {
        let lo = hi.saturating_sub(buf.len() as u64);
        let n = (hi - lo) as usize;
        source.seek(SeekFrom::Start(lo))?;
        source.read_exact(&mut buf[..n])?;
        if let Some(i) = buf[..n].iter().rposition(|&b| b == b'\n') {
            return Ok(lo + i as u64 + 1);
        }
        hi = lo;
    }
    Ok(0)
}

/// Offset just past the newline that ends the line containing `pos - 1`.
fn line_end<R: Read + Seek>(source: &mut R, pos: u64, len: u64) -> io::Result<u64> {
    if pos == 0 {
        return Ok(0);
    }
    let mut buf = [0u8; 4096];
    let mut at = pos - 1;
    source.seek(SeekFrom::Start(at))?;
    while at < len {
        let n = source.read(&mut buf)?;
        if n == 0 {
            break;
        }
        if let Some(i) = buf[..n].iter().position(|&b| b == b'\n') {
            return Ok(at + i as u64 + 1);
        }
        at += n as u64;
    }
    Ok(len)
}

fn read_range<R: Read + Seek>(source: &mut R, range: &Range<u64>) -> io::Result<Vec<u8>> {
    let mut buf = vec![0u8; (range.end - range.start) as usize];
    source.seek(SeekFrom::Start(range.start))?;
    source.read_exact(&mut buf)?;
    Ok(buf)
}

/// Runs `f` once to warm up, then `runs` more times; returns the median
/// wall time and the last result.
pub fn time_median<T>(runs: usize, mut f: impl FnMut() -> T) -> (Duration, T) {
    let _ = f();
    let mut times = Vec::with_capacity(runs.max(1));
    let mut last = None;
    for _ in 0..runs.max(1) {
        let start = Instant::now();
        last = Some(f());
        times.push(start.elapsed());
    }
    times.sort_unstable();
    (times[times.len() / 2], last.expect("at least one run"))
}

#[derive(Debug, Clone, PartialEq)]
pub struct EfficiencyRow {
    pub requested: u64,
    pub range: Range<u64>,
    pub messages: u64,
    pub wall_time: Duration,
    pub messages_per_second: f64,
}

/// End-to-end timing (read records, build, estimate, parse) of one random
/// chunk per requested size, median of `runs` after a warm-up.
pub fn efficiency_run<R: Read + Seek>(
    source: &mut R,
    cfg: &DatasetConfig,
    sizes: &[u64],
    rng: &mut impl Rng,
    opts: &OfflineOptions,
    runs: usize,
) -> Result<Vec<EfficiencyRow>, EvalError> {
    let mut rows = Vec::with_capacity(sizes.len());
    for &size in sizes {
        let range = chunk_sample(source, size, rng)?;
        let data = read_range(source, &range)?;
        let (wall_time, run) = time_median(runs, || offline_bytes(&data, cfg, opts));
        let messages = run?.parsed.len() as u64;
        rows.push(EfficiencyRow {
            requested: size,
            range,
            messages,
            wall_time,
            messages_per_second: messages as f64 / wall_time.as_secs_f64().max(f64::MIN_POSITIVE),
        });
    }
    Ok(rows)
}

pub fn efficiency_run_file(
    path: impl AsRef<Path>,
    cfg: &DatasetConfig,
    sizes: &[u64],
    rng: &mut impl Rng,
    opts: &OfflineOptions,
    runs: usize,
) -> Result<Vec<EfficiencyRow>, EvalError> {
    efficiency_run(&mut File::open(path)?, cfg, sizes, rng, opts, runs)
}

/// Writes an efficiency table as CSV.
pub fn write_efficiency<W: Write>(sink: W, rows: &[EfficiencyRow]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(["RequestedBytes", "Start", "End", "Messages", "WallSeconds", "MessagesPerSecond"])?;
    for r in rows {
        w.write_record([
            r.requested.to_string(),
            r.range.start.to_string(),
            r.range.end.to_string(),
            r.messages.to_string(),
            format!("{:.6}", r.wall_time.as_secs_f64()),
            format!("{:.1}", r.messages_per_second),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// `(T_online - T_offline) / T_offline`.
pub fn efficiency_difference_ratio(online: Duration, offline: Duration) -> f64 {
    (online.as_secs_f64() - offline.as_secs_f64()) / offline.as_secs_f64()
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompareReport {
    pub messages: usize,
    pub agreement: f64,
    pub t_online: Duration,
    pub t_offline: Duration,
    pub efficiency_difference_ratio: f64,
}

/// Online parse vs. single-worker offline parse of the same log, each timed
/// end to end from raw bytes (median of `runs` after a warm-up).
pub fn online_offline_compare(
    data: &[u8],
    cfg: &DatasetConfig,
    online: &OnlineConfig,
    runs: usize,
) -> Result<CompareReport, EvalError> {
    let offline_opts = OfflineOptions {
        workers: 1,
        threshold: online.threshold,
        fixed: online.fixed,
        style: online.style,
    };
    let (t_offline, off) = time_median(runs, || offline_bytes(data, cfg, &offline_opts));
    let off = off?.parsed;
    let (t_online, on) = time_median(runs, || -> Result<Vec<ParsedMessage>, EvalError> {
        let mut p = OnlineParser::new(*online);
        let mut out = Vec::new();
        for r in RecordReader::new(data, cfg) {
            out.extend(p.online_step(r.map_err(PipelineError::from)?));
        }
        out.extend(p.flush());
        Ok(out)
    });
    let on = on?;
    Ok(CompareReport {
        messages: off.len(),
        agreement: agreement_ratio(&on, &off)?,
        t_online,
        t_offline,
        efficiency_difference_ratio: efficiency_difference_ratio(t_online, t_offline),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::tests::records;
    use crate::parser::TokenLabel;
    use crate::synth::{self, EventOrder, SynthLog, SynthSpec};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::io::Cursor;

    fn msg(line_id: u64, template: &str) -> ParsedMessage {
        ParsedMessage {
            line_id,
            content: String::new(),
            template: template.into(),
            variables: vec![],
            labels: vec![TokenLabel::Static],
        }
    }

    fn sample(line_id: u64, template: &str) -> LabeledSample {
        LabeledSample { line_id, content: String::new(), ground_template: template.into() }
    }

    #[test]
    fn normalization() {
        assert_eq!(normalize_template("Found  block $1 locally"), "Found block <*> locally");
        assert_eq!(normalize_template("a $12 $ $x"), "a <*> $ $x");
        assert_eq!(normalize_template(" <*>\tx "), "<*> x");
    }

    #[test]
    fn accuracy_arithmetic_and_audit() {
        let parsed: Vec<_> = (1..=2000).map(|i| msg(i, if i <= 1960 { "a $1" } else { "a b" })).collect();
        let truth: Vec<_> = (1..=2000).map(|i| sample(i, "a <*>")).collect();
        let r = parsing_accuracy("X", &parsed, &truth).unwrap();
        assert_eq!(r.parsing_accuracy, 0.98);
        assert_eq!(r.mismatches.len(), 40);
        let mut buf = Vec::new();
        r.write_mismatches(&mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("LineId,Parsed,Expected\n1961,a b,a <*>\n"));

        let all = parsing_accuracy("X", &parsed[..3], &truth[..3]).unwrap();
        assert_eq!(all.parsing_accuracy, 1.0);
        assert!(matches!(parsing_accuracy("X", &parsed[..2], &truth[..3]), Err(EvalError::LengthMismatch { .. })));
        assert!(matches!(parsing_accuracy("X", &parsed[1..3], &truth[..2]), Err(EvalError::Misaligned { .. })));
    }

    #[test]
    fn placeholder_style_does_not_matter() {
        let truth = vec![sample(1, "x <*> y <*>")];
        let a = parsing_accuracy("X", &[msg(1, "x $1 y $2")], &truth).unwrap();
        let b = parsing_accuracy("X", &[msg(1, "x <*> y <*>")], &truth).unwrap();
        assert_eq!(a.parsing_accuracy, b.parsing_accuracy);
    }

    #[test]
    fn loads_structured_csv() {
        let text = "\u{feff}LineId,Date,Content,EventId,EventTemplate\n1,081109,\"Receiving block blk_1 src: /10.0.0.1:5\",E5,Receiving block <*> src: /<*>\n";
        let rows = load_labeled(text.as_bytes()).unwrap();
        assert_eq!(rows, [LabeledSample {
            line_id: 1,
            content: "Receiving block blk_1 src: /10.0.0.1:5".into(),
            ground_template: "Receiving block <*> src: /<*>".into(),
        }]);
        assert!(matches!(load_labeled("LineId,Content\n".as_bytes()), Err(EvalError::MissingColumn("EventTemplate"))));
        assert!(matches!(
            load_labeled("LineId,Content,EventTemplate\nx,a,b\n".as_bytes()),
            Err(EvalError::BadLineId { row: 1, .. })
        ));
    }

    #[test]
    fn synthetic_truth_roundtrip() {
        let lines = synth::generate(SynthSpec::default(), 50);
        let mut buf = Vec::new();
        synth::write_structured(&mut buf, &lines).unwrap();
        let rows = load_labeled(buf.as_slice()).unwrap();
        assert_eq!(rows.len(), 50);
        assert_eq!(rows[7].ground_template, lines[7].template);
    }

    #[test]
    fn chunk_sample_snaps_to_lines_and_is_seeded() {
        let text: String = (0..500).map(|i| format!("line number {i}\n")).collect();
        let mut cur = Cursor::new(text.as_bytes().to_vec());
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut seen = Vec::new();
        for _ in 0..50 {
            let r = chunk_sample(&mut cur, 1000, &mut rng).unwrap();
            assert!(r.end - r.start >= 1000);
            assert!(r.start == 0 || text.as_bytes()[r.start as usize - 1] == b'\n');
            assert_eq!(text.as_bytes()[r.end as usize - 1], b'\n');
            seen.push(r);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let again: Vec<_> = (0..50).map(|_| chunk_sample(&mut cur, 1000, &mut rng).unwrap()).collect();
        assert_eq!(seen, again);
        assert!(matches!(
            chunk_sample(&mut cur, text.len() as u64 + 1, &mut rng),
            Err(EvalError::TooSmall { .. })
        ));
        let whole = chunk_sample(&mut cur, text.len() as u64, &mut rng).unwrap();
        assert_eq!(whole, 0..text.len() as u64);
    }

    #[test]
    fn efficiency_ratio_arithmetic() {
        let s = Duration::from_secs;
        assert_eq!(efficiency_difference_ratio(s(10), s(10)), 0.0);
        assert!((efficiency_difference_ratio(Duration::from_millis(10900), s(10)) - 0.09).abs() < 1e-12);
    }

    #[test]
    fn stabilisation_on_repetitive_corpus() {
        let cfg = synth::dataset_config();
        let mut data = Vec::new();
        let spec = SynthSpec { templates: 12, order: EventOrder::CYCLE, ..Default::default() };
        SynthLog::new(spec, u64::MAX).write_bytes(&mut data, 600_000).unwrap();
        let recs = read_all(&data, &cfg).unwrap();
        let opts = StabilisationOptions { stop_at_full: false, ..Default::default() };
        let curve = stabilisation_curve(&recs, &opts);
        assert_eq!(curve.len(), 20);
        assert_eq!(curve.last().unwrap(), &(1.0, 1.0));
        assert!(curve[0].1 >= 0.95, "{curve:?}");
        assert!(curve.windows(2).all(|w| w[0].1 <= w[1].1), "{curve:?}");
    }

    #[test]
    fn stabilisation_stops_at_full_agreement() {
        let cfg = synth::dataset_config();
        let spec = SynthSpec { templates: 8, order: EventOrder::CYCLE, ..Default::default() };
        let lines = synth::generate(spec, 2000);
        let data: String = lines.iter().map(|l| format!("{}\n", l.line)).collect();
        let recs = read_all(data.as_bytes(), &cfg).unwrap();
        let curve = stabilisation_curve(&recs, &StabilisationOptions::default());
        assert_eq!(curve.last().unwrap().1, 1.0);
        assert!(curve.len() < 20, "{curve:?}");
    }

    #[test]
    fn self_comparison_is_full_agreement() {
        let recs = records(&["a b c", "a b d", "a b e"]);
        let curve = stabilisation_curve(&recs, &StabilisationOptions { step: 0.5, ..Default::default() });
        assert_eq!(curve.last().unwrap().1, 1.0);
    }

    #[test]
    fn compare_runs() {
        let cfg = synth::dataset_config();
        let mut data = Vec::new();
        SynthLog::new(SynthSpec::default(), u64::MAX).write_bytes(&mut data, 200_000).unwrap();
        let r = online_offline_compare(&data, &cfg, &OnlineConfig::default(), 1).unwrap();
        assert!(r.messages > 1000);
        assert!(r.agreement > 0.5, "{r:?}");
        assert!(r.t_online > Duration::ZERO && r.t_offline > Duration::ZERO);
    }
}
