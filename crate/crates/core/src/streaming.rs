//! Online parsing: each message is parsed with the dictionary built from
//! the messages before it, then folded into that dictionary.
//!
//! A message is parsed once the first two tokens that follow it are known,
//! so output lags input by one message (more when messages are shorter than
//! two tokens). [`OnlineParser::flush`] drains the remainder.

use std::collections::VecDeque;

use rustc_hash::FxHashMap;
use thiserror::Error;

use crate::dictionary::{BoundaryContext, DictionaryBuilder, NGramDictionary};
use crate::parser::{render, ParsedMessage, Parser, PlaceholderStyle, TokenLabel};
use crate::preprocess::LogRecord;
use crate::threshold::{threshold_from_histogram, OccurrenceHistogram, ThresholdConfig, ThresholdPair};

pub const DEFAULT_REFRESH: u64 = 1000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OnlineConfig {
    /// Recompute thresholds every this many folded messages.
    pub refresh: u64,
    pub threshold: ThresholdConfig,
    /// Fixed thresholds; disables estimation.
    pub fixed: Option<ThresholdPair>,
    pub style: PlaceholderStyle,
}

impl Default for OnlineConfig {
    fn default() -> Self {
        Self {
            refresh: DEFAULT_REFRESH,
            threshold: ThresholdConfig::default(),
            fixed: None,
            style: PlaceholderStyle::default(),
        }
    }
}

/// Single-writer online state: dictionary, per-order occurrence histograms
/// kept in step with it, current thresholds and the records awaiting lookahead.
#[derive(Debug)]
pub struct OnlineParser {
    cfg: OnlineConfig,
    builder: DictionaryBuilder,
    hist: [FxHashMap<u64, u64>; 2],
    thresholds: ThresholdPair,
    pending: VecDeque<LogRecord>,
    pending_tokens: usize,
    tail: BoundaryContext,
    folded: u64,
    since_refresh: u64,
}

impl OnlineParser {
    pub fn new(cfg: OnlineConfig) -> Self {
        Self {
            thresholds: cfg.fixed.unwrap_or(ThresholdPair::FALLBACK),
            cfg,
            builder: DictionaryBuilder::new(),
            hist: Default::default(),
            pending: VecDeque::new(),
            pending_tokens: 0,
            tail: BoundaryContext::default(),
            folded: 0,
            since_refresh: 0,
        }
    }

    pub fn dictionary(&self) -> &NGramDictionary {
        self.builder.dictionary()
    }

    pub fn thresholds(&self) -> ThresholdPair {
        self.thresholds
    }

    /// Occurrence histogram of one order as currently maintained.
    pub fn histogram(&self, order: usize) -> OccurrenceHistogram {
        let mut points: Vec<(u64, u64)> = self.hist[order - 2].iter().map(|(&x, &y)| (x, y)).collect();
        points.sort_unstable();
        OccurrenceHistogram { points }
    }

    /// Accepts the next record and returns every earlier record whose
    /// lookahead is now complete, parsed, in order.
    pub fn online_step(&mut self, incoming: LogRecord) -> Vec<ParsedMessage> {
        self.pending_tokens += incoming.tokens.len();
        self.pending.push_back(incoming);
        let mut out = Vec::new();
        while let Some(front) = self.pending.front() {
            if self.pending_tokens - front.tokens.len() < 2 {
                break;
            }
            out.push(self.parse_front());
        }
        out
    }

    /// Parses everything still buffered, treating the stream as ended, and
    /// refreshes the thresholds.
    pub fn flush(&mut self) -> Vec<ParsedMessage> {
        let mut out = Vec::with_capacity(self.pending.len());
        while !self.pending.is_empty() {
            out.push(self.parse_front());
        }
        self.refresh();
        out
    }

    fn next_head(&self) -> BoundaryContext {
        let mut head = BoundaryContext::default();
        for r in self.pending.iter().skip(1) {
            head.fill_head(&r.tokens);
            if head.is_full() {
                break;
            }
        }
        head
    }

    fn parse_front(&mut self) -> ParsedMessage {
        let head = self.next_head();
        let rec = self.pending.pop_front().expect("pending is non-empty");
        self.pending_tokens -= rec.tokens.len();

        let parsed = if self.dictionary().is_empty() {
            // Nothing seen yet: no token has any evidence of being static.
            let labels = vec![TokenLabel::Dynamic; rec.tokens.len()];
            render(rec.line_id, &rec.content, &rec.tokens, &labels, self.cfg.style)
        } else {
            Parser::new(self.dictionary(), self.thresholds, self.cfg.style).parse(
                rec.line_id,
                &rec.content,
                self.tail.tokens(),
                &rec.tokens,
                head.tokens(),
            )
        };

        let hist = &mut self.hist;
        self.builder.push_observed(&rec.tokens, |order, count| {
            let h = &mut hist[order - 2];
            if count > 1 {
                let slot = h.get_mut(&(count - 1)).expect("previous count is tallied");
                *slot -= 1;
                if *slot == 0 {
                    h.remove(&(count - 1));
                }
            }
            *h.entry(count).or_insert(0) += 1;
        });
        self.tail.extend(&rec.tokens);
        self.folded += 1;
        self.since_refresh += 1;
        // Refresh on a doubling schedule while warming up, then every `refresh`.
        if self.since_refresh >= self.cfg.refresh || (self.folded < self.cfg.refresh && self.folded.is_power_of_two()) {
            self.refresh();
        }
        parsed
    }

    fn refresh(&mut self) {
        self.since_refresh = 0;
        if self.cfg.fixed.is_some() {
            return;
        }
        let t = |order: usize| {
            let h = self.histogram(order);
            if h.is_empty() {
                ThresholdPair::FALLBACK.t2
            } else {
                threshold_from_histogram(&h, &self.cfg.threshold).unwrap_or(ThresholdPair::FALLBACK.t2)
            }
        };
        self.thresholds = ThresholdPair::new(t(2), t(3));
    }
}

/// Runs a whole record stream through a fresh online parser.
pub fn parse_online(records: impl IntoIterator<Item = LogRecord>, cfg: OnlineConfig) -> (Vec<ParsedMessage>, OnlineParser) {
    let mut p = OnlineParser::new(cfg);
    let mut out = Vec::new();
    for r in records {
        out.extend(p.online_step(r));
    }
    out.extend(p.flush());
    (out, p)
}

#[derive(Debug, Error, PartialEq)]
pub enum AgreementError {
    #[error("streams differ in length: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("line ids differ at position {position}: {left} vs {right}")]
    LineIdMismatch { position: usize, left: u64, right: u64 },
}

/// Fraction of positions where template and variables are exactly equal.
/// Two empty streams agree fully.
pub fn agreement_ratio(a: &[ParsedMessage], b: &[ParsedMessage]) -> Result<f64, AgreementError> {
    if a.len() != b.len() {
        return Err(AgreementError::LengthMismatch(a.len(), b.len()));
    }
    if a.is_empty() {
        return Ok(1.0);
    }
    let mut same = 0usize;
    for (i, (x, y)) in a.iter().zip(b).enumerate() {
        if x.line_id != y.line_id {
            return Err(AgreementError::LineIdMismatch { position: i, left: x.line_id, right: y.line_id });
        }
        same += x.same_parse(y) as usize;
    }
    Ok(same as f64 / a.len() as f64)
}
