//! Static/dynamic token labelling and template rendering.
//!
//! A message is viewed together with its stream context: the last up-to-two
//! tokens before it and the first up-to-two tokens after it. 3-gram windows
//! touching the message whose count is below `t3` are low; their 2-gram
//! sub-windows with count below `t2` are low 2-grams. A message token is
//! dynamic when one low 2-gram ends at it and another starts at it.

use std::fmt::Write as _;

use crate::dictionary::{touching_windows, BoundaryContext, NGram, NGramDictionary};
use crate::preprocess::LogRecord;
use crate::threshold::ThresholdPair;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TokenLabel {
    Static,
    Dynamic,
}

/// How dynamic slots are written into templates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PlaceholderStyle {
    /// `$1`, `$2`, ... numbered left to right.
    #[default]
    Dollar,
    /// `<*>` for every slot.
    LogPai,
}

impl std::str::FromStr for PlaceholderStyle {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "dollar" | "$" => Ok(Self::Dollar),
            "logpai" | "<*>" => Ok(Self::LogPai),
            other => Err(format!("unknown placeholder style `{other}` (expected dollar or logpai)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedMessage {
    pub line_id: u64,
    /// Original message content, before masking.
    pub content: String,
    pub template: String,
    /// `(placeholder index, token)`, indices 1, 2, 3, ... left to right.
    pub variables: Vec<(usize, String)>,
    pub labels: Vec<TokenLabel>,
}

impl ParsedMessage {
    pub fn dynamic_count(&self) -> usize {
        self.variables.len()
    }

    /// Substitutes the variables back into the template, slot by slot.
    pub fn reconstruct(&self) -> String {
        let mut vars = self.variables.iter();
        let mut out = String::with_capacity(self.template.len());
        for (i, tok) in self.template.split(' ').enumerate() {
            if i > 0 {
                out.push(' ');
            }
            if is_placeholder(tok) {
                if let Some((_, v)) = vars.next() {
                    out.push_str(v);
                    continue;
                }
            }
            out.push_str(tok);
        }
        out
    }

    /// Template and variables agree exactly.
    pub fn same_parse(&self, other: &ParsedMessage) -> bool {
        self.template == other.template && self.variables == other.variables
    }
}

fn is_placeholder(tok: &str) -> bool {
    tok == "<*>" || tok.strip_prefix('$').is_some_and(|n| !n.is_empty() && n.bytes().all(|b| b.is_ascii_digit()))
}

/// A message token sequence with its stream context.
#[derive(Debug, Clone)]
pub struct MessageView<'a> {
    seq: Vec<&'a str>,
    prev: usize,
    len: usize,
}

impl<'a> MessageView<'a> {
    pub fn new<S: AsRef<str>>(prev_tail: &'a [S], tokens: &'a [S], next_head: &'a [S]) -> Self {
        let seq = prev_tail
            .iter()
            .chain(tokens)
            .chain(next_head)
            .map(AsRef::as_ref)
            .collect();
        Self { seq, prev: prev_tail.len(), len: tokens.len() }
    }

    /// Position of the first message token within [`Self::sequence`].
    pub fn offset(&self) -> usize {
        self.prev
    }

    pub fn sequence(&self) -> &[&'a str] {
        &self.seq
    }

    pub fn tokens(&self) -> &[&'a str] {
        &self.seq[self.prev..self.prev + self.len]
    }

    fn windows(&self, order: usize) -> std::ops::Range<usize> {
        touching_windows(self.prev, self.len, self.seq.len() - self.prev - self.len, order)
    }

    fn gram(&self, start: usize, order: usize) -> NGram {
        NGram::new(self.seq[start..start + order].iter().copied()).expect("order is 2 or 3")
    }
}

/// A gram window at a position of a [`MessageView`] sequence.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct LowGram {
    pub start: usize,
    pub gram: NGram,
}

/// 3-gram windows touching the message with count below `t3`.
pub fn low_3grams(view: &MessageView<'_>, dict: &NGramDictionary, t: ThresholdPair) -> Vec<LowGram> {
    view.windows(3)
        .map(|s| LowGram { start: s, gram: view.gram(s, 3) })
        .filter(|g| dict.lookup(&g.gram) < t.t3)
        .collect()
}

/// Distinct positional 2-gram sub-windows of `low3` with count below `t2`.
pub fn low_2grams(
    view: &MessageView<'_>,
    low3: &[LowGram],
    dict: &NGramDictionary,
    t: ThresholdPair,
) -> Vec<LowGram> {
    let mut starts: Vec<usize> = low3.iter().flat_map(|g| [g.start, g.start + 1]).collect();
    starts.sort_unstable();
    starts.dedup();
    starts
        .into_iter()
        .map(|s| LowGram { start: s, gram: view.gram(s, 2) })
        .filter(|g| dict.lookup(&g.gram) < t.t2)
        .collect()
}

/// Two-sided witness rule over sequence positions.
pub fn label_tokens(view: &MessageView<'_>, low2: &[LowGram]) -> Vec<TokenLabel> {
    let mut starts = vec![false; view.seq.len()];
    let mut ends = vec![false; view.seq.len()];
    for g in low2 {
        starts[g.start] = true;
        ends[g.start + 1] = true;
    }
    (view.prev..view.prev + view.len)
        .map(|i| if starts[i] && ends[i] { TokenLabel::Dynamic } else { TokenLabel::Static })
        .collect()
}

pub fn render<S: AsRef<str>>(
    line_id: u64,
    content: &str,
    tokens: &[S],
    labels: &[TokenLabel],
    style: PlaceholderStyle,
) -> ParsedMessage {
    debug_assert_eq!(tokens.len(), labels.len());
    let mut template = String::new();
    let mut variables = Vec::new();
    for (i, (tok, label)) in tokens.iter().zip(labels).enumerate() {
        if i > 0 {
            template.push(' ');
        }
        match label {
            TokenLabel::Static => template.push_str(tok.as_ref()),
            TokenLabel::Dynamic => {
                let k = variables.len() + 1;
                match style {
                    PlaceholderStyle::Dollar => {
                        let _ = write!(template, "${k}");
                    }
                    PlaceholderStyle::LogPai => template.push_str("<*>"),
                }
                variables.push((k, tok.as_ref().to_string()));
            }
        }
    }
    ParsedMessage {
        line_id,
        content: content.to_string(),
        template,
        variables,
        labels: labels.to_vec(),
    }
}

/// Composition of the individual steps, for one record and its contexts.
pub fn parse_message(
    record: &LogRecord,
    prev_tail: &BoundaryContext,
    next_head: &BoundaryContext,
    dict: &NGramDictionary,
    t: ThresholdPair,
    style: PlaceholderStyle,
) -> ParsedMessage {
    let view = MessageView::new(prev_tail.tokens(), &record.tokens, next_head.tokens());
    let low3 = low_3grams(&view, dict, t);
    let low2 = low_2grams(&view, &low3, dict, t);
    let labels = label_tokens(&view, &low2);
    render(record.line_id, &record.content, &record.tokens, &labels, style)
}

/// Stream heads: for each record, the first up-to-two tokens that follow it.
pub fn next_heads<S: AsRef<str>>(messages: &[&[S]], after_last: &BoundaryContext) -> Vec<BoundaryContext> {
    let mut out = vec![BoundaryContext::default(); messages.len()];
    let mut following = after_last.clone();
    for (i, msg) in messages.iter().enumerate().rev() {
        out[i] = following.clone();
        let mut head = BoundaryContext::head_of(msg);
        head.fill_head(following.tokens());
        following = head;
    }
    out
}

/// Parses records in order with their real stream contexts.
pub fn parse_corpus(
    records: &[LogRecord],
    dict: &NGramDictionary,
    t: ThresholdPair,
    style: PlaceholderStyle,
) -> Vec<ParsedMessage> {
    Parser::new(dict, t, style).parse_slice(records, &BoundaryContext::default(), &BoundaryContext::default())
}

/// Labelling on interned ids; equivalent to the step-by-step functions.
#[derive(Debug, Clone, Copy)]
pub struct Parser<'d> {
    dict: &'d NGramDictionary,
    t: ThresholdPair,
    style: PlaceholderStyle,
}

impl<'d> Parser<'d> {
    pub fn new(dict: &'d NGramDictionary, t: ThresholdPair, style: PlaceholderStyle) -> Self {
        Self { dict, t, style }
    }

    pub fn thresholds(&self) -> ThresholdPair {
        self.t
    }

    pub fn label<S: AsRef<str>>(&self, prev_tail: &[S], tokens: &[S], next_head: &[S]) -> Vec<TokenLabel> {
        let ids: Vec<Option<u32>> = prev_tail
            .iter()
            .chain(tokens)
            .chain(next_head)
            .map(|s| self.dict.token_id(s.as_ref()))
            .collect();
        let (p, m) = (prev_tail.len(), tokens.len());
        let tri = touching_windows(p, m, next_head.len(), 3);
        let n = ids.len();
        let c2 = |s: usize| match (ids[s], ids[s + 1]) {
            (Some(a), Some(b)) => self.dict.count2([a, b]),
            _ => 0,
        };
        let c3 = |s: usize| match (ids[s], ids[s + 1], ids[s + 2]) {
            (Some(a), Some(b), Some(c)) => self.dict.count3([a, b, c]),
            _ => 0,
        };
        // low2[s]: the 2-gram starting at s sits in a low 3-gram and is itself low.
        let mut low2 = vec![false; n];
        let mut prev_low3 = false;
        for s in tri.clone() {
            let low3 = c3(s) < self.t.t3;
            if low3 || prev_low3 {
                low2[s] = c2(s) < self.t.t2;
            }
            prev_low3 = low3;
        }
        if prev_low3 {
            low2[tri.end] = c2(tri.end) < self.t.t2;
        }
        (p..p + m)
            .map(|i| {
                if i > 0 && low2[i - 1] && low2[i] {
                    TokenLabel::Dynamic
                } else {
                    TokenLabel::Static
                }
            })
            .collect()
    }

    pub fn parse<S: AsRef<str>>(
        &self,
        line_id: u64,
        content: &str,
        prev_tail: &[S],
        tokens: &[S],
        next_head: &[S],
    ) -> ParsedMessage {
        let labels = self.label(prev_tail, tokens, next_head);
        render(line_id, content, tokens, &labels, self.style)
    }

    /// Parses a contiguous run of records. `before` holds the stream tokens
    /// ahead of the run, `after` the ones behind it.
    pub fn parse_slice(
        &self,
        records: &[LogRecord],
        before: &BoundaryContext,
        after: &BoundaryContext,
    ) -> Vec<ParsedMessage> {
        let msgs: Vec<&[String]> = records.iter().map(|r| r.tokens.as_slice()).collect();
        let heads = next_heads(&msgs, after);
        let mut tail = before.clone();
        records
            .iter()
            .zip(heads)
            .map(|(r, head)| {
                let parsed = self.parse(r.line_id, &r.content, tail.tokens(), &r.tokens, head.tokens());
                tail.extend(&r.tokens);
                parsed
            })
            .collect()
    }
}
