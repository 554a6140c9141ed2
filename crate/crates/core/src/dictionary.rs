//! Occurrence dictionaries of 2-grams and 3-grams.
//!
//! Counting treats the corpus as one concatenated token stream: every window
//! of two or three consecutive tokens is counted exactly once, including the
//! windows that straddle the end of one message and the start of the next.
//! Tokens are interned so the count tables are keyed by small integer tuples.

use std::fmt;
use std::io::{BufRead, Write};

use indexmap::IndexSet;
use rustc_hash::{FxBuildHasher, FxHashMap};
use thiserror::Error;

use crate::preprocess::LogRecord;

/// Token separator used by the persisted dictionary format.
pub const TOKEN_SEP: char = '\x1f';

#[derive(Debug, Error)]
pub enum DictionaryError {
    #[error("dictionary line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("n-gram order must be 2 or 3, got {0}")]
    BadOrder(usize),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// An ordered tuple of two or three tokens.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NGram {
    tokens: Vec<String>,
}

impl NGram {
    pub fn new<S: Into<String>>(tokens: impl IntoIterator<Item = S>) -> Result<Self, DictionaryError> {
        let tokens: Vec<String> = tokens.into_iter().map(Into::into).collect();
        match tokens.len() {
            2 | 3 => Ok(Self { tokens }),
            n => Err(DictionaryError::BadOrder(n)),
        }
    }

    pub fn bigram(a: impl Into<String>, b: impl Into<String>) -> Self {
        Self { tokens: vec![a.into(), b.into()] }
    }

    pub fn trigram(a: impl Into<String>, b: impl Into<String>, c: impl Into<String>) -> Self {
        Self { tokens: vec![a.into(), b.into(), c.into()] }
    }

    pub fn order(&self) -> usize {
        self.tokens.len()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    /// The 2-gram sub-windows of a 3-gram (or the 2-gram itself).
    pub fn bigrams(&self) -> Vec<NGram> {
        self.tokens
            .windows(2)
            .map(|w| NGram::bigram(w[0].clone(), w[1].clone()))
            .collect()
    }
}

impl fmt::Display for NGram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.tokens.join("->"))
    }
}

/// The last (or first) up-to-two tokens of a token stream.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BoundaryContext {
    tokens: Vec<String>,
}

impl BoundaryContext {
    pub fn new<S: AsRef<str>>(tokens: &[S]) -> Self {
        let mut ctx = Self::default();
        ctx.extend(tokens);
        ctx
    }

    /// Context made of the first up-to-two tokens of `tokens`.
    pub fn head_of<S: AsRef<str>>(tokens: &[S]) -> Self {
        Self {
            tokens: tokens.iter().take(2).map(|t| t.as_ref().to_string()).collect(),
        }
    }

    /// Appends `tokens` to the stream and keeps only the last two.
    pub fn extend<S: AsRef<str>>(&mut self, tokens: &[S]) {
        let keep = tokens.len().min(2);
        let carry = (2 - keep).min(self.tokens.len());
        self.tokens.drain(..self.tokens.len() - carry);
        self.tokens
            .extend(tokens[tokens.len() - keep..].iter().map(|t| t.as_ref().to_string()));
    }

    /// Appends tokens of a following stream segment to a head context until it holds two.
    pub fn fill_head<S: AsRef<str>>(&mut self, tokens: &[S]) {
        let room = 2usize.saturating_sub(self.tokens.len());
        self.tokens
            .extend(tokens.iter().take(room).map(|t| t.as_ref().to_string()));
    }

    pub fn is_full(&self) -> bool {
        self.tokens.len() == 2
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn as_strs(&self) -> Vec<&str> {
        self.tokens.iter().map(String::as_str).collect()
    }
}

/// Start positions of the `order`-windows over `prev ++ msg ++ next` that
/// touch at least one message token.
pub(crate) fn touching_windows(
    prev: usize,
    msg: usize,
    next: usize,
    order: usize,
) -> std::ops::Range<usize> {
    let total = prev + msg + next;
    if msg == 0 || total < order {
        return 0..0;
    }
    let first = (prev + 1).saturating_sub(order);
    let last = (prev + msg - 1).min(total - order);
    first..last + 1
}

/// All 2-gram and 3-gram windows over `prev_tail ++ tokens ++ next_head`
/// that include at least one token of `tokens`, left to right; for each
/// start position the 3-gram comes before the 2-gram.
pub fn emit_ngrams<S: AsRef<str>>(prev_tail: &[S], tokens: &[S], next_head: &[S]) -> Vec<NGram> {
    let seq: Vec<&str> = prev_tail
        .iter()
        .chain(tokens)
        .chain(next_head)
        .map(AsRef::as_ref)
        .collect();
    let (p, m, n) = (prev_tail.len(), tokens.len(), next_head.len());
    let tri = touching_windows(p, m, n, 3);
    let bi = touching_windows(p, m, n, 2);
    let lo = tri.start.min(bi.start);
    let hi = tri.end.max(bi.end);
    let mut out = Vec::new();
    for s in lo..hi {
        if tri.contains(&s) {
            out.push(NGram::trigram(seq[s], seq[s + 1], seq[s + 2]));
        }
        if bi.contains(&s) {
            out.push(NGram::bigram(seq[s], seq[s + 1]));
        }
    }
    out
}

/// Occurrence counts for all 2-grams and 3-grams of a corpus.
#[derive(Clone, Default)]
pub struct NGramDictionary {
    vocab: IndexSet<Box<str>, FxBuildHasher>,
    bigrams: FxHashMap<[u32; 2], u64>,
    trigrams: FxHashMap<[u32; 3], u64>,
    total_messages: u64,
}

impl fmt::Debug for NGramDictionary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("NGramDictionary")
            .field("total_messages", &self.total_messages)
            .field("bigrams", &self.bigrams.len())
            .field("trigrams", &self.trigrams.len())
            .finish()
    }
}

impl NGramDictionary {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn total_messages(&self) -> u64 {
        self.total_messages
    }

    /// Number of distinct grams of the given order (2 or 3).
    pub fn distinct(&self, order: usize) -> usize {
        match order {
            2 => self.bigrams.len(),
            3 => self.trigrams.len(),
            _ => 0,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.bigrams.is_empty() && self.trigrams.is_empty()
    }

    pub fn lookup(&self, gram: &NGram) -> u64 {
        let toks: Vec<&str> = gram.tokens.iter().map(String::as_str).collect();
        self.count(&toks)
    }

    /// Count of the window made of `tokens` (length 2 or 3); 0 when absent.
    pub fn count(&self, tokens: &[&str]) -> u64 {
        let ids: Option<Vec<u32>> = tokens.iter().map(|t| self.token_id(t)).collect();
        match ids.as_deref() {
            Some(&[a, b]) => self.count2([a, b]),
            Some(&[a, b, c]) => self.count3([a, b, c]),
            _ => 0,
        }
    }

    #[inline]
    pub(crate) fn token_id(&self, token: &str) -> Option<u32> {
        self.vocab.get_index_of(token).map(|i| i as u32)
    }

    #[inline]
    pub(crate) fn count2(&self, key: [u32; 2]) -> u64 {
        self.bigrams.get(&key).copied().unwrap_or(0)
    }

    #[inline]
    pub(crate) fn count3(&self, key: [u32; 3]) -> u64 {
        self.trigrams.get(&key).copied().unwrap_or(0)
    }

    /// Count multiset of one order, in unspecified order.
    pub fn counts(&self, order: usize) -> Box<dyn Iterator<Item = u64> + '_> {
        match order {
            2 => Box::new(self.bigrams.values().copied()),
            3 => Box::new(self.trigrams.values().copied()),
            _ => Box::new(std::iter::empty()),
        }
    }

    /// All entries of one order as `(tokens, count)`, sorted by tokens.
    pub fn entries(&self, order: usize) -> Vec<(Vec<&str>, u64)> {
        let word = |id: u32| &*self.vocab[id as usize];
        let mut out: Vec<(Vec<&str>, u64)> = match order {
            2 => self
                .bigrams
                .iter()
                .map(|(k, &c)| (k.iter().map(|&i| word(i)).collect(), c))
                .collect(),
            3 => self
                .trigrams
                .iter()
                .map(|(k, &c)| (k.iter().map(|&i| word(i)).collect(), c))
                .collect(),
            _ => Vec::new(),
        };
        out.sort_unstable();
        out
    }

    #[inline]
    fn intern(&mut self, token: &str) -> u32 {
        if let Some(i) = self.vocab.get_index_of(token) {
            return i as u32;
        }
        self.vocab.insert_full(token.into()).0 as u32
    }

    #[inline]
    fn bump2(&mut self, key: [u32; 2], by: u64) -> u64 {
        let slot = self.bigrams.entry(key).or_insert(0);
        *slot += by;
        *slot
    }

    #[inline]
    fn bump3(&mut self, key: [u32; 3], by: u64) -> u64 {
        let slot = self.trigrams.entry(key).or_insert(0);
        *slot += by;
        *slot
    }

    /// Adds one occurrence of an arbitrary window (2 or 3 tokens).
    pub(crate) fn add_window(&mut self, tokens: &[&str]) {
        match *tokens {
            [a, b] => {
                let key = [self.intern(a), self.intern(b)];
                self.bump2(key, 1);
            }
            [a, b, c] => {
                let key = [self.intern(a), self.intern(b), self.intern(c)];
                self.bump3(key, 1);
            }
            _ => {}
        }
    }

    /// Adds the windows that straddle one cut of the token stream: they start
    /// in `before` (the last up-to-two tokens ahead of the cut) and end in
    /// the first `own` tokens of `after` (the first up-to-two tokens behind
    /// it). Windows ending further on are left to a later cut.
    pub(crate) fn stitch_cut(&mut self, before: &[&str], after: &[&str], own: usize) {
        let seq: Vec<&str> = before.iter().chain(after).copied().collect();
        let cut = before.len();
        for end in cut..cut + own.min(after.len()) {
            for order in 2..=3 {
                if end + 1 >= order && end + 1 - order < cut {
                    let start = end + 1 - order;
                    self.add_window(&seq[start..=end]);
                }
            }
        }
    }

    /// Pointwise sum of counts; `total_messages` is summed as well.
    pub fn merge(a: NGramDictionary, b: NGramDictionary) -> NGramDictionary {
        let (mut big, small) = if a.vocab.len() >= b.vocab.len() { (a, b) } else { (b, a) };
        big.absorb(&small);
        big
    }

    /// Adds every count of `other` into `self`.
    pub fn absorb(&mut self, other: &NGramDictionary) {
        let remap: Vec<u32> = other.vocab.iter().map(|t| self.intern(t)).collect();
        self.bigrams.reserve(other.bigrams.len());
        for (k, &c) in &other.bigrams {
            self.bump2([remap[k[0] as usize], remap[k[1] as usize]], c);
        }
        self.trigrams.reserve(other.trigrams.len());
        for (k, &c) in &other.trigrams {
            self.bump3(
                [remap[k[0] as usize], remap[k[1] as usize], remap[k[2] as usize]],
                c,
            );
        }
        self.total_messages += other.total_messages;
    }

    /// Writes the line-oriented text format:
    /// `#\ttotal_messages\t<n>` followed by `<order>\t<t1>\x1F<t2>[\x1F<t3>]\t<count>`
    /// lines, 2-grams first, each order sorted by tokens.
    pub fn save<W: Write>(&self, mut sink: W) -> Result<(), DictionaryError> {
        writeln!(sink, "#\ttotal_messages\t{}", self.total_messages)?;
        let mut key = String::new();
        for order in 2..=3 {
            for (toks, count) in self.entries(order) {
                key.clear();
                for (i, t) in toks.iter().enumerate() {
                    if i > 0 {
                        key.push(TOKEN_SEP);
                    }
                    key.push_str(t);
                }
                writeln!(sink, "{order}\t{key}\t{count}")?;
            }
        }
        sink.flush()?;
        Ok(())
    }

    pub fn load<R: BufRead>(source: R) -> Result<Self, DictionaryError> {
        let mut dict = Self::new();
        for (idx, line) in source.lines().enumerate() {
            let line = line?;
            let lineno = idx + 1;
            let bad = |message: String| DictionaryError::Malformed { line: lineno, message };
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if let Some(rest) = line.strip_prefix("#\t") {
                let n = rest
                    .strip_prefix("total_messages\t")
                    .and_then(|n| n.parse().ok())
                    .ok_or_else(|| bad(format!("bad metadata line `{line}`")))?;
                dict.total_messages = n;
                continue;
            }
            let [order, key, count] = fields.as_slice() else {
                return Err(bad(format!("expected 3 tab-separated fields, got {}", fields.len())));
            };
            let order: usize = order.parse().map_err(|_| bad(format!("bad order `{order}`")))?;
            let count: u64 = count.parse().map_err(|_| bad(format!("bad count `{count}`")))?;
            if count == 0 {
                return Err(bad("zero count".into()));
            }
            let toks: Vec<&str> = key.split(TOKEN_SEP).collect();
            if toks.len() != order || !(2..=3).contains(&order) {
                return Err(bad(format!("order {order} does not match {} tokens", toks.len())));
            }
            if toks.iter().any(|t| t.is_empty()) {
                return Err(bad("empty token".into()));
            }
            let ids: Vec<u32> = toks.iter().map(|t| dict.intern(t)).collect();
            let fresh = if order == 2 {
                dict.bigrams.insert([ids[0], ids[1]], count).is_none()
            } else {
                dict.trigrams.insert([ids[0], ids[1], ids[2]], count).is_none()
            };
            if !fresh {
                return Err(bad("duplicate entry".into()));
            }
        }
        Ok(dict)
    }
}

impl PartialEq for NGramDictionary {
    fn eq(&self, other: &Self) -> bool {
        if self.total_messages != other.total_messages
            || self.bigrams.len() != other.bigrams.len()
            || self.trigrams.len() != other.trigrams.len()
        {
            return false;
        }
        let word = |id: u32| &*self.vocab[id as usize];
        self.bigrams
            .iter()
            .all(|(k, &c)| other.count(&[word(k[0]), word(k[1])]) == c)
            && self
                .trigrams
                .iter()
                .all(|(k, &c)| other.count(&[word(k[0]), word(k[1]), word(k[2])]) == c)
    }
}

/// Incremental single-pass dictionary construction over a token stream.
#[derive(Debug, Default)]
pub struct DictionaryBuilder {
    dict: NGramDictionary,
    older: Option<u32>,
    newer: Option<u32>,
    head: BoundaryContext,
    tail: BoundaryContext,
    tokens_seen: u64,
}

/// First and last up-to-two tokens of a stream segment.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct StreamEdges {
    pub head: BoundaryContext,
    pub tail: BoundaryContext,
    pub messages: u64,
}

impl DictionaryBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends one message; `on_update(order, new_count)` sees every increment.
    #[inline]
    pub(crate) fn push_observed<S: AsRef<str>>(
        &mut self,
        tokens: &[S],
        mut on_update: impl FnMut(usize, u64),
    ) {
        for tok in tokens {
            let tok = tok.as_ref();
            let id = self.dict.intern(tok);
            self.tokens_seen += 1;
            if let Some(prev) = self.newer {
                if let Some(prev2) = self.older {
                    on_update(3, self.dict.bump3([prev2, prev, id], 1));
                }
                on_update(2, self.dict.bump2([prev, id], 1));
            }
            self.older = self.newer;
            self.newer = Some(id);
        }
        if !self.head.is_full() {
            self.head.fill_head(tokens);
        }
        self.tail.extend(tokens);
        self.dict.total_messages += 1;
    }

    /// Appends one message's tokens to the stream.
    pub fn push<S: AsRef<str>>(&mut self, tokens: &[S]) {
        self.push_observed(tokens, |_, _| {});
    }

    /// Number of tokens examined so far; each token is visited exactly once.
    pub fn tokens_seen(&self) -> u64 {
        self.tokens_seen
    }

    /// The dictionary built so far.
    pub fn dictionary(&self) -> &NGramDictionary {
        &self.dict
    }

    pub fn finish(self) -> NGramDictionary {
        self.dict
    }

    /// Finishes and also reports the segment's edge tokens, used to stitch
    /// independently built segments back together.
    pub fn finish_with_edges(self) -> (NGramDictionary, StreamEdges) {
        let edges = StreamEdges {
            head: self.head,
            tail: self.tail,
            messages: self.dict.total_messages,
        };
        (self.dict, edges)
    }
}

/// Builds a dictionary from records in file order.
pub fn build<'a>(records: impl IntoIterator<Item = &'a LogRecord>) -> NGramDictionary {
    let mut builder = DictionaryBuilder::new();
    for r in records {
        builder.push(&r.tokens);
    }
    builder.finish()
}

/// Pointwise sum of two dictionaries.
pub fn merge(a: NGramDictionary, b: NGramDictionary) -> NGramDictionary {
    NGramDictionary::merge(a, b)
}

/// Combines segment dictionaries built independently over consecutive stream
/// segments, adding back the windows that straddle each segment boundary.
/// The result equals a sequential build over the whole stream.
pub fn combine_segments(parts: Vec<(NGramDictionary, StreamEdges)>) -> NGramDictionary {
    // The stream head after each cut may reach into later segments when a
    // segment holds fewer than two tokens.
    let mut heads = vec![BoundaryContext::default(); parts.len()];
    let mut following = BoundaryContext::default();
    for (i, (_, edges)) in parts.iter().enumerate().rev() {
        let mut head = edges.head.clone();
        head.fill_head(following.tokens());
        following = head.clone();
        heads[i] = head;
    }
    let mut cuts = Vec::with_capacity(parts.len());
    let mut stream_tail = BoundaryContext::default();
    let mut dicts = Vec::with_capacity(parts.len());
    for ((dict, edges), head) in parts.into_iter().zip(heads) {
        cuts.push((stream_tail.clone(), head, edges.head.tokens().len()));
        stream_tail.extend(edges.tail.tokens());
        dicts.push(dict);
    }
    let mut merged = tree_merge(dicts);
    for (before, after, own) in cuts.iter().skip(1) {
        merged.stitch_cut(&before.as_strs(), &after.as_strs(), *own);
    }
    merged
}

/// Pairwise merge, log-depth.
pub fn tree_merge(mut dicts: Vec<NGramDictionary>) -> NGramDictionary {
    while dicts.len() > 1 {
        let mut next = Vec::with_capacity(dicts.len().div_ceil(2));
        let mut it = dicts.into_iter();
        while let Some(a) = it.next() {
            next.push(match it.next() {
                Some(b) => NGramDictionary::merge(a, b),
                None => a,
            });
        }
        dicts = next;
    }
    dicts.pop().unwrap_or_default()
}
