//! Turning raw log lines into [`LogRecord`]s.
//!
//! A line is matched against the dataset's header pattern; the `content`
//! capture is mask-substituted and then split on whitespace. Lines that do
//! not match are handled by the dataset's [`MultilinePolicy`].

use std::io::BufRead;
use std::sync::Arc;

use regex::{NoExpand, Regex};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("invalid header pattern for dataset `{dataset}`: {source}")]
    HeaderPattern {
        dataset: String,
        #[source]
        source: regex::Error,
    },
    #[error("header pattern for dataset `{0}` has no `content` capture")]
    MissingContentCapture(String),
    #[error("invalid mask pattern `{pattern}` for dataset `{dataset}`: {source}")]
    MaskPattern {
        dataset: String,
        pattern: String,
        #[source]
        source: regex::Error,
    },
    #[error("unknown multiline policy `{0}` (expected join, drop or keep)")]
    UnknownMultiline(String),
    #[error("config line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("dataset `{0}` not found in config")]
    UnknownDataset(String),
    #[error("dataset `{0}` has no `header` key")]
    MissingHeader(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Error)]
pub enum PreprocessError {
    #[error("failed reading input after line {line}: {source}")]
    Io {
        line: u64,
        #[source]
        source: std::io::Error,
    },
}

/// What to do with a physical line that does not match the header pattern.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MultilinePolicy {
    /// Append the line's tokens to the previous record (stack traces and the like).
    #[default]
    JoinToPrevious,
    Drop,
    /// Emit the whole line as content of a header-less record.
    KeepAsOwnRecord,
}

impl std::str::FromStr for MultilinePolicy {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "join" | "join-to-previous" => Ok(Self::JoinToPrevious),
            "drop" => Ok(Self::Drop),
            "keep" | "keep-as-own-record" => Ok(Self::KeepAsOwnRecord),
            other => Err(ConfigError::UnknownMultiline(other.to_string())),
        }
    }
}

#[derive(Debug, Clone)]
struct MaskRule {
    pattern: Regex,
    tag: String,
}

/// Per-dataset preprocessing configuration.
#[derive(Debug, Clone)]
pub struct DatasetConfig {
    pub name: String,
    pub multiline: MultilinePolicy,
    header_source: String,
    header: Regex,
    content_group: usize,
    fields: Vec<(usize, Arc<str>)>,
    masks: Vec<MaskRule>,
}

impl DatasetConfig {
    /// Builds a config from a header spec and an ordered list of `(pattern, tag)` masks.
    ///
    /// The header spec is either a regular expression with named captures
    /// (detected by the presence of `(?P<` or `(?<`) or a LogPai-style format
    /// string such as `<Date> <Time> <Level> <Component>: <Content>`.
    pub fn new(
        name: impl Into<String>,
        header: &str,
        masks: Vec<(String, String)>,
        multiline: MultilinePolicy,
    ) -> Result<Self, ConfigError> {
        let name = name.into();
        let source = if header.contains("(?P<") || header.contains("(?<") {
            header.to_string()
        } else {
            format_to_regex(header)
        };
        let regex = Regex::new(&source).map_err(|e| ConfigError::HeaderPattern {
            dataset: name.clone(),
            source: e,
        })?;

        let mut content_group = None;
        let mut fields = Vec::new();
        for (idx, cap) in regex.capture_names().enumerate() {
            let Some(cap) = cap else { continue };
            if cap.eq_ignore_ascii_case("content") {
                content_group = Some(idx);
            } else {
                fields.push((idx, Arc::from(cap)));
            }
        }
        let content_group =
            content_group.ok_or_else(|| ConfigError::MissingContentCapture(name.clone()))?;

        let masks = masks
            .into_iter()
            .map(|(pattern, tag)| {
                Regex::new(&pattern)
                    .map(|re| MaskRule { pattern: re, tag })
                    .map_err(|e| ConfigError::MaskPattern {
                        dataset: name.clone(),
                        pattern,
                        source: e,
                    })
            })
            .collect::<Result<Vec<_>, _>>()?;

        Ok(Self {
            name,
            multiline,
            header_source: source,
            header: regex,
            content_group,
            fields,
            masks,
        })
    }

    /// The header regular expression actually used for matching.
    pub fn header_regex(&self) -> &str {
        &self.header_source
    }

    pub fn mask_count(&self) -> usize {
        self.masks.len()
    }

    pub fn matches_header(&self, line: &str) -> bool {
        !line.trim().is_empty() && self.header.is_match(line)
    }
}

/// Converts a LogPai `<Field>` format string to an anchored regex.
fn format_to_regex(format: &str) -> String {
    let field = Regex::new(r"<([^<>]+)>").expect("static regex");
    let spaces = Regex::new(r" +").expect("static regex");
    let mut out = String::from("^");
    let mut last = 0;
    for cap in field.captures_iter(format) {
        let whole = cap.get(0).unwrap();
        out.push_str(&spaces.replace_all(&format[last..whole.start()], r"\s+"));
        out.push_str(&format!("(?P<{}>.*?)", &cap[1]));
        last = whole.end();
    }
    out.push_str(&spaces.replace_all(&format[last..], r"\s+"));
    out.push('$');
    out
}

/// One log message: header fields plus the ordered content tokens.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LogRecord {
    pub line_id: u64,
    pub header: Vec<(Arc<str>, String)>,
    /// Content text before masking.
    pub content: String,
    pub tokens: Vec<String>,
}

impl LogRecord {
    pub fn field(&self, name: &str) -> Option<&str> {
        self.header
            .iter()
            .find(|(k, _)| &**k == name)
            .map(|(_, v)| v.as_str())
    }

    fn headerless(line_id: u64, raw: &str, cfg: &DatasetConfig) -> Self {
        Self {
            line_id,
            header: Vec::new(),
            content: raw.to_string(),
            tokens: tokenize(&mask_common_formats(raw, cfg)),
        }
    }
}

fn is_separator(c: char) -> bool {
    // 0x1F is reserved as the token separator of the dictionary file format.
    c.is_whitespace() || c == '\x1f'
}

/// Splits on runs of whitespace; never yields empty tokens.
pub fn tokenize(content: &str) -> Vec<String> {
    content
        .split(is_separator)
        .filter(|t| !t.is_empty())
        .map(str::to_owned)
        .collect()
}

/// Replaces every match of each mask pattern, in listed order, by its tag.
pub fn mask_common_formats(content: &str, cfg: &DatasetConfig) -> String {
    let mut text = std::borrow::Cow::Borrowed(content);
    for rule in &cfg.masks {
        if let std::borrow::Cow::Owned(replaced) =
            rule.pattern.replace_all(&text, NoExpand(&rule.tag))
        {
            text = std::borrow::Cow::Owned(replaced);
        }
    }
    text.into_owned()
}

/// Parses one physical line. `None` means the header pattern did not match
/// (or the line is blank); the caller decides what to do per multiline policy.
pub fn parse_line(raw: &str, cfg: &DatasetConfig, line_id: u64) -> Option<LogRecord> {
    if raw.trim().is_empty() {
        return None;
    }
    let caps = cfg.header.captures(raw)?;
    let content = caps.get(cfg.content_group).map_or("", |m| m.as_str());
    let header = cfg
        .fields
        .iter()
        .filter_map(|(idx, name)| caps.get(*idx).map(|m| (name.clone(), m.as_str().to_string())))
        .collect();
    Some(LogRecord {
        line_id,
        header,
        content: content.to_string(),
        tokens: tokenize(&mask_common_formats(content, cfg)),
    })
}

/// Streams records out of a line source, applying the multiline policy.
///
/// Line ids are assigned to emitted records sequentially starting at `first_id`.
pub struct RecordReader<'c, R> {
    source: R,
    cfg: &'c DatasetConfig,
    buf: String,
    pending: Option<LogRecord>,
    next_id: u64,
    lines_read: u64,
    done: bool,
}

impl<'c, R: BufRead> RecordReader<'c, R> {
    pub fn new(source: R, cfg: &'c DatasetConfig) -> Self {
        Self::starting_at(source, cfg, 1)
    }

    pub fn starting_at(source: R, cfg: &'c DatasetConfig, first_id: u64) -> Self {
        Self {
            source,
            cfg,
            buf: String::new(),
            pending: None,
            next_id: first_id,
            lines_read: 0,
            done: false,
        }
    }

    fn take_id(&mut self) -> u64 {
        let id = self.next_id;
        self.next_id += 1;
        id
    }
}

impl<R: BufRead> Iterator for RecordReader<'_, R> {
    type Item = Result<LogRecord, PreprocessError>;

    fn next(&mut self) -> Option<Self::Item> {
        while !self.done {
            self.buf.clear();
            match self.source.read_line(&mut self.buf) {
                Ok(0) => {
                    self.done = true;
                    break;
                }
                Ok(_) => {}
                Err(source) => {
                    self.done = true;
                    return Some(Err(PreprocessError::Io {
                        line: self.lines_read,
                        source,
                    }));
                }
            }
            self.lines_read += 1;
            let line = self.buf.trim_end_matches(['\n', '\r']);

            if let Some(mut record) = parse_line(line, self.cfg, 0) {
                record.line_id = self.take_id();
                if let Some(prev) = self.pending.replace(record) {
                    return Some(Ok(prev));
                }
                continue;
            }
            if line.trim().is_empty() {
                continue;
            }
            match self.cfg.multiline {
                MultilinePolicy::Drop => {}
                MultilinePolicy::JoinToPrevious => {
                    if let Some(prev) = self.pending.as_mut() {
                        prev.content.push(' ');
                        prev.content.push_str(line);
                        prev.tokens
                            .extend(tokenize(&mask_common_formats(line, self.cfg)));
                    } else {
                        let line = line.to_string();
                        let id = self.take_id();
                        self.pending = Some(LogRecord::headerless(id, &line, self.cfg));
                    }
                }
                MultilinePolicy::KeepAsOwnRecord => {
                    let line = line.to_string();
                    let id = self.take_id();
                    let record = LogRecord::headerless(id, &line, self.cfg);
                    if let Some(prev) = self.pending.replace(record) {
                        return Some(Ok(prev));
                    }
                }
            }
        }
        self.pending.take().map(Ok)
    }
}

/// Convenience wrapper around [`RecordReader`].
pub fn read_records<R: BufRead>(source: R, cfg: &DatasetConfig) -> RecordReader<'_, R> {
    RecordReader::new(source, cfg)
}
