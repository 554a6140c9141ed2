//! Log parsing with frequency dictionaries of 2-grams and 3-grams.
//!
//! Tokens inside rarely seen n-grams are dynamic (variables); everything
//! else is static template text. Thresholds separating rare from frequent
//! grams are picked automatically from the occurrence histogram.
//!
//! ```
//! use gramlog::dictionary::build;
//! use gramlog::parser::{parse_corpus, PlaceholderStyle};
//! use gramlog::preprocess::tokenize;
//! use gramlog::preprocess::LogRecord;
//! use gramlog::threshold::ThresholdPair;
//!
//! let lines = ["open file a.txt now", "open file b.txt now", "open file c.txt now"];
//! let records: Vec<LogRecord> = lines
//!     .iter()
//!     .enumerate()
//!     .map(|(i, l)| LogRecord { line_id: i as u64 + 1, header: vec![], content: l.to_string(), tokens: tokenize(l) })
//!     .collect();
//! let dict = build(&records);
//! let parsed = parse_corpus(&records, &dict, ThresholdPair::new(2, 2), PlaceholderStyle::Dollar);
//! assert_eq!(parsed[1].template, "open file $1 now");
//! ```

pub mod config;
pub mod dictionary;
pub mod eval;
pub mod output;
pub mod parallel;
pub mod parser;
pub mod preprocess;
pub mod streaming;
pub mod synth;
pub mod threshold;

pub use csv;
