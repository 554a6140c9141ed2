//! Plain-text dataset config files.
//!
//! ```text
//! # comment
//! [HDFS]
//! header = <Date> <Time> <Pid> <Level> <Component>: <Content>
//! mask.1.pattern = blk_-?\d+
//! mask.1.tag = <*>
//! multiline = join
//! ```
//!
//! Masks are applied in ascending `N` order. A mask without a tag uses `<*>`.

use std::collections::BTreeMap;
use std::path::Path;

use crate::preprocess::{ConfigError, DatasetConfig, MultilinePolicy};

pub const DEFAULT_MASK_TAG: &str = "<*>";

#[derive(Debug, Default)]
struct Section {
    header: Option<String>,
    masks: BTreeMap<u32, (Option<String>, Option<String>)>,
    multiline: Option<String>,
}

/// All datasets defined in one config file, in file order.
#[derive(Debug, Clone)]
pub struct ConfigFile {
    datasets: Vec<DatasetConfig>,
}

impl ConfigFile {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut sections: Vec<(String, Section)> = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let lineno = idx + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') || line.starts_with(';') {
                continue;
            }
            if let Some(name) = line.strip_prefix('[') {
                let name = name.strip_suffix(']').ok_or_else(|| ConfigError::Syntax {
                    line: lineno,
                    message: "unterminated section header".into(),
                })?;
                sections.push((name.trim().to_string(), Section::default()));
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| ConfigError::Syntax {
                line: lineno,
                message: format!("expected `key = value`, got `{line}`"),
            })?;
            let (key, value) = (key.trim(), value.trim().to_string());
            let Some((_, section)) = sections.last_mut() else {
                return Err(ConfigError::Syntax {
                    line: lineno,
                    message: "key outside of a [dataset] section".into(),
                });
            };
            match key {
                "header" => section.header = Some(value),
                "multiline" => section.multiline = Some(value),
                _ => {
                    let parts: Vec<&str> = key.split('.').collect();
                    let n = match parts.as_slice() {
                        ["mask", n, "pattern" | "tag"] => n.parse::<u32>().ok(),
                        _ => None,
                    }
                    .ok_or_else(|| ConfigError::Syntax {
                        line: lineno,
                        message: format!("unknown key `{key}`"),
                    })?;
                    let slot = section.masks.entry(n).or_default();
                    if parts[2] == "pattern" {
                        slot.0 = Some(value);
                    } else {
                        slot.1 = Some(value);
                    }
                }
            }
        }

        let datasets = sections
            .into_iter()
            .map(|(name, section)| {
                let header = section
                    .header
                    .ok_or_else(|| ConfigError::MissingHeader(name.clone()))?;
                let multiline = match section.multiline {
                    Some(m) => m.parse()?,
                    None => MultilinePolicy::default(),
                };
                let masks = section
                    .masks
                    .into_iter()
                    .filter_map(|(_, (pattern, tag))| {
                        pattern.map(|p| (p, tag.unwrap_or_else(|| DEFAULT_MASK_TAG.to_string())))
                    })
                    .collect();
                DatasetConfig::new(name, &header, masks, multiline)
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self { datasets })
    }

    pub fn dataset(&self, name: &str) -> Result<&DatasetConfig, ConfigError> {
        self.datasets
            .iter()
            .find(|d| d.name == name)
            .ok_or_else(|| ConfigError::UnknownDataset(name.to_string()))
    }

    pub fn datasets(&self) -> &[DatasetConfig] {
        &self.datasets
    }
}
