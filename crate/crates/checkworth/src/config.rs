//! Plain-text configuration files.
//!
//! One `key = value` pair per line. `#` starts a comment, blank lines are
//! ignored, and keys are the long command-line flag names with `-` or `_`
//! interchangeable:
//!
//! ```text
//! # shared experiment settings
//! seed = 7
//! hidden = 100
//! learning-rate = 0.0001
//! mode = truncate-scale
//! ```
//!
//! A flag given on the command line always overrides the file, and the file
//! overrides built-in defaults.

use std::cell::RefCell;
use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::str::FromStr;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("config line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("config line {line}: invalid value `{value}` for `{key}`: {message}")]
    Value {
        line: usize,
        key: String,
        value: String,
        message: String,
    },
}

#[derive(Debug, Clone)]
struct Entry {
    value: String,
    line: usize,
}

#[derive(Debug, Default)]
pub struct ConfigFile {
    entries: BTreeMap<String, Entry>,
    used: RefCell<BTreeSet<String>>,
}

fn normalize(key: &str) -> String {
    key.trim().replace('_', "-")
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let Some((key, value)) = content.split_once('=') else {
                return Err(ConfigError::Syntax {
                    line,
                    message: format!("expected `key = value`, found `{content}`"),
                });
            };
            let key = normalize(key);
            if key.is_empty() || !key.chars().all(|c| c.is_ascii_alphanumeric() || c == '-') {
                return Err(ConfigError::Syntax {
                    line,
                    message: format!("invalid key `{key}`"),
                });
            }
            let entry = Entry {
                value: value.trim().to_string(),
                line,
            };
            if let Some(prev) = entries.insert(key.clone(), entry) {
                return Err(ConfigError::Syntax {
                    line,
                    message: format!("duplicate key `{key}` (first on line {})", prev.line),
                });
            }
        }
        Ok(Self {
            entries,
            used: RefCell::default(),
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>, ConfigError>
    where
        T::Err: std::fmt::Display,
    {
        let key = normalize(key);
        let Some(entry) = self.entries.get(&key) else {
            return Ok(None);
        };
        self.used.borrow_mut().insert(key.clone());
        entry
            .value
            .parse()
            .map(Some)
            .map_err(|e: T::Err| ConfigError::Value {
                line: entry.line,
                key,
                value: entry.value.clone(),
                message: e.to_string(),
            })
    }

    /// `flag`, else the file's value for `key`, else `default`.
    pub fn resolve<T: FromStr>(
        &self,
        flag: Option<T>,
        key: &str,
        default: T,
    ) -> Result<T, ConfigError>
    where
        T::Err: std::fmt::Display,
    {
        let from_file = self.get(key)?;
        Ok(flag.or(from_file).unwrap_or(default))
    }

    /// Like [`resolve`](Self::resolve) for switches: set when the flag is
    /// given or the file says `true`.
    pub fn switch(&self, flag: bool, key: &str) -> Result<bool, ConfigError> {
        Ok(flag || self.get::<bool>(key)?.unwrap_or(false))
    }

    /// Keys present in the file that no lookup has asked for.
    pub fn unused(&self) -> Vec<String> {
        let used = self.used.borrow();
        self.entries
            .keys()
            .filter(|k| !used.contains(*k))
            .cloned()
            .collect()
    }
}
