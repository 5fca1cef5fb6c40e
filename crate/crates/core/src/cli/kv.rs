//! Flat key=value config files: one `key = value` pair per line, `#`
//! comments, repeated keys where a command allows them. Consumers take
//! the keys they understand; anything left over is rejected.

use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Default)]
pub struct KvConfig {
    entries: Vec<(String, String)>,
    origin: Option<PathBuf>,
    raw: String,
}

impl KvConfig {
    pub fn empty() -> Self {
        KvConfig::default()
    }

    pub fn parse(text: &str, origin: Option<&Path>) -> Result<Self, String> {
        let mut entries = Vec::new();
        for (idx, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line split_pair(line).ok_or_else(|| {
                format!(
                    "{}:{}: expected key = value, got {line:?}",
                    origin.map(|p| p.display().to_string()).unwrap_or_default(),
                    idx + 1
                )
            })?;
            entries.push((key.to_string(), value.to_string()));
        }
        Ok(KvConfig {
            entries,
            origin: origin.map(Path::to_path_buf),
            raw: text.to_string(),
        })
    }

    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
        Self::parse(&text, Some(path))
    }

    /// Removes and returns the value of a single-valued key.
    pub fn take(&mut self, key: &str) -> Option<String> {
        let pos = self.entries.iter().position(|(k, _)| k == key)?;
        Some(self.entries.remove(pos).1)
    }

    /// Removes and returns every value of a repeatable key, in order.
    pub fn take_all(&mut self, key: &str) -> Vec<String> {
        let mut values = Vec::new();
        self.entries.retain(|(k, v)| {
            if k == key {
                values.push(v.clone());
                false
            } else {
                true
            }
        });
        values
    }

    pub fn take_parsed<T: std::str::FromStr>(&mut self, key: &str) -> Result<Option<T>, String>
    where
        T::Err: std::fmt::Display,
    {
        match self.take(key) {
            None => Ok(None),
            Some(raw) => raw
                .parse::<T>()
                .map(Some)
                .map_err(|e| format!("config key {key}: invalid value {raw:?}: {e}")),
        }
    }

    /// Errors if any unconsumed keys remain.
    pub fn finish(self) -> Result<(), String> {
        if self.entries.is_empty() {
            return Ok(());
        }
        let keys: Vec<&str> = self.entries.iter().map(|(k, _)| k.as_str()).collect();
        let origin = self
            .origin
            .map(|p| format!(" in {}", p.display()))
            .unwrap_or_default();
        Err(format!("unknown config keys{origin}: {}", keys.join(", ")))
    }

    /// Original file content, for the reproducibility stamp.
    pub fn raw_text(&self) -> &str {
        &self.raw
    }
}

fn split_pair(line: &str) -> Option<(&str, &str)> {
    let (key, value) = line.split_once('=')?;
    Some((key.trim(), value.trim()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_pairs_comments_and_blanks() {
        let cfg = KvConfig::parse("# hello\n\nmanifest = /a/b.jsonl\nseed=7\n", None).unwrap();
        let mut cfg = cfg;
        assert_eq!(cfg.take("manifest").as_deref(), Some("/a/b.jsonl"));
        assert_eq!(cfg.take_parsed::<u64>("seed").unwrap(), Some(7));
        assert!(cfg.finish().is_ok());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let cfg = KvConfig::parse("mystery = 1\n", None).unwrap();
        let err = cfg.finish().unwrap_err();
        assert!(err.contains("mystery"));
    }

    #[test]
    fn repeated_keys_collect_in_order() {
        let mut cfg = KvConfig::parse("row = A=1\nrow = B=2\ncol = C\n", None).unwrap();
        assert_eq!(cfg.take_all("row"), vec!["A=1", "B=2"]);
        assert_eq!(cfg.take_all("col"), vec!["C"]);
        assert!(cfg.finish().is_ok());
    }

    #[test]
    fn bad_lines_are_errors() {
        assert!(KvConfig::parse("just a line\n", None).is_err());
    }

    #[test]
    fn bad_values_name_the_key() {
        let mut cfg = KvConfig::parse("seed = banana\n", None).unwrap();
        let err = cfg.take_parsed::<u64>("seed").unwrap_err();
        assert!(err.contains("seed") && err.contains("banana"));
    }
}
