//! Sectioned `key = value` scenario files.
//!
//! ```text
//! # comment
//! [trap]
//! delta0_hz = -268      # trailing comments are allowed
//! ```
//!
//! Every lookup marks its key as used; [`Config::finish`] rejects keys that
//! no command consumed, so a misspelt key is reported with its line instead
//! of silently falling back to a default.

use std::cell::RefCell;
use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use crate::CliError;

#[derive(Debug, Clone)]
struct Entry {
    line: usize,
    value: String,
}

#[derive(Debug, Default)]
pub struct Config {
    origin: String,
    base_dir: PathBuf,
    sections: BTreeMap<String, (usize, BTreeMap<String, Entry>)>,
    used: RefCell<BTreeSet<(String, String)>>,
}

impl Config {
    pub fn from_path(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Input(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg = Self::parse(&text, &path.display().to_string())?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    pub fn parse(text: &str, origin: &str) -> Result<Self, CliError> {
        let mut cfg = Config {
            origin: origin.to_string(),
            ..Default::default()
        };
        let mut current: Option<String> = None;
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            if let Some(name) = content.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
                let name = name.trim().to_ascii_lowercase();
                if name.is_empty() || cfg.sections.contains_key(&name) {
                    return Err(cfg.error(line, format!("empty or repeated section `[{name}]`")));
                }
                cfg.sections.insert(name.clone(), (line, BTreeMap::new()));
                current = Some(name);
                continue;
            }
            let Some((key, value)) = content.split_once('=') else {
                return Err(cfg.error(line, format!("expected `key = value`, found `{content}`")));
            };
            let Some(section) = current.as_ref() else {
                return Err(cfg.error(line, "key outside of any [section]"));
            };
            let key = key.trim().to_ascii_lowercase();
            let entries = &mut cfg.sections.get_mut(section).expect("inserted above").1;
            if key.is_empty() {
                return Err(cfg.error(line, "empty key"));
            }
            if let Some(prev) = entries.get(&key) {
                let msg = format!("`{key}` repeats the value given on line {}", prev.line);
                return Err(cfg.error(line, msg));
            }
            entries.insert(
                key,
                Entry {
                    line,
                    value: value.trim().to_string(),
                },
            );
        }
        Ok(cfg)
    }

    fn error(&self, line: usize, msg: impl std::fmt::Display) -> CliError {
        CliError::Input(format!("{}:{line}: {msg}", self.origin))
    }

    fn entry(&self, section: &str, key: &str) -> Option<&Entry> {
        let e = self.sections.get(section)?.1.get(key)?;
        self.used.borrow_mut().insert((section.to_string(), key.to_string()));
        Some(e)
    }

    pub fn has_section(&self, section: &str) -> bool {
        self.sections.contains_key(section)
    }

    pub fn has(&self, section: &str, key: &str) -> bool {
        self.sections.get(section).is_some_and(|s| s.1.contains_key(key))
    }

    pub fn str(&self, section: &str, key: &str) -> Option<&str> {
        self.entry(section, key).map(|e| e.value.as_str())
    }

    pub fn f64(&self, section: &str, key: &str) -> Result<Option<f64>, CliError> {
        let Some(e) = self.entry(section, key) else {
            return Ok(None);
        };
        match e.value.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(Some(v)),
            _ => Err(self.error(e.line, format!("[{section}] {key}: `{}` is not a finite number", e.value))),
        }
    }

    pub fn f64_or(&self, section: &str, key: &str, default: f64) -> Result<f64, CliError> {
        Ok(self.f64(section, key)?.unwrap_or(default))
    }

    pub fn require_f64(&self, section: &str, key: &str) -> Result<f64, CliError> {
        self.f64(section, key)?
            .ok_or_else(|| CliError::Input(format!("{}: [{section}] {key} is required", self.origin)))
    }

    pub fn u64(&self, section: &str, key: &str) -> Result<Option<u64>, CliError> {
        let Some(e) = self.entry(section, key) else {
            return Ok(None);
        };
        e.value
            .parse::<u64>()
            .map(Some)
            .map_err(|_| self.error(e.line, format!("[{section}] {key}: `{}` is not a non-negative integer", e.value)))
    }

    /// Comma-separated numbers.
    pub fn f64_list(&self, section: &str, key: &str) -> Result<Option<Vec<f64>>, CliError> {
        let Some(e) = self.entry(section, key) else {
            return Ok(None);
        };
        e.value
            .split(',')
            .map(|s| s.trim().parse::<f64>().ok().filter(|v| v.is_finite()))
            .collect::<Option<Vec<_>>>()
            .map(Some)
            .ok_or_else(|| self.error(e.line, format!("[{section}] {key}: `{}` is not a list of numbers", e.value)))
    }

    /// A path relative to the config file's directory.
    pub fn path(&self, section: &str, key: &str) -> Option<PathBuf> {
        self.str(section, key).map(|p| self.base_dir.join(p))
    }

    /// Exactly one of two alternative keys, e.g. a field given in Hz or via
    /// a physical quantity.
    pub fn one_of(&self, section: &str, a: &str, b: &str) -> Result<Either, CliError> {
        match (self.has(section, a), self.has(section, b)) {
            (true, false) => Ok(Either::First(self.require_f64(section, a)?)),
            (false, true) => Ok(Either::Second(self.require_f64(section, b)?)),
            (true, true) => {
                let line = self.sections[section].1[b].line;
                Err(self.error(line, format!("[{section}] give either {a} or {b}, not both")))
            }
            (false, false) => Err(CliError::Input(format!(
                "{}: [{section}] needs exactly one of {a} or {b}",
                self.origin
            ))),
        }
    }

    /// Fails on the first section or key no lookup touched.
    pub fn finish(&self) -> Result<(), CliError> {
        let used = self.used.borrow();
        for (name, (line, entries)) in &self.sections {
            if entries.is_empty() {
                continue;
            }
            if !used.iter().any(|(s, _)| s == name) {
                return Err(self.error(*line, format!("section `[{name}]` is not used by this command")));
            }
            for (key, e) in entries {
                if !used.contains(&(name.clone(), key.clone())) {
                    return Err(self.error(e.line, format!("unknown key `{key}` in [{name}]")));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Either {
    First(f64),
    Second(f64),
}

#[cfg(test)]
mod tests {
    use super::*;

    fn message(e: CliError) -> String {
        match e {
            CliError::Input(m) | CliError::NonConvergence(m) => m,
        }
    }

    #[test]
    fn sections_values_and_comments() {
        let c = Config::parse("# top\n[trap]\nDELTA0_HZ = -268 # measured\n\n[grid]\nt_ms = 1, 2.5,4\n", "t").unwrap();
        assert_eq!(c.f64("trap", "delta0_hz").unwrap(), Some(-268.0));
        assert_eq!(c.f64_list("grid", "t_ms").unwrap(), Some(vec![1.0, 2.5, 4.0]));
        assert_eq!(c.f64("trap", "eta").unwrap(), None);
        c.finish().unwrap();
    }

    #[test]
    fn errors_carry_line_numbers() {
        let m = message(Config::parse("[a]\nx = 1\nnonsense\n", "f.cfg").unwrap_err());
        assert!(m.starts_with("f.cfg:3:"), "{m}");
        let m = message(Config::parse("x = 1\n", "f").unwrap_err());
        assert!(m.contains(":1:"), "{m}");
        let m = message(Config::parse("[a]\nx = 1\nx = 2\n", "f").unwrap_err());
        assert!(m.contains(":3:") && m.contains("line 2"), "{m}");
        let c = Config::parse("[a]\nx = 1\ny = abc\n", "f").unwrap();
        assert!(message(c.f64("a", "y").unwrap_err()).contains(":3:"));
    }

    #[test]
    fn unused_keys_are_rejected() {
        let c = Config::parse("[a]\nx = 1\ntypo = 2\n", "f").unwrap();
        c.f64("a", "x").unwrap();
        let m = message(c.finish().unwrap_err());
        assert!(m.contains(":3:") && m.contains("typo"), "{m}");
    }

    #[test]
    fn exactly_one_alternative() {
        let both = Config::parse("[s]\ndelta_b_hz = 412\nb_field_ut = 97.9\n", "f").unwrap();
        assert!(both.one_of("s", "delta_b_hz", "b_field_ut").is_err());
        let none = Config::parse("[s]\nother = 1\n", "f").unwrap();
        assert!(none.one_of("s", "delta_b_hz", "b_field_ut").is_err());
        let one = Config::parse("[s]\nb_field_ut = 97.9\n", "f").unwrap();
        assert_eq!(one.one_of("s", "delta_b_hz", "b_field_ut").unwrap(), Either::Second(97.9));
    }
}
