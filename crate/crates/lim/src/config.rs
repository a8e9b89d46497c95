//! Flat key=value config files for the CLI.
//!
//! One `key = value` pair per line; `#` starts a comment; blank lines are
//! ignored. Keys are case-insensitive and `-`/`_` are interchangeable.
//! Command-line flags always override file values.

use std::collections::HashMap;
use std::path::Path;

use crate::error::{Error, Result};

/// Keys the CLI understands.
pub const KNOWN_KEYS: &[&str] = &[
    "problem",
    "method",
    "s",
    "k",
    "h",
    "tfinal",
    "solver",
    "tol",
    "max_iter",
    "record_every",
    "out",
    "seed",
    "constant_b",
];

pub fn normalize_key(key: &str) -> String {
    key.trim().to_ascii_lowercase().replace('-', "_")
}

/// Parse config text into a normalized key → value map.
pub fn parse_config_str(text: &str) -> Result<HashMap<String, String>> {
    let mut map = HashMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::Config(format!(
                "line {}: expected `key = value`, got `{raw}`",
                lineno + 1
            ))
        })?;
        let key = normalize_key(key);
        if !KNOWN_KEYS.contains(&key.as_str()) {
            return Err(Error::Config(format!(
                "line {}: unknown key `{key}` (known keys: {})",
                lineno + 1,
                KNOWN_KEYS.join(", ")
            )));
        }
        map.insert(key, value.trim().to_string());
    }
    Ok(map)
}

pub fn parse_config_file(path: &Path) -> Result<HashMap<String, String>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    parse_config_str(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_pairs_comments_and_blank_lines() {
        let text = "\
# experiment setup
problem = ex1
method=lim
s = 2
h = 0.01   # step size
tfinal = 100
";
        let map = parse_config_str(text).unwrap();
        assert_eq!(map["problem"], "ex1");
        assert_eq!(map["method"], "lim");
        assert_eq!(map["s"], "2");
        assert_eq!(map["h"], "0.01");
        assert_eq!(map["tfinal"], "100");
    }

    #[test]
    fn dashes_and_case_normalize() {
        let map = parse_config_str("Max-Iter = 50\nRECORD-EVERY = 10\n").unwrap();
        assert_eq!(map["max_iter"], "50");
        assert_eq!(map["record_every"], "10");
    }

    #[test]
    fn unknown_keys_and_malformed_lines_are_rejected() {
        assert!(parse_config_str("bogus = 1\n").is_err());
        assert!(parse_config_str("problem ex1\n").is_err());
    }
}
