//! `key = value` job files.
//!
//! A config file supplies default flags for one subcommand. Each line is
//! `key = value`; `#` starts a comment. Keys are flag names without the
//! leading dashes. A key may repeat for flags that accept several values.
//! `true` turns a switch on and `false` leaves it off. Flags given on the
//! command line override the file.

use std::ffi::OsString;
use std::path::Path;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ConfigError {
    #[error("{path}:{line}: {reason}")]
    Syntax { path: String, line: usize, reason: String },
    #[error("cannot read {path}: {reason}")]
    Io { path: String, reason: String },
}

pub fn parse_config(text: &str, path: &str) -> Result<Vec<(String, String)>, ConfigError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |reason: &str| ConfigError::Syntax { path: path.to_string(), line: i + 1, reason: reason.to_string() };
        let (key, value) = line.split_once('=').ok_or_else(|| err("expected key = value"))?;
        let (key, value) = (key.trim(), value.trim());
        if key.is_empty() || !key.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'-' || b == b'_') {
            return Err(err("keys are letters, digits, '-' and '_'"));
        }
        if key == "config" {
            return Err(err("config files do not nest"));
        }
        out.push((key.replace('_', "-"), value.to_string()));
    }
    Ok(out)
}

fn to_flags(pairs: Vec<(String, String)>) -> Vec<OsString> {
    let mut out = Vec::new();
    for (key, value) in pairs {
        match value.as_str() {
            "true" => out.push(format!("--{key}").into()),
            "false" => {}
            _ => out.push(format!("--{key}={value}").into()),
        }
    }
    out
}

/// Replaces `--config FILE` in `args` with the file's flags, placed right
/// after the subcommand so later command-line flags win.
pub fn expand_config_args(args: Vec<OsString>) -> Result<Vec<OsString>, ConfigError> {
    let mut path = None;
    let mut rest = Vec::with_capacity(args.len());
    let mut it = args.into_iter();
    while let Some(a) = it.next() {
        let s = a.to_string_lossy();
        if s == "--config" {
            path = it.next();
        } else if let Some(p) = s.strip_prefix("--config=") {
            path = Some(p.into());
        } else {
            rest.push(a);
        }
    }
    let Some(path) = path else { return Ok(rest) };
    let shown = Path::new(&path).display().to_string();
    let text = std::fs::read_to_string(&path).map_err(|e| ConfigError::Io { path: shown.clone(), reason: e.to_string() })?;
    let flags = to_flags(parse_config(&text, &shown)?);
    // argv[0], then the subcommand, then the file's flags.
    let split = rest.len().min(2);
    let tail = rest.split_off(split);
    rest.extend(flags);
    rest.extend(tail);
    Ok(rest)
}
