//! Flat `key=value` configuration files.
//!
//! Keys are long flag names without the leading dashes. Values from the
//! file are spliced in front of the command-line flags, so a flag given on
//! the command line wins over the same key in the file.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};

/// Parses `key=value` lines; blank lines and lines starting with `#` are
/// skipped.
pub fn parse_config(text: &str, origin: &Path) -> Result<Vec<(String, String)>> {
    let mut pairs: Vec<(String, String)> = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            bail!("{}:{}: expected key=value, got `{line}`", origin.display(), n + 1);
        };
        let key = key.trim();
        if key.is_empty() || key == "config" {
            bail!("{}:{}: invalid key `{key}`", origin.display(), n + 1);
        }
        if pairs.iter().any(|(k, _)| k == key) {
            bail!("{}:{}: duplicate key `{key}`", origin.display(), n + 1);
        }
        pairs.push((key.to_string(), value.trim().to_string()));
    }
    Ok(pairs)
}

pub fn read_config(path: &Path) -> Result<Vec<(String, String)>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    parse_config(&text, path)
}

pub fn render_config(pairs: &[(&str, String)]) -> String {
    pairs.iter().map(|(k, v)| format!("{k}={v}\n")).collect()
}

/// The `--config` path among the arguments, if any.
pub fn config_path(args: &[OsString]) -> Option<PathBuf> {
    let mut iter = args.iter();
    while let Some(arg) = iter.next() {
        let s = arg.to_string_lossy();
        if s == "--config" {
            return iter.next().map(PathBuf::from);
        }
        if let Some(path) = s.strip_prefix("--config=") {
            return Some(PathBuf::from(path));
        }
    }
    None
}

/// Inserts the file's settings right after the subcommand name.
/// `known` lists the long flags the subcommand accepts.
pub fn splice_config(args: &[OsString], pairs: &[(String, String)], known: &[String], origin: &Path) -> Result<Vec<OsString>> {
    if args.len() < 2 {
        return Ok(args.to_vec());
    }
    let mut out = args[..2].to_vec();
    for (key, value) in pairs {
        if !known.iter().any(|k| k == key) {
            bail!("{}: unknown key `{key}`", origin.display());
        }
        out.push(OsString::from(format!("--{key}={value}")));
    }
    out.extend_from_slice(&args[2..]);
    Ok(out)
}
