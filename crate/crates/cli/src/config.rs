//! `key = value` config files, spliced into the argument list so that every
//! flag can come from a file and explicit flags still win.
//!
//! ```text
//! # applies to every subcommand
//! seed = 7
//!
//! [solve]
//! scheme = max-ent
//! ten-vote = true
//! ```

use std::ffi::OsString;
use std::path::Path;

use anyhow::{bail, Context, Result};

/// Parses a config file into `(section, key, value)` triples. Keys outside
/// any section have an empty section name; `_` in keys becomes `-`.
pub fn parse(text: &str) -> Result<Vec<(String, String, String)>> {
    let mut section = String::new();
    let mut out = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[') {
            let Some(name) = name.strip_suffix(']') else {
                bail!("line {}: unterminated section header", n + 1);
            };
            section = name.trim().to_string();
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            bail!("line {}: expected `key = value`", n + 1);
        };
        let key = key.trim().replace('_', "-");
        if key.is_empty() || key.starts_with('-') {
            bail!("line {}: bad key `{}`", n + 1, key);
        }
        out.push((section.clone(), key, value.trim().to_string()));
    }
    Ok(out)
}

/// Removes `--config <file>` from `args` and inserts the file's entries for
/// the invoked subcommand right after its name.
pub fn expand(args: Vec<OsString>, subcommands: &[&str]) -> Result<Vec<OsString>> {
    let mut path = None;
    let mut rest = Vec::with_capacity(args.len());
    let mut it = args.into_iter();
    while let Some(a) = it.next() {
        match a.to_str() {
            Some("--config") => {
                path = Some(it.next().context("--config needs a file argument")?);
            }
            Some(s) if s.starts_with("--config=") => path = Some(OsString::from(&s["--config=".len()..])),
            _ => rest.push(a),
        }
    }
    let Some(path) = path else {
        return Ok(rest);
    };
    let file = Path::new(&path);
    let text = std::fs::read_to_string(file).with_context(|| format!("reading config {}", file.display()))?;
    let entries = parse(&text).with_context(|| format!("in config {}", file.display()))?;
    let Some(pos) = rest.iter().position(|a| a.to_str().is_some_and(|s| subcommands.contains(&s))) else {
        return Ok(rest);
    };
    let command = rest[pos].to_string_lossy().into_owned();
    let mut injected = Vec::new();
    for (section, key, value) in entries {
        if !(section.is_empty() || section == command) {
            continue;
        }
        match value.as_str() {
            "true" => injected.push(format!("--{key}").into()),
            "false" => {}
            _ => {
                injected.push(format!("--{key}").into());
                injected.push(value.into());
            }
        }
    }
    rest.splice(pos + 1..pos + 1, injected);
    Ok(rest)
}
