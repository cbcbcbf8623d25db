//! `key = value` config files.
//!
//! Entries become `--key value` flags spliced in right after the subcommand
//! name, ahead of everything the user typed. Every option overrides earlier
//! occurrences of itself, so for any option the precedence is
//!
//! 1. command-line flag,
//! 2. config file entry,
//! 3. built-in default.
//!
//! Keys that the chosen subcommand does not know are skipped, which lets one
//! file serve several subcommands (`seed = 7` applies to all that take one).

use std::path::Path;

use anyhow::{bail, Context, Result};
use clap::{ArgAction, Command};

/// Options that live on the top-level command rather than a subcommand.
const GLOBAL_WITH_VALUE: &[&str] = &["--config", "--log-level"];

#[derive(Debug, PartialEq)]
pub struct Entry {
    pub key: String,
    pub value: String,
    pub line: usize,
}

pub fn parse(text: &str) -> Result<Vec<Entry>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            bail!("line {}: expected `key = value`, got {raw:?}", i + 1);
        };
        let key = key.trim().replace('_', "-");
        if key.is_empty() {
            bail!("line {}: empty key", i + 1);
        }
        let value = value.trim();
        let value = value
            .strip_prefix('"')
            .and_then(|v| v.strip_suffix('"'))
            .unwrap_or(value);
        out.push(Entry {
            key,
            value: value.to_string(),
            line: i + 1,
        });
    }
    Ok(out)
}

/// Value of `--config` in `args`, if any.
pub fn config_path(args: &[String]) -> Option<String> {
    let mut it = args.iter().skip(1);
    while let Some(a) = it.next() {
        if a == "--config" {
            return it.next().cloned();
        }
        if let Some(v) = a.strip_prefix("--config=") {
            return Some(v.to_string());
        }
    }
    None
}

/// Index of the subcommand name in `args`.
fn subcommand_index(args: &[String]) -> Option<usize> {
    let mut i = 1;
    while i < args.len() {
        let a = &args[i];
        if GLOBAL_WITH_VALUE.contains(&a.as_str()) {
            i += 2;
            continue;
        }
        if !a.starts_with('-') {
            return Some(i);
        }
        i += 1;
    }
    None
}

/// Returns `args` with the file's entries inserted as flags after the
/// subcommand name.
pub fn inject(cmd: &Command, args: Vec<String>, path: &Path) -> Result<Vec<String>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    let entries = parse(&text).with_context(|| format!("parsing config {}", path.display()))?;
    let Some(pos) = subcommand_index(&args) else {
        return Ok(args);
    };
    let Some(sub) = cmd.find_subcommand(&args[pos]) else {
        return Ok(args);
    };
    let mut flags = Vec::new();
    for e in entries {
        let Some(arg) = sub.get_arguments().find(|a| a.get_long() == Some(e.key.as_str())) else {
            log::debug!("config line {}: `{}` does not apply to `{}`", e.line, e.key, args[pos]);
            continue;
        };
        match arg.get_action() {
            ArgAction::SetTrue => match e.value.as_str() {
                "true" | "yes" | "1" => flags.push(format!("--{}", e.key)),
                "false" | "no" | "0" => {}
                other => bail!("config line {}: `{}` expects true or false, got {other:?}", e.line, e.key),
            },
            _ => flags.push(format!("--{}={}", e.key, e.value)),
        }
    }
    let mut out = args;
    out.splice(pos + 1..pos + 1, flags);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_quotes_and_underscores() {
        let e = parse("# header\nseed = 7  # trailing\n\nsave_stage1 = \"a b.png\"\n").unwrap();
        assert_eq!(e.len(), 2);
        assert_eq!((e[0].key.as_str(), e[0].value.as_str()), ("seed", "7"));
        assert_eq!((e[1].key.as_str(), e[1].value.as_str()), ("save-stage1", "a b.png"));
        assert!(parse("no equals sign").is_err());
    }

    #[test]
    fn finds_subcommand_past_global_options() {
        let args: Vec<String> = ["odis", "--config", "c.txt", "--log-level", "debug", "mask", "--seed", "3"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        assert_eq!(subcommand_index(&args), Some(5));
        assert_eq!(config_path(&args).as_deref(), Some("c.txt"));
    }
}
