//! `key = value` configuration files.
//!
//! Each non-empty line that does not start with `#` names a long flag of
//! the subcommand. The resulting flags are placed ahead of the command-line
//! flags, and since later occurrences win, the command line takes
//! precedence. `true` turns a switch on, `false` leaves it off.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::CliError;

pub fn parse(path: &Path, text: &str) -> Result<Vec<OsString>, CliError> {
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(CliError::Config {
                path: path.to_path_buf(),
                line: idx + 1,
                msg: format!("expected key = value, got {line:?}"),
            });
        };
        let key = key.trim().replace('_', "-");
        let value = value.trim();
        if key.is_empty() || key == "config" {
            return Err(CliError::Config {
                path: path.to_path_buf(),
                line: idx + 1,
                msg: format!("invalid key {key:?}"),
            });
        }
        match value {
            "true" => out.push(format!("--{key}").into()),
            "false" => {}
            _ => out.push(format!("--{key}={value}").into()),
        }
    }
    Ok(out)
}

/// Finds `--config FILE` (or `--config=FILE`) after the subcommand.
fn config_path(args: &[OsString]) -> Option<PathBuf> {
    let mut it = args.iter();
    while let Some(a) = it.next() {
        let s = a.to_string_lossy();
        if s == "--config" {
            return it.next().map(PathBuf::from);
        }
        if let Some(p) = s.strip_prefix("--config=") {
            return Some(PathBuf::from(p));
        }
    }
    None
}

/// Splices the flags from a `--config` file right after the subcommand.
pub fn expand(args: Vec<OsString>) -> Result<Vec<OsString>, CliError> {
    let Some(path) = config_path(&args) else {
        return Ok(args);
    };
    let text = fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
    let extra = parse(&path, &text)?;
    // args[0] is the program, args[1] the subcommand
    if args.len() < 2 {
        return Ok(args);
    }
    let mut out = args[..2].to_vec();
    out.extend(extra);
    out.extend_from_slice(&args[2..]);
    Ok(out)
}
