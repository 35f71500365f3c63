use std::env;
use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::CliError;

pub const OUT_DIR_VAR: &str = "OBMSTOP_OUT_DIR";

/// Relative output paths are taken relative to `$OBMSTOP_OUT_DIR` when it
/// is set.
pub fn resolve_path(path: &Path) -> PathBuf {
    match env::var_os(OUT_DIR_VAR) {
        Some(dir) if path.is_relative() && !dir.is_empty() => PathBuf::from(dir).join(path),
        _ => path.to_path_buf(),
    }
}

pub struct Sink {
    path: Option<PathBuf>,
    inner: Box<dyn Write>,
}

impl Sink {
    /// A file when `out` is given, standard output otherwise. Missing
    /// parent directories are created.
    pub fn open(out: Option<&Path>) -> Result<Self, CliError> {
        let Some(out) = out else {
            return Ok(Sink {
                path: None,
                inner: Box::new(BufWriter::new(io::stdout().lock())),
            });
        };
        let path = resolve_path(out);
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
        }
        let file = File::create(&path).map_err(|e| CliError::io(&path, e))?;
        Ok(Sink {
            path: Some(path),
            inner: Box::new(BufWriter::new(file)),
        })
    }

    fn err(&self, e: io::Error) -> CliError {
        CliError::io(self.path.clone().unwrap_or_else(|| "<stdout>".into()), e)
    }

    pub fn json<T: Serialize>(mut self, value: &T) -> Result<(), CliError> {
        serde_json::to_writer_pretty(&mut self.inner, value).map_err(|e| self.err(e.into()))?;
        writeln!(self.inner).map_err(|e| self.err(e))?;
        self.finish()
    }

    /// Runs `f` against the writer and flushes.
    pub fn with<F>(mut self, f: F) -> Result<(), CliError>
    where
        F: FnOnce(&mut dyn Write) -> io::Result<()>,
    {
        f(&mut self.inner).map_err(|e| self.err(e))?;
        self.finish()
    }

    fn finish(mut self) -> Result<(), CliError> {
        self.inner.flush().map_err(|e| self.err(e))
    }
}

/// 17 significant digits; empty for a missing value.
pub fn num(x: Option<f64>) -> String {
    match x {
        Some(v) => format!("{v:.16e}"),
        None => String::new(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_round_trip() {
        for x in [0.1, -2.5, 1.0 / 3.0, 1e-300, 123456.789] {
            let s = num(Some(x));
            assert_eq!(s.parse::<f64>().unwrap(), x);
        }
        assert_eq!(num(None), "");
    }
}
