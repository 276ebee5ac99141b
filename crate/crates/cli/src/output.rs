//! Output plumbing: atomic file writes (temp + rename in the target
//! directory) and a small CSV builder with a fixed column count.

use std::io::Write;
use std::path::{Path, PathBuf};

use crate::CliError;

/// Write `content` to `dir/name` atomically: the bytes land in a
/// temporary file in the same directory and are renamed into place, so a
/// crash never leaves a half-written output.
pub fn write_atomic(dir: &Path, name: &str, content: &str) -> Result<PathBuf, CliError> {
    std::fs::create_dir_all(dir).map_err(|e| {
        CliError::Config(format!("output directory {}: {e}", dir.display()))
    })?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)
        .map_err(|e| CliError::Config(format!("temporary file in {}: {e}", dir.display())))?;
    tmp.write_all(content.as_bytes())
        .map_err(|e| CliError::Config(format!("writing {name}: {e}")))?;
    let path = dir.join(name);
    tmp.persist(&path)
        .map_err(|e| CliError::Config(format!("renaming into {}: {e}", path.display())))?;
    Ok(path)
}

/// CSV table with a header row; every row must match the header width.
pub struct Csv {
    buf: String,
    cols: usize,
}

/// Format a float with the shortest round-trip representation; stable
/// across runs, so identical data yields byte-identical files.
pub fn num(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{v}")
    }
}

/// Quote a free-text CSV field when it needs it.
pub fn text(s: &str) -> String {
    if s.contains(',') || s.contains('"') || s.contains('\n') {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

impl Csv {
    pub fn new(header: &[&str]) -> Self {
        let mut buf = header.join(",");
        buf.push('\n');
        Self {
            buf,
            cols: header.len(),
        }
    }

    /// Append a row of already-formatted fields.
    pub fn row(&mut self, fields: &[String]) {
        assert_eq!(fields.len(), self.cols, "CSV row width mismatch");
        self.buf.push_str(&fields.join(","));
        self.buf.push('\n');
    }

    /// Append a row of numbers.
    pub fn num_row(&mut self, values: &[f64]) {
        let fields: Vec<String> = values.iter().map(|&v| num(v)).collect();
        self.row(&fields);
    }

    pub fn finish(self) -> String {
        self.buf
    }
}
