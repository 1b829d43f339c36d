use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Where a run writes, and the provenance stamped on every file.
pub struct Sink {
    pub dir: PathBuf,
    pub config_hash: String,
}

impl Sink {
    pub fn new(dir: &Path, config_hash: String) -> Result<Self> {
        std::fs::create_dir_all(dir).with_context(|| format!("creating output directory {}", dir.display()))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            config_hash,
        })
    }

    pub fn stamp(&self) -> String {
        format!("# cac {VERSION} config_sha256={}", self.config_hash)
    }

    /// A CSV whose first line is the provenance comment, then `extra` comment
    /// lines, then the header row.
    pub fn csv(&self, name: &str, extra: &[&str], header: &[&str]) -> Result<csv::Writer<BufWriter<File>>> {
        let path = self.dir.join(name);
        let file = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
        let mut out = BufWriter::new(file);
        writeln!(out, "{}", self.stamp())?;
        for line in extra {
            writeln!(out, "# {line}")?;
        }
        let mut w = csv::Writer::from_writer(out);
        w.write_record(header)?;
        Ok(w)
    }

    pub fn json<T: serde::Serialize>(&self, name: &str, value: &T) -> Result<PathBuf> {
        let path = self.dir.join(name);
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }
}

/// File-name-safe form of a contour label.
pub fn slug(label: &str) -> String {
    let mut s: String = label
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '.' || c == '-' { c } else { '_' })
        .collect();
    while s.contains("__") {
        s = s.replace("__", "_");
    }
    s.trim_matches('_').to_string()
}

pub fn e(v: f64) -> String {
    format!("{v:.12e}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slugs() {
        assert_eq!(slug("conductive(sigma=100)"), "conductive_sigma_100");
        assert_eq!(slug("wick"), "wick");
    }

    #[test]
    fn csv_starts_with_stamp() {
        let dir = tempfile::tempdir().unwrap();
        let sink = Sink::new(dir.path(), "abc".into()).unwrap();
        let mut w = sink.csv("t.csv", &["note"], &["a", "b"]).unwrap();
        w.write_record(["1", "2"]).unwrap();
        drop(w);
        let text = std::fs::read_to_string(dir.path().join("t.csv")).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], format!("# cac {VERSION} config_sha256=abc"));
        assert_eq!(lines[1..], ["# note", "a,b", "1,2"]);
    }
}
