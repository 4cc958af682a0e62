//! Report emission: JSON summaries and CSV tables, written atomically
//! (temp file in the target directory, then rename).  CSV numbers use 12
//! significant digits so reports diff cleanly.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;

use gamehedge::Result;

/// Format a number with 12 significant digits.
pub fn sig12(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    format!("{v:.11e}")
}

/// Atomically write bytes to `dir/name`.
pub fn write_atomic(dir: &Path, name: &str, contents: &str) -> Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let target = dir.join(name);
    let tmp = dir.join(format!(".{name}.tmp"));
    std::fs::write(&tmp, contents)?;
    std::fs::rename(&tmp, &target)?;
    Ok(target)
}

/// Serialize a JSON report with the resolved configuration embedded.
pub fn write_json<T: Serialize>(dir: &Path, name: &str, report: &T) -> Result<PathBuf> {
    let text = serde_json::to_string_pretty(report)
        .map_err(|e| gamehedge::Error::Parse(e.to_string()))?;
    write_atomic(dir, name, &format!("{text}\n"))
}

/// Build a CSV table from a header and rows of formatted cells.
pub fn csv_table(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{}", header.join(","));
    for row in rows {
        let _ = writeln!(out, "{}", row.join(","));
    }
    out
}
