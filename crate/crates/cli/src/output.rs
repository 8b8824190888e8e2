//! Atomic file output. Every file is written to a temporary sibling and
//! renamed into place, so readers never see a partial file.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use spacedeform::Location;
use tempfile::NamedTempFile;

use crate::error::{CliResult, Context};

pub fn write_atomic(path: &Path, fill: impl FnOnce(&mut dyn Write) -> CliResult<()>) -> CliResult<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d.to_path_buf(),
        _ => PathBuf::from("."),
    };
    fs::create_dir_all(&dir).context(format!("creating {}", dir.display()))?;
    let tmp = NamedTempFile::new_in(&dir).context(format!("creating a temporary file in {}", dir.display()))?;
    {
        let mut w = BufWriter::new(tmp.as_file());
        fill(&mut w)?;
        w.flush().context(format!("writing {}", path.display()))?;
    }
    tmp.as_file().sync_all().context(format!("syncing {}", path.display()))?;
    tmp.persist(path)
        .map_err(|e| e.error)
        .context(format!("moving output into {}", path.display()))?;
    Ok(())
}

pub fn write_text(path: &Path, text: &str) -> CliResult<()> {
    write_atomic(path, |w| w.write_all(text.as_bytes()).context(format!("writing {}", path.display())))
}

pub fn write_json(path: &Path, value: &impl Serialize) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_text(path, &text)
}

/// Shortest representation that parses back to the same `f64`.
pub fn num(v: f64) -> String {
    format!("{v}")
}

pub fn coord_header(prefix: &[&str], dim: usize) -> Vec<String> {
    prefix[..dim].iter().map(|s| s.to_string()).collect()
}

pub fn coords(loc: &Location) -> impl Iterator<Item = String> + '_ {
    loc.coords().iter().map(|&v| num(v))
}

/// Writes a CSV table from a header and string rows.
pub fn write_csv(path: &Path, header: &[String], rows: impl IntoIterator<Item = Vec<String>>) -> CliResult<()> {
    write_atomic(path, |w| {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(header)?;
        for row in rows {
            out.write_record(&row)?;
        }
        out.flush().context(format!("writing {}", path.display()))?;
        Ok(())
    })
}
