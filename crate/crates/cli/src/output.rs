//! Atomic file output: every file is written to a sibling temp file and
//! renamed into place.

use std::io::Write;
use std::path::Path;

use anyhow::Context;

fn temp_in(path: &Path) -> anyhow::Result<tempfile::NamedTempFile> {
    let parent = path.parent().unwrap_or(Path::new("."));
    std::fs::create_dir_all(parent)
        .with_context(|| format!("cannot create directory {}", parent.display()))?;
    tempfile::Builder::new()
        .prefix(".sqeeg-")
        .tempfile_in(parent)
        .with_context(|| format!("cannot create temp file in {}", parent.display()))
}

pub fn write_atomic(path: &Path, bytes: &[u8]) -> anyhow::Result<()> {
    let mut tmp = temp_in(path)?;
    tmp.write_all(bytes)
        .with_context(|| format!("cannot write {}", path.display()))?;
    tmp.persist(path)
        .with_context(|| format!("cannot move output into {}", path.display()))?;
    Ok(())
}

/// Let `write` fill a temp file by path, then rename it to `path`.
pub fn write_atomic_with(
    path: &Path,
    write: impl FnOnce(&Path) -> sqeeg_core::Result<()>,
) -> anyhow::Result<()> {
    let tmp = temp_in(path)?;
    write(tmp.path())?;
    tmp.persist(path)
        .with_context(|| format!("cannot move output into {}", path.display()))?;
    Ok(())
}

pub fn csv_string<I, R>(header: &[&str], rows: I) -> anyhow::Result<String>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator,
    R::Item: AsRef<[u8]>,
{
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}
