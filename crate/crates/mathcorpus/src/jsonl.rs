//! JSON Lines persistence for inter-stage document stores and reports.
//!
//! Writers are atomic (write to `<path>.tmp`, fsync, rename) so an
//! interrupted stage never leaves a half-written store that a resumed run
//! would mistake for complete output.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;

#[derive(Debug, thiserror::Error)]
pub enum JsonlError {
    #[error("i/o error on {0}: {1}")]
    Io(PathBuf, std::io::Error),
    #[error("bad JSON at {path}:{line}: {source}")]
    BadLine {
        path: PathBuf,
        line: usize,
        source: serde_json::Error,
    },
}

/// Serialize `items` one per line, atomically replacing `path`.
pub fn write_jsonl<T, I>(path: &Path, items: I) -> Result<(), JsonlError>
where
    T: Serialize,
    I: IntoIterator<Item = T>,
{
    let tmp = tmp_path(path);
    let io_err = |p: &Path| {
        let p = p.to_path_buf();
        move |e: std::io::Error| JsonlError::Io(p.clone(), e)
    };
    {
        let file = File::create(&tmp).map_err(io_err(&tmp))?;
        let mut out = BufWriter::new(file);
        for item in items {
            let line = serde_json::to_string(&item).map_err(|e| JsonlError::BadLine {
                path: tmp.clone(),
                line: 0,
                source: e,
            })?;
            out.write_all(line.as_bytes()).map_err(io_err(&tmp))?;
            out.write_all(b"\n").map_err(io_err(&tmp))?;
        }
        let file = out.into_inner().map_err(|e| JsonlError::Io(tmp.clone(), e.into_error()))?;
        file.sync_all().map_err(io_err(&tmp))?;
    }
    std::fs::rename(&tmp, path).map_err(io_err(path))?;
    Ok(())
}

fn tmp_path(path: &Path) -> PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(".tmp");
    path.with_file_name(name)
}

/// Read every line of a JSONL file into memory. Blank lines are skipped;
/// malformed lines are errors with their line number.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, JsonlError> {
    stream_jsonl(path)?.collect()
}

/// Iterate a JSONL file without loading it whole.
pub fn stream_jsonl<T: DeserializeOwned>(
    path: &Path,
) -> Result<impl Iterator<Item = Result<T, JsonlError>>, JsonlError> {
    let file = File::open(path).map_err(|e| JsonlError::Io(path.into(), e))?;
    let reader = BufReader::new(file);
    let path = path.to_path_buf();
    Ok(reader
        .lines()
        .enumerate()
        .filter_map(move |(idx, line)| match line {
            Err(e) => Some(Err(JsonlError::Io(path.clone(), e))),
            Ok(l) if l.trim().is_empty() => None,
            Ok(l) => Some(serde_json::from_str(&l).map_err(|e| JsonlError::BadLine {
                path: path.clone(),
                line: idx + 1,
                source: e,
            })),
        }))
}
