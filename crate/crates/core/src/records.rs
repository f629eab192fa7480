//! Line-delimited JSON files with a leading provenance header.
//!
//! Every file written by the pipeline starts with one header record
//! (`"kind": "header"`) naming the tool, its version, the global seed and the
//! file's content type. Readers accept files with or without a header.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};

pub const TOOL_NAME: &str = env!("CARGO_PKG_NAME");
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Header {
    pub kind: String,
    pub tool: String,
    pub version: String,
    pub seed: u64,
    pub content: String,
}

impl Header {
    pub fn new(content: &str, seed: u64) -> Self {
        Header {
            kind: "header".into(),
            tool: TOOL_NAME.into(),
            version: TOOL_VERSION.into(),
            seed,
            content: content.into(),
        }
    }
}

/// Writes `records` after `header`, atomically replacing `path`.
pub fn write_jsonl<T: Serialize>(
    path: &Path,
    header: Option<&Header>,
    records: &[T],
) -> Result<()> {
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    {
        let mut out = BufWriter::new(tmp.as_file());
        let io = |e| Error::io(path, e);
        if let Some(h) = header {
            serde_json::to_writer(&mut out, h)?;
            out.write_all(b"\n").map_err(io)?;
        }
        for r in records {
            serde_json::to_writer(&mut out, r)?;
            out.write_all(b"\n").map_err(io)?;
        }
        out.flush().map_err(io)?;
    }
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

fn is_header(value: &Value) -> bool {
    value.get("kind").and_then(Value::as_str) == Some("header")
}

/// Reads every record of a line-delimited file, returning the header if the
/// first line is one. A malformed line is a hard error naming its index.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<(Option<Header>, Vec<T>)> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut header = None;
    let mut records = Vec::new();
    for (index, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let schema = |e: serde_json::Error| Error::Schema {
            path: path.to_owned(),
            index,
            message: e.to_string(),
        };
        let value: Value = serde_json::from_str(&line).map_err(schema)?;
        if index == 0 && is_header(&value) {
            header = Some(serde_json::from_value(value).map_err(schema)?);
            continue;
        }
        records.push(serde_json::from_value(value).map_err(schema)?);
    }
    Ok((header, records))
}
