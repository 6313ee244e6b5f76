//! Line-delimited JSON helpers shared by the session, reference and
//! transcript formats.

use std::io::{BufRead, Write};

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};

/// Reads one record per non-blank line, returning each with its 1-based line number.
pub(crate) fn read_records<D, R>(reader: R) -> Result<Vec<(usize, D)>>
where
    D: DeserializeOwned,
    R: BufRead,
{
    let mut records = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let record =
            serde_json::from_str(&line).map_err(|e| Error::parse(lineno, e.to_string()))?;
        records.push((lineno, record));
    }
    Ok(records)
}

pub(crate) fn write_record<S: Serialize, W: Write>(writer: &mut W, record: &S) -> Result<()> {
    serde_json::to_writer(&mut *writer, record).map_err(std::io::Error::from)?;
    writer.write_all(b"\n")?;
    Ok(())
}
