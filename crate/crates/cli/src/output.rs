//! Versioned CSV and JSON writers.
//!
//! Every CSV starts with one `# schema: <name> v<N>` line, then a header row.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use crate::CliError;

pub const ROUNDS: &str = "fedhdc-rounds v1";
pub const POINTS: &str = "fedhdc-points v1";
pub const FIT_CURVE: &str = "fedhdc-fit-curve v1";
pub const TRACE: &str = "fedhdc-trace v1";
pub const SWEEP: &str = "fedhdc-sweep v1";
pub const GROUPS: &str = "fedhdc-groups v1";
pub const CERTIFY: &str = "fedhdc-certify v1";

pub type CsvOut = csv::Writer<BufWriter<File>>;

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

pub fn csv_create(path: &Path, schema: &str) -> Result<CsvOut, CliError> {
    let mut w = BufWriter::new(File::create(path).map_err(|e| io_err(path, e))?);
    writeln!(w, "# schema: {schema}").map_err(|e| io_err(path, e))?;
    Ok(csv::Writer::from_writer(w))
}

pub fn csv_row<T: Serialize>(w: &mut CsvOut, row: &T) -> Result<(), CliError> {
    w.serialize(row).map_err(|e| CliError::Io(e.to_string()))
}

pub fn csv_finish(mut w: CsvOut) -> Result<(), CliError> {
    w.flush().map_err(|e| CliError::Io(e.to_string()))
}

pub fn write_csv<T: Serialize>(path: &Path, schema: &str, rows: &[T]) -> Result<(), CliError> {
    let mut w = csv_create(path, schema)?;
    for r in rows {
        csv_row(&mut w, r)?;
    }
    csv_finish(w)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Io(e.to_string()))?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| io_err(path, e))
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

/// Rows of a CSV written by [`write_csv`] (the schema line is skipped).
pub fn read_csv<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>, CliError> {
    let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_path(path).map_err(|e| io_err(path, e))?;
    r.deserialize().collect::<Result<Vec<T>, _>>().map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}
