//! Reading observation files and writing outputs.

use std::fs;
use std::path::Path;

use ggn::Sample;

use crate::error::{CliError, CliResult};

/// Observations with the 1-based line each came from.
pub struct DataFile {
    pub sample: Sample,
    pub lines: Vec<usize>,
    pub bytes: Vec<u8>,
}

impl DataFile {
    /// First observation outside `accept`, as `(line, value)`.
    pub fn find_outside(&self, accept: impl Fn(f64) -> bool) -> Option<(usize, f64)> {
        self.sample
            .values
            .iter()
            .zip(&self.lines)
            .find(|(v, _)| !accept(**v))
            .map(|(v, l)| (*l, *v))
    }
}

pub fn read_bytes(path: &Path) -> CliResult<Vec<u8>> {
    fs::read(path).map_err(|e| CliError::io(path, e))
}

pub fn write_text(path: &Path, text: &str) -> CliResult<()> {
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

/// Parses one number per line, or a single-column CSV whose first line may
/// be a header. Blank lines and lines starting with `#` are skipped.
pub fn parse_values(path: &Path, text: &str) -> CliResult<(Vec<f64>, Vec<usize>)> {
    let mut values = Vec::new();
    let mut lines = Vec::new();
    let mut seen_content = false;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let field = raw.trim();
        if field.is_empty() || field.starts_with('#') {
            continue;
        }
        let first = !seen_content;
        seen_content = true;
        let cols: Vec<&str> = field.split(',').map(str::trim).collect();
        if cols.len() > 1 && cols[1..].iter().any(|c| !c.is_empty()) {
            return Err(CliError::Parse {
                path: path.to_path_buf(),
                line,
                msg: format!("expected a single column, found {} fields", cols.len()),
            });
        }
        let cell = cols[0].trim_matches('"');
        match cell.parse::<f64>() {
            Ok(v) if v.is_finite() => {
                values.push(v);
                lines.push(line);
            }
            Ok(v) => {
                return Err(CliError::Parse {
                    path: path.to_path_buf(),
                    line,
                    msg: format!("non-finite value {v}"),
                })
            }
            Err(_) if first => {}
            Err(_) => {
                return Err(CliError::Parse {
                    path: path.to_path_buf(),
                    line,
                    msg: format!("cannot parse {cell:?} as a number"),
                })
            }
        }
    }
    if values.is_empty() {
        return Err(CliError::Parse {
            path: path.to_path_buf(),
            line: 0,
            msg: "no observations".into(),
        });
    }
    Ok((values, lines))
}

pub fn read_data(path: &Path) -> CliResult<DataFile> {
    let bytes = read_bytes(path)?;
    let text = String::from_utf8(bytes.clone()).map_err(|e| CliError::Parse {
        path: path.to_path_buf(),
        line: 0,
        msg: format!("not UTF-8: {e}"),
    })?;
    let (values, lines) = parse_values(path, &text)?;
    let sample = Sample::new(values, path.display().to_string())?;
    Ok(DataFile {
        sample,
        lines,
        bytes,
    })
}
