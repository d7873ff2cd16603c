//! Matrix CSV and PGM heatmap files.
//!
//! CSV: comma-separated, one row per line, no header. Values are written
//! with the shortest decimal that parses back to the same double.

use std::fs;
use std::path::{Path, PathBuf};

use mvtreelet::Matrix;

use crate::error::{CliError, CliResult};

/// Parses matrix CSV text; `path` is only used in error messages.
pub fn parse_matrix(text: &str, path: &Path) -> CliResult<Matrix> {
    let mut data = Vec::new();
    let mut cols: Option<usize> = None;
    let mut rows = 0;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let mut count = 0;
        for (j, token) in line.split(',').enumerate() {
            let token = token.trim();
            let value: f64 = token.parse().map_err(|_| CliError::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                column: j + 1,
                message: format!("cannot parse `{token}` as a number"),
            })?;
            if !value.is_finite() {
                return Err(CliError::NonFiniteInput {
                    path: path.to_path_buf(),
                    line: i + 1,
                    column: j + 1,
                    token: token.to_string(),
                });
            }
            data.push(value);
            count += 1;
        }
        match cols {
            None => cols = Some(count),
            Some(c) if c != count => {
                return Err(CliError::Parse {
                    path: path.to_path_buf(),
                    line: i + 1,
                    column: count.min(c) + 1,
                    message: format!("row has {count} fields, expected {c}"),
                })
            }
            _ => {}
        }
        rows += 1;
    }
    let cols = cols.ok_or_else(|| CliError::Validation(format!("{} holds no values", path.display())))?;
    Ok(Matrix::new(rows, cols, data)?)
}

pub fn read_matrix(path: &Path) -> CliResult<Matrix> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse_matrix(&text, path)
}

/// CSV text for `m`; fails on an empty matrix.
pub fn render_matrix(m: &Matrix) -> CliResult<String> {
    if m.rows() == 0 || m.cols() == 0 {
        return Err(CliError::Validation("cannot write an empty matrix".into()));
    }
    let mut out = String::with_capacity(m.rows() * m.cols() * 12);
    for r in 0..m.rows() {
        for (c, v) in m.row(r).iter().enumerate() {
            if c > 0 {
                out.push(',');
            }
            // Debug formatting of f64 is the shortest round-trip representation.
            out.push_str(&format!("{v:?}"));
        }
        out.push('\n');
    }
    Ok(out)
}

pub fn write_matrix(path: &Path, m: &Matrix) -> CliResult<()> {
    let text = render_matrix(m)?;
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

/// Binary PGM (P5) bytes, min-max scaled to 0..=255; a constant matrix is mid-gray.
pub fn heatmap_bytes(m: &Matrix) -> CliResult<Vec<u8>> {
    if m.rows() == 0 || m.cols() == 0 {
        return Err(CliError::Validation("cannot draw an empty matrix".into()));
    }
    let values = m.as_slice();
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out = format!("P5\n{} {}\n255\n", m.cols(), m.rows()).into_bytes();
    if hi > lo {
        let span = hi - lo;
        out.extend(values.iter().map(|v| ((v - lo) / span * 255.0).round().clamp(0.0, 255.0) as u8));
    } else {
        out.extend(std::iter::repeat_n(128u8, values.len()));
    }
    Ok(out)
}

pub fn write_heatmap(path: &Path, m: &Matrix) -> CliResult<()> {
    let bytes = heatmap_bytes(m)?;
    fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

/// Expands directories into their `.csv` files (sorted by name); files pass through.
pub fn expand_inputs(paths: &[PathBuf]) -> CliResult<Vec<PathBuf>> {
    let mut out = Vec::new();
    for p in paths {
        if p.is_dir() {
            let mut found: Vec<PathBuf> = fs::read_dir(p)
                .map_err(|e| CliError::io(p, e))?
                .filter_map(|entry| entry.ok().map(|e| e.path()))
                .filter(|f| f.is_file() && f.extension().is_some_and(|x| x == "csv"))
                .collect();
            found.sort();
            if found.is_empty() {
                return Err(CliError::InputNotFound(p.join("*.csv")));
            }
            out.extend(found);
        } else if p.exists() {
            out.push(p.clone());
        } else {
            return Err(CliError::InputNotFound(p.clone()));
        }
    }
    Ok(out)
}
