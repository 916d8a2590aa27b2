//! CSV and summary files.

use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::diagnostics::DiagnosticsSample;
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::model::{density_from_u, signal_gradient_from_u, RadialProfile};

pub const DIAGNOSTICS_FILE: &str = "diagnostics.csv";
pub const PROFILE_FILE: &str = "profile_final.csv";
pub const SUMMARY_FILE: &str = "summary.txt";

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> Error + '_ {
    move |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    }
}

pub fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(io_err(dir))
}

/// Writes serializable rows with a header taken from the field names.
pub fn write_rows<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    for row in rows {
        w.serialize(row).map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

pub fn write_diagnostics(path: &Path, samples: &[DiagnosticsSample]) -> Result<()> {
    write_rows(path, samples)
}

#[derive(Debug, Serialize)]
struct ProfileRow {
    xi: f64,
    #[serde(rename = "U")]
    u_acc: f64,
    u: f64,
    neg_v_r: f64,
}

/// Final profile: `xi, U, u, neg_v_r` at every node.
pub fn write_profile(path: &Path, grid: &Grid, u: &[f64]) -> Result<()> {
    let density = density_from_u(u, grid, grid.n_dim())?;
    let gradient = signal_gradient_from_u(u, grid, grid.n_dim())?;
    let rows: Vec<ProfileRow> = grid
        .nodes()
        .iter()
        .enumerate()
        .map(|(i, &xi)| ProfileRow {
            xi,
            u_acc: u[i],
            u: density.values()[i],
            neg_v_r: gradient.values()[i],
        })
        .collect();
    write_rows(path, &rows)
}

/// `key: value` lines in the given order.
pub fn write_summary(path: &Path, entries: &[(String, String)]) -> Result<()> {
    let mut text = String::new();
    for (k, v) in entries {
        text.push_str(k);
        text.push_str(": ");
        text.push_str(v);
        text.push('\n');
    }
    fs::write(path, text).map_err(io_err(path))
}

/// Parses `key: value` lines.
pub fn read_summary(path: &Path) -> Result<Vec<(String, String)>> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    Ok(text
        .lines()
        .filter_map(|l| l.split_once(": "))
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect())
}

/// Profile read from a table file.
#[derive(Debug, Clone, PartialEq)]
pub enum TableProfile {
    /// Accumulated density against `xi`.
    Accumulated { xi: Vec<f64>, u: Vec<f64> },
    /// Cell density against radius.
    Density(RadialProfile),
}

pub fn read_table(path: &Path) -> Result<TableProfile> {
    let mut rdr = csv::Reader::from_path(path).map_err(csv_err(path))?;
    let headers = rdr.headers().map_err(csv_err(path))?.clone();
    let col = |name: &str| headers.iter().position(|h| h.trim() == name);
    let (a, b, accumulated) = match (col("xi"), col("U"), col("r"), col("u")) {
        (Some(x), Some(u), _, _) => (x, u, true),
        (_, _, Some(r), Some(u)) => (r, u, false),
        _ => {
            return Err(Error::Config(format!(
                "{}: table needs columns `xi, U` or `r, u`",
                path.display()
            )))
        }
    };
    let mut first = Vec::new();
    let mut second = Vec::new();
    for (line, record) in rdr.records().enumerate() {
        let record = record.map_err(csv_err(path))?;
        let parse = |k: usize| -> Result<f64> {
            let field = record.get(k).unwrap_or("").trim();
            field.parse().map_err(|_| {
                Error::Config(format!(
                    "{}: row {}: cannot parse `{field}` as a number",
                    path.display(),
                    line + 2
                ))
            })
        };
        first.push(parse(a)?);
        second.push(parse(b)?);
    }
    if accumulated {
        if first.len() < 2 || first.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Config(format!(
                "{}: `xi` must have at least two strictly increasing values",
                path.display()
            )));
        }
        Ok(TableProfile::Accumulated {
            xi: first,
            u: second,
        })
    } else {
        Ok(TableProfile::Density(RadialProfile::new(first, second)?))
    }
}
