//! Plain-text file formats.
//!
//! * points: one point per line, comma-separated decimal coordinates, no header
//! * labels: one nonnegative integer per line
//! * edges: `i,j` per line, 0-based, one line per nonzero of the neighborhood
//!   matrix (self loops included)
//! * bases: JSON object `{"ambient_dim", "subspace_dim", "bases"}` where each
//!   basis is a list of its columns
//!
//! Blank lines are skipped. Parse errors report the 1-based line number.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Basis, PointSet};
use crate::metrics::Labeling;
use crate::nsn::NeighborhoodMatrix;

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty())
}

pub fn parse_points(text: &str) -> Result<PointSet> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (line, l) in content_lines(text) {
        let row = l
            .split(',')
            .map(|f| {
                let f = f.trim();
                f.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| parse_err(line, format!("invalid number {f:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        if let Some(first) = rows.first() {
            if row.len() != first.len() {
                return Err(parse_err(
                    line,
                    format!("expected {} columns, found {}", first.len(), row.len()),
                ));
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(parse_err(0, "no points found"));
    }
    PointSet::from_rows(&rows)
}

pub fn format_points(points: &PointSet) -> String {
    let mut out = String::new();
    for y in points.iter() {
        for (c, v) in y.iter().enumerate() {
            if c > 0 {
                out.push(',');
            }
            write!(out, "{v}").unwrap();
        }
        out.push('\n');
    }
    out
}

pub fn read_points(path: impl AsRef<Path>) -> Result<PointSet> {
    parse_points(&std::fs::read_to_string(path)?)
}

pub fn write_points(path: impl AsRef<Path>, points: &PointSet) -> Result<()> {
    Ok(std::fs::write(path, format_points(points))?)
}

pub fn parse_labels(text: &str) -> Result<Labeling> {
    let labels = content_lines(text)
        .map(|(line, l)| {
            l.parse::<usize>()
                .map_err(|_| parse_err(line, format!("invalid label {l:?}")))
        })
        .collect::<Result<Vec<_>>>()?;
    if labels.is_empty() {
        return Err(parse_err(0, "no labels found"));
    }
    Labeling::new(labels)
}

pub fn format_labels(labels: &Labeling) -> String {
    labels.as_slice().iter().map(|l| format!("{l}\n")).collect()
}

pub fn read_labels(path: impl AsRef<Path>) -> Result<Labeling> {
    parse_labels(&std::fs::read_to_string(path)?)
}

pub fn write_labels(path: impl AsRef<Path>, labels: &Labeling) -> Result<()> {
    Ok(std::fs::write(path, format_labels(labels))?)
}

/// Parses an edge list into an `n x n` neighborhood matrix.
pub fn parse_edges(text: &str, n: usize) -> Result<NeighborhoodMatrix> {
    let mut w = NeighborhoodMatrix::empty(n);
    for (line, l) in content_lines(text) {
        let (a, b) = l
            .split_once(',')
            .ok_or_else(|| parse_err(line, "expected `i,j`"))?;
        let idx = |s: &str| {
            s.trim()
                .parse::<usize>()
                .ok()
                .filter(|&v| v < n)
                .ok_or_else(|| parse_err(line, format!("invalid index {:?} for {n} points", s.trim())))
        };
        w.set(idx(a)?, idx(b)?);
    }
    Ok(w)
}

pub fn format_edges(w: &NeighborhoodMatrix) -> String {
    w.edges().iter().map(|(i, j)| format!("{i},{j}\n")).collect()
}

pub fn read_edges(path: impl AsRef<Path>, n: usize) -> Result<NeighborhoodMatrix> {
    parse_edges(&std::fs::read_to_string(path)?, n)
}

pub fn write_edges(path: impl AsRef<Path>, w: &NeighborhoodMatrix) -> Result<()> {
    Ok(std::fs::write(path, format_edges(w))?)
}

#[derive(Serialize, Deserialize)]
struct BasesFile {
    ambient_dim: usize,
    subspace_dim: usize,
    /// `bases[l][c]` is column `c` of basis `l`.
    bases: Vec<Vec<Vec<f64>>>,
}

pub fn bases_to_json(bases: &[Basis]) -> Result<String> {
    let first = bases.first().ok_or(Error::InconsistentBases)?;
    let file = BasesFile {
        ambient_dim: first.ambient_dim(),
        subspace_dim: first.dim(),
        bases: bases
            .iter()
            .map(|b| (0..b.dim()).map(|c| b.column(c).to_vec()).collect())
            .collect(),
    };
    Ok(serde_json::to_string_pretty(&file)?)
}

pub fn bases_from_json(text: &str) -> Result<Vec<Basis>> {
    let file: BasesFile = serde_json::from_str(text)?;
    file.bases
        .into_iter()
        .map(|cols| {
            if cols.len() != file.subspace_dim || cols.iter().any(|c| c.len() != file.ambient_dim) {
                return Err(Error::InconsistentBases);
            }
            let flat: Vec<f64> = cols.into_iter().flatten().collect();
            Basis::from_orthonormal(DMatrix::from_vec(file.ambient_dim, file.subspace_dim, flat))
        })
        .collect()
}

pub fn read_bases(path: impl AsRef<Path>) -> Result<Vec<Basis>> {
    bases_from_json(&std::fs::read_to_string(path)?)
}

pub fn write_bases(path: impl AsRef<Path>, bases: &[Basis]) -> Result<()> {
    Ok(std::fs::write(path, bases_to_json(bases)?)?)
}
