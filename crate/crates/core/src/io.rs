//! File formats: observation CSV input, per-observation CSV exports and
//! atomic writes.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::Path;

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::ranks::{RankSign, ScoredSample};
use crate::transport::EmpiricalMap;

/// Parses observations, one per row, comma separated. A first row that does
/// not parse as numbers is taken as a header. Blank lines are skipped.
pub fn parse_dataset_csv(text: &str) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut dim = 0;
    for (index, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Parse(e.to_string()))?;
        let line = record.position().map_or(index as u64 + 1, |p| p.line());
        if record.iter().all(str::is_empty) {
            continue;
        }
        let parsed: std::result::Result<Vec<f64>, _> = record.iter().map(str::parse::<f64>).collect();
        let row = match parsed {
            Ok(row) => row,
            Err(_) if rows.is_empty() && index == 0 => continue,
            Err(_) => {
                let bad = record.iter().find(|f| f.parse::<f64>().is_err()).unwrap_or("");
                return Err(Error::Parse(format!("line {line}: `{bad}` is not a number")));
            }
        };
        if let Some(x) = row.iter().find(|x| !x.is_finite()) {
            return Err(Error::Parse(format!("line {line}: non-finite value {x}")));
        }
        if rows.is_empty() {
            dim = row.len();
        } else if row.len() != dim {
            return Err(Error::Parse(format!("line {line}: expected {dim} fields, found {}", row.len())));
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Parse("no observations found".into()));
    }
    Dataset::from_rows(rows)
}

/// Reads a file, naming it in any IO error.
pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| std::io::Error::new(e.kind(), format!("{}: {e}", path.display())).into())
}

pub fn read_dataset_csv(path: &Path) -> Result<Dataset> {
    let text = read_text(path)?;
    parse_dataset_csv(&text).map_err(|e| match e {
        Error::Parse(msg) => Error::Parse(format!("{}: {msg}", path.display())),
        other => other,
    })
}

/// Writes `bytes` to a temporary file beside `path` and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

fn header(out: &mut String, prefix: &str, dim: usize) {
    for k in 1..=dim {
        let _ = write!(out, ",{prefix}{k}");
    }
}

fn fields(out: &mut String, values: &[f64]) {
    for v in values {
        let _ = write!(out, ",{v}");
    }
}

/// CSV of the empirical map: observation, grid index, and image coordinates.
pub fn assignment_csv(map: &EmpiricalMap<'_>) -> String {
    let dim = map.grid().dim();
    let mut out = String::from("obs,grid_index");
    header(&mut out, "u", dim);
    out.push('\n');
    for (i, &j) in map.assignment().perm.iter().enumerate() {
        let _ = write!(out, "{i},{j}");
        fields(&mut out, map.image(i));
        out.push('\n');
    }
    out
}

/// CSV of ranks and signs.
pub fn ranks_csv(ranks: &[RankSign]) -> String {
    let dim = ranks.first().map_or(0, |r| r.sign.len());
    let mut out = String::from("obs,rank");
    header(&mut out, "sign", dim);
    out.push('\n');
    for (i, r) in ranks.iter().enumerate() {
        let _ = write!(out, "{i},{}", r.rank);
        fields(&mut out, &r.sign);
        out.push('\n');
    }
    out
}

/// CSV of per-observation scores.
pub fn scores_csv(scored: &ScoredSample) -> String {
    let mut out = String::from("obs");
    header(&mut out, "score", scored.dim);
    out.push('\n');
    for i in 0..scored.len() {
        let _ = write!(out, "{i}");
        fields(&mut out, scored.value(i));
        out.push('\n');
    }
    out
}
