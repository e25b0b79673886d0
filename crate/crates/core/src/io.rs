//! Plain-text input files.
//!
//! Anchors: CSV with one anchor per row (`x,y` or `x,y,z`).
//! Ranges: CSV with all ranges on a single row, in anchor order.
//! Blank lines and lines starting with `#` are ignored. There is no header.

use std::path::Path;

use crate::core::{AnchorSet, RangeVector};
use crate::error::{Error, Result};

fn records(text: &str) -> Result<Vec<(usize, Vec<f64>)>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let body = raw.trim();
        if body.is_empty() || body.starts_with('#') {
            continue;
        }
        let vals = body
            .split(',')
            .map(|f| {
                let f = f.trim();
                f.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| Error::Parse { line, message: format!("'{f}' is not a finite number") })
            })
            .collect::<Result<Vec<_>>>()?;
        out.push((line, vals));
    }
    Ok(out)
}

pub fn parse_anchors(text: &str) -> Result<AnchorSet> {
    let rows = records(text)?;
    let Some((_, first)) = rows.first() else {
        return Err(Error::Parse { line: 1, message: "no anchors".into() });
    };
    let n = first.len();
    if !(2..=3).contains(&n) {
        return Err(Error::Parse { line: rows[0].0, message: format!("anchors need 2 or 3 coordinates, got {n}") });
    }
    for (line, r) in &rows {
        if r.len() != n {
            return Err(Error::Parse { line: *line, message: format!("expected {n} coordinates, got {}", r.len()) });
        }
    }
    let rows: Vec<Vec<f64>> = rows.into_iter().map(|(_, r)| r).collect();
    AnchorSet::from_rows(&rows)
}

pub fn parse_ranges(text: &str) -> Result<RangeVector> {
    let rows = records(text)?;
    match rows.as_slice() {
        [] => Err(Error::Parse { line: 1, message: "no ranges".into() }),
        [(line, r)] => {
            if let Some(i) = r.iter().position(|&v| v <= 0.0) {
                return Err(Error::Parse { line: *line, message: format!("range {} is not positive", i + 1) });
            }
            RangeVector::from_slice(r)
        }
        [_, (line, _), ..] => {
            Err(Error::Parse { line: *line, message: "ranges must be on a single row".into() })
        }
    }
}

pub fn read_anchors(path: &Path) -> Result<AnchorSet> {
    parse_anchors(&std::fs::read_to_string(path)?)
}

pub fn read_ranges(path: &Path) -> Result<RangeVector> {
    parse_ranges(&std::fs::read_to_string(path)?)
}

/// Anchor file contents for `anchors`, readable by [`parse_anchors`].
pub fn anchors_csv(anchors: &AnchorSet) -> String {
    let p = anchors.positions();
    let mut s = String::new();
    for i in 0..p.nrows() {
        let row: Vec<String> = p.row(i).iter().map(|v| format!("{v:e}")).collect();
        s.push_str(&row.join(","));
        s.push('\n');
    }
    s
}

pub fn ranges_csv(ranges: &RangeVector) -> String {
    let row: Vec<String> = ranges.values().iter().map(|v| format!("{v:e}")).collect();
    row.join(",") + "\n"
}
