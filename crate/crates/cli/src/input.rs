// SPDX-License-Identifier: MIT OR Apache-2.0

//! Series ingestion from CSV or plain text.

use std::io::Read;
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::Serialize;

/// Where the values came from, echoed into reports.
#[derive(Clone, Debug, Serialize)]
pub struct InputInfo {
    pub path: String,
    pub column: String,
    pub header: bool,
    pub rows: usize,
}

/// Column selector: 1-based position or header name.
#[derive(Clone, Debug, PartialEq)]
pub enum Column {
    Index(usize),
    Name(String),
}

impl Column {
    pub fn parse(s: &str) -> Self {
        match s.trim().parse::<usize>() {
            Ok(i) => Column::Index(i),
            Err(_) => Column::Name(s.trim().to_string()),
        }
    }
}

fn strip_comments(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for line in text.lines() {
        let body = line.split('#').next().unwrap_or("").trim();
        if !body.is_empty() {
            out.push_str(body);
            out.push('\n');
        }
    }
    out
}

fn delimiter(text: &str) -> u8 {
    let first = text.lines().next().unwrap_or("");
    if first.contains(',') {
        b','
    } else if first.contains('\t') {
        b'\t'
    } else if first.contains(';') {
        b';'
    } else {
        b' '
    }
}

/// Parses one value per row from `text`. A first row whose selected field
/// is not numeric is taken as a header.
pub fn parse_values(text: &str, column: Option<&Column>) -> Result<(Vec<f64>, bool, String)> {
    let clean = strip_comments(text);
    let delim = delimiter(&clean);
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .delimiter(delim)
        .trim(csv::Trim::All)
        .from_reader(clean.as_bytes());
    let mut records = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.with_context(|| format!("malformed row {}", i + 1))?;
        // Runs of spaces produce empty fields.
        let fields: Vec<String> = rec.iter().filter(|f| delim != b' ' || !f.is_empty()).map(String::from).collect();
        records.push(fields);
    }
    let Some(first) = records.first() else {
        bail!("input contains no data rows");
    };
    let is_number = |s: &str| s.trim_matches('"').parse::<f64>().is_ok();
    let (idx, header) = match column {
        None | Some(Column::Index(_)) => {
            let idx = match column {
                Some(Column::Index(0)) => bail!("column indices are 1-based"),
                Some(Column::Index(i)) => i - 1,
                _ => 0,
            };
            let header = first.get(idx).is_some_and(|f| !is_number(f));
            (idx, header)
        }
        Some(Column::Name(name)) => {
            let idx = first
                .iter()
                .position(|f| f.trim_matches('"') == name)
                .with_context(|| format!("no column named '{name}' in the header"))?;
            (idx, true)
        }
    };
    let label = if header { first[idx].trim_matches('"').to_string() } else { format!("{}", idx + 1) };
    let mut values = Vec::with_capacity(records.len());
    for (row, rec) in records.iter().enumerate().skip(usize::from(header)) {
        let field = rec
            .get(idx)
            .with_context(|| format!("row {} has no column {}", row + 1, idx + 1))?;
        let v: f64 = field
            .trim_matches('"')
            .parse()
            .with_context(|| format!("row {}: '{field}' is not a number", row + 1))?;
        if !v.is_finite() {
            bail!("row {}: value is not finite", row + 1);
        }
        values.push(v);
    }
    if values.len() < 2 {
        bail!("series needs at least two observations, found {}", values.len());
    }
    Ok((values, header, label))
}

/// Reads a file, or standard input for `-`.
pub fn read_series(path: &Path, column: Option<&Column>) -> Result<(Vec<f64>, InputInfo)> {
    let text = if path == Path::new("-") {
        let mut s = String::new();
        std::io::stdin().read_to_string(&mut s).context("reading standard input")?;
        s
    } else {
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?
    };
    let (values, header, label) = parse_values(&text, column)?;
    let info = InputInfo {
        path: path.display().to_string(),
        column: label,
        header,
        rows: values.len(),
    };
    Ok((values, info))
}
