// SPDX-License-Identifier: MIT OR Apache-2.0

//! JSON and CSV writers.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;

use crate::input::InputInfo;

/// Envelope around every command's result.
#[derive(Serialize)]
pub struct CliReport<'a, T: Serialize> {
    pub schema_version: u32,
    pub command: &'a str,
    pub tool_version: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub input: Option<&'a InputInfo>,
    pub result: &'a T,
}

pub fn write_json<T: Serialize>(path: Option<&Path>, command: &str, input: Option<&InputInfo>, result: &T) -> Result<()> {
    let report = CliReport {
        schema_version: cpsi::harness::SCHEMA_VERSION,
        command,
        tool_version: env!("CARGO_PKG_VERSION"),
        input,
        result,
    };
    match path {
        Some(p) => {
            let file = File::create(p).with_context(|| format!("creating {}", p.display()))?;
            let mut w = BufWriter::new(file);
            serde_json::to_writer_pretty(&mut w, &report)?;
            writeln!(w)?;
            w.flush()?;
        }
        None => {
            let mut w = io::stdout().lock();
            serde_json::to_writer_pretty(&mut w, &report)?;
            writeln!(w)?;
        }
    }
    Ok(())
}

/// Writes `rows` under `header`, if a path was requested.
pub fn write_csv<R: Serialize>(path: Option<&Path>, header: &[&str], rows: impl IntoIterator<Item = R>) -> Result<()> {
    let Some(path) = path else {
        return Ok(());
    };
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(path)
        .with_context(|| format!("creating {}", path.display()))?;
    w.write_record(header)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}
