//! Output writers. Every file starts with the tool version and the fully
//! resolved configuration, so re-running with the embedded config reproduces
//! it byte for byte.
//!
//! CSV uses `.` decimals, `,` separators, one header row, and complex values
//! as paired `_re`/`_im` columns; the provenance lines are `#`-prefixed
//! comments above the header. JSON documents carry the same provenance as
//! top-level fields.

use std::io::Write;
use std::path::Path;

use serde::Serialize;
use serde_json::json;

use crate::config::RunConfig;
use crate::AppError;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

fn numeric(x: f64) -> String {
    if x == x.trunc() && x.abs() < 1e15 {
        // keep integral values stable and compact
        format!("{:.1}", x)
    } else {
        format!("{}", x)
    }
}

/// A CSV table with provenance comments.
pub struct CsvTable {
    lines: Vec<String>,
}

impl CsvTable {
    pub fn new(config: &RunConfig, header: &[String]) -> Result<Self, AppError> {
        let cfg = serde_json::to_string(config)
            .map_err(|e| AppError::Numeric(format!("config serialization: {e}")))?;
        Ok(Self {
            lines: vec![
                format!("# chiralwind {VERSION}"),
                format!("# config {cfg}"),
                header.join(","),
            ],
        })
    }

    pub fn push_row(&mut self, cells: &[f64]) {
        let row: Vec<String> = cells.iter().map(|x| numeric(*x)).collect();
        self.lines.push(row.join(","));
    }

    pub fn push_raw(&mut self, cells: &[String]) {
        self.lines.push(cells.join(","));
    }

    pub fn render(&self) -> String {
        let mut s = self.lines.join("\n");
        s.push('\n');
        s
    }
}

/// Wraps a result payload with version, config and seed.
pub fn json_document<T: Serialize>(config: &RunConfig, payload: &T) -> Result<String, AppError> {
    let doc = json!({
        "version": VERSION,
        "config": config,
        "seed": config.seed,
        "result": payload,
    });
    serde_json::to_string_pretty(&doc)
        .map(|mut s| {
            s.push('\n');
            s
        })
        .map_err(|e| AppError::Numeric(format!("json serialization: {e}")))
}

/// Writes to the path, or stdout when none was given.
pub fn emit(out: Option<&Path>, content: &str) -> Result<(), AppError> {
    match out {
        Some(path) => std::fs::write(path, content)
            .map_err(|e| AppError::Numeric(format!("cannot write {}: {e}", path.display()))),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(content.as_bytes())
                .map_err(|e| AppError::Numeric(format!("stdout: {e}")))
        }
    }
}
